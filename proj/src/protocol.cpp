#include "texfuse/protocol.hpp"

#include <openssl/evp.h>

#include "texfuse/errors.hpp"

namespace texfuse::protocol
{
    std::string base64_encode(std::span<const std::uint8_t> bytes)
    {
        std::string out(4 * ((bytes.size() + 2) / 3), '\0');
        const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
        out.resize(static_cast<std::size_t>(n));
        return out;
    }

    std::vector<std::uint8_t> base64_decode(std::string_view text)
    {
        if (text.size() % 4 != 0)
        {
            throw MalformedResponse("base64 payload length is not a multiple of 4");
        }
        std::vector<std::uint8_t> out(3 * text.size() / 4);
        const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
        if (n < 0)
        {
            throw MalformedResponse("invalid base64 payload");
        }
        // EVP_DecodeBlock keeps the bytes produced by '=' padding.
        std::size_t padding = 0;
        if (!text.empty() && text.back() == '=')
        {
            ++padding;
            if (text.size() > 1 && text[text.size() - 2] == '=')
            {
                ++padding;
            }
        }
        out.resize(static_cast<std::size_t>(n) - padding);
        return out;
    }

    std::string encode_image(const ByteImage& image)
    {
        return base64_encode(encode_png(image));
    }

    std::string encode_image(const WordImage& image)
    {
        return base64_encode(encode_png(image));
    }

    ByteImage decode_image(std::string_view b64, int channels)
    {
        const auto bytes = base64_decode(b64);
        try
        {
            return decode_png(bytes, channels);
        }
        catch (const ImageIoError& e)
        {
            throw MalformedResponse(e.what());
        }
    }

    WordImage decode_image16(std::string_view b64)
    {
        const auto bytes = base64_decode(b64);
        try
        {
            return decode_png16(bytes);
        }
        catch (const ImageIoError& e)
        {
            throw MalformedResponse(e.what());
        }
    }

    namespace
    {
        const nlohmann::json& Field(const nlohmann::json& body, const char* name)
        {
            if (!body.is_object() || !body.contains(name))
            {
                throw MalformedResponse(std::string("missing field '") + name + "'");
            }
            return body.at(name);
        }

        std::string StringField(const nlohmann::json& body, const char* name)
        {
            const auto& v = Field(body, name);
            if (!v.is_string())
            {
                throw MalformedResponse(std::string("field '") + name + "' must be a string");
            }
            return v.get<std::string>();
        }

        double NumberField(const nlohmann::json& body, const char* name)
        {
            const auto& v = Field(body, name);
            if (!v.is_number())
            {
                throw MalformedResponse(std::string("field '") + name + "' must be a number");
            }
            return v.get<double>();
        }

        std::int64_t IntegerField(const nlohmann::json& body, const char* name)
        {
            const auto& v = Field(body, name);
            if (!v.is_number_integer())
            {
                throw MalformedResponse(std::string("field '") + name + "' must be an integer");
            }
            return v.get<std::int64_t>();
        }

        std::uint64_t SeedField(const nlohmann::json& body)
        {
            const auto& v = Field(body, "seed");
            if (v.is_number_unsigned())
            {
                return v.get<std::uint64_t>();
            }
            if (v.is_number_integer())
            {
                return static_cast<std::uint64_t>(v.get<std::int64_t>());
            }
            throw MalformedResponse("field 'seed' must be an integer");
        }

        ByteImage ImageField(const nlohmann::json& body, const char* name, int channels)
        {
            try
            {
                return decode_image(StringField(body, name), channels);
            }
            catch (const MalformedResponse& e)
            {
                throw MalformedResponse(std::string("field '") + name + "': " + e.what());
            }
        }
    } // namespace

    nlohmann::json to_json(const InpaintRequest& request)
    {
        return {
            {"image", encode_image(request.blended)},
            {"known_mask", encode_image(request.known_mask)},
            {"normal", encode_image(request.normal_map)},
            {"silhouette", encode_image(request.silhouette)},
            {"prompt", request.prompt},
            {"negative_prompt", request.negative_prompt},
            {"seed", request.seed},
            {"guidance_scale", request.guidance_scale},
            {"steps", request.steps},
            {"azimuth", request.view_azimuth},
            {"guidance", std::string(to_string(request.guidance))},
        };
    }

    nlohmann::json to_json(const BackViewRequest& request)
    {
        return {
            {"input_image", encode_image(request.input_image)},
            {"normal", encode_image(request.normal_map)},
            {"depth", encode_image(request.depth)},
            {"silhouette", encode_image(request.silhouette)},
            {"prompt", request.prompt},
            {"seed", request.seed},
        };
    }

    nlohmann::json to_json(const InpaintResponse& response)
    {
        return {
            {"image", encode_image(response.image)},
            {"backend_id", response.backend_id},
            {"elapsed_ms", response.elapsed_ms},
        };
    }

    InpaintRequest inpaint_request_from_json(const nlohmann::json& body)
    {
        InpaintRequest r;
        r.blended = ImageField(body, "image", 3);
        r.known_mask = ImageField(body, "known_mask", 1);
        r.normal_map = ImageField(body, "normal", 3);
        r.silhouette = ImageField(body, "silhouette", 1);
        r.prompt = StringField(body, "prompt");
        r.negative_prompt = body.contains("negative_prompt") ? StringField(body, "negative_prompt") : std::string();
        r.seed = SeedField(body);
        r.guidance_scale = NumberField(body, "guidance_scale");
        r.steps = static_cast<int>(IntegerField(body, "steps"));
        r.view_azimuth = NumberField(body, "azimuth");
        if (body.contains("guidance"))
        {
            try
            {
                r.guidance = parse_guidance(StringField(body, "guidance"));
            }
            catch (const ConfigError& e)
            {
                throw MalformedResponse(e.what());
            }
        }
        return r;
    }

    BackViewRequest backview_request_from_json(const nlohmann::json& body)
    {
        BackViewRequest r;
        r.input_image = ImageField(body, "input_image", 3);
        r.normal_map = ImageField(body, "normal", 3);
        try
        {
            r.depth = decode_image16(StringField(body, "depth"));
        }
        catch (const MalformedResponse& e)
        {
            throw MalformedResponse(std::string("field 'depth': ") + e.what());
        }
        r.silhouette = ImageField(body, "silhouette", 1);
        r.prompt = StringField(body, "prompt");
        r.seed = SeedField(body);
        return r;
    }

    InpaintResponse inpaint_response_from_json(const nlohmann::json& body)
    {
        InpaintResponse r;
        r.image = ImageField(body, "image", 3);
        r.backend_id = StringField(body, "backend_id");
        r.elapsed_ms = IntegerField(body, "elapsed_ms");
        return r;
    }

    ByteImage backview_response_from_json(const nlohmann::json& body)
    {
        return ImageField(body, "image", 3);
    }
} // namespace texfuse::protocol
