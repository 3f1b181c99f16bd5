#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "texfuse/inpaint.hpp"

// Wire format shared by the HTTP client, the mock server and the external
// diffusion service. Images travel as base64-encoded PNG.
namespace texfuse::protocol
{
    std::string base64_encode(std::span<const std::uint8_t> bytes);
    std::vector<std::uint8_t> base64_decode(std::string_view text);

    std::string encode_image(const ByteImage& image);
    std::string encode_image(const WordImage& image);
    ByteImage decode_image(std::string_view b64, int channels);
    WordImage decode_image16(std::string_view b64);

    nlohmann::json to_json(const InpaintRequest& request);
    nlohmann::json to_json(const BackViewRequest& request);
    nlohmann::json to_json(const InpaintResponse& response);

    // Throw MalformedResponse naming the offending field.
    InpaintRequest inpaint_request_from_json(const nlohmann::json& body);
    BackViewRequest backview_request_from_json(const nlohmann::json& body);
    InpaintResponse inpaint_response_from_json(const nlohmann::json& body);
    ByteImage backview_response_from_json(const nlohmann::json& body);
} // namespace texfuse::protocol
