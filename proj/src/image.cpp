#include "texfuse/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <png.h>

#include "texfuse/errors.hpp"

namespace texfuse
{
    RealImage to_real(const ByteImage& image)
    {
        RealImage out(image.width(), image.height(), image.channels());
        auto src = image.data();
        auto dst = out.data();
        for (std::size_t i = 0; i < src.size(); ++i)
        {
            dst[i] = src[i] / 255.0;
        }
        return out;
    }

    std::uint8_t quantize(double value) noexcept
    {
        const double v = std::clamp(value, 0.0, 1.0);
        return static_cast<std::uint8_t>(std::lround(v * 255.0));
    }

    ByteImage to_bytes(const RealImage& image)
    {
        ByteImage out(image.width(), image.height(), image.channels());
        auto src = image.data();
        auto dst = out.data();
        for (std::size_t i = 0; i < src.size(); ++i)
        {
            dst[i] = quantize(src[i]);
        }
        return out;
    }

    ByteImage mask_to_gray(const Mask& mask)
    {
        ByteImage out(mask.width(), mask.height(), 1);
        auto src = mask.data();
        auto dst = out.data();
        for (std::size_t i = 0; i < src.size(); ++i)
        {
            dst[i] = src[i] ? 255 : 0;
        }
        return out;
    }

    Mask gray_to_mask(const ByteImage& gray)
    {
        Mask out(gray.width(), gray.height(), 1);
        for (std::size_t i = 0; i < gray.pixel_count(); ++i)
        {
            out.data()[i] = gray.pixel(i)[0] >= 128 ? 1 : 0;
        }
        return out;
    }

    std::size_t count_nonzero(const Mask& mask)
    {
        return static_cast<std::size_t>(std::count_if(mask.data().begin(), mask.data().end(), [](auto v) { return v != 0; }));
    }

    BilinearTaps bilinear_taps(int width, int height, double x, double y) noexcept
    {
        const double fx0 = std::floor(x);
        const double fy0 = std::floor(y);
        const double tx = x - fx0;
        const double ty = y - fy0;
        const auto clamp_x = [width](double v) { return static_cast<std::int32_t>(std::clamp(v, 0.0, width - 1.0)); };
        const auto clamp_y = [height](double v) { return static_cast<std::int32_t>(std::clamp(v, 0.0, height - 1.0)); };
        const std::int32_t x0 = clamp_x(fx0);
        const std::int32_t x1 = clamp_x(fx0 + 1);
        const std::int32_t y0 = clamp_y(fy0);
        const std::int32_t y1 = clamp_y(fy0 + 1);

        BilinearTaps taps;
        taps.index = {y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1};
        taps.weight = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
        return taps;
    }

    Eigen::Vector3d sample_rgb(const RealImage& image, double px, double py) noexcept
    {
        const BilinearTaps taps = bilinear_taps(image.width(), image.height(), px - 0.5, py - 0.5);
        Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
        for (int k = 0; k < 4; ++k)
        {
            const double* p = image.pixel(taps.index[k]);
            rgb += taps.weight[k] * Eigen::Vector3d(p[0], p[1], p[2]);
        }
        return rgb;
    }

    namespace
    {
        png_uint_32 FormatForChannels(int channels)
        {
            switch (channels)
            {
            case 1:
                return PNG_FORMAT_GRAY;
            case 3:
                return PNG_FORMAT_RGB;
            case 4:
                return PNG_FORMAT_RGBA;
            default:
                throw ImageIoError("unsupported channel count " + std::to_string(channels));
            }
        }

        std::vector<std::uint8_t> WriteToMemory(png_image& img, const void* buffer)
        {
            png_alloc_size_t size = 0;
            if (!png_image_write_to_memory(&img, nullptr, &size, 0, buffer, 0, nullptr))
            {
                throw ImageIoError(std::string("png encode failed: ") + img.message);
            }
            std::vector<std::uint8_t> bytes(size);
            if (!png_image_write_to_memory(&img, bytes.data(), &size, 0, buffer, 0, nullptr))
            {
                throw ImageIoError(std::string("png encode failed: ") + img.message);
            }
            bytes.resize(size);
            return bytes;
        }

        std::vector<std::uint8_t> ReadFile(const std::filesystem::path& path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
            {
                throw ImageIoError("cannot open " + path.string());
            }
            return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        }
    } // namespace

    std::vector<std::uint8_t> encode_png(const ByteImage& image)
    {
        png_image img{};
        img.version = PNG_IMAGE_VERSION;
        img.width = image.width();
        img.height = image.height();
        img.format = FormatForChannels(image.channels());
        return WriteToMemory(img, image.data().data());
    }

    std::vector<std::uint8_t> encode_png(const WordImage& image)
    {
        if (image.channels() != 1)
        {
            throw ImageIoError("16-bit PNG export supports grayscale only");
        }
        png_image img{};
        img.version = PNG_IMAGE_VERSION;
        img.width = image.width();
        img.height = image.height();
        img.format = PNG_FORMAT_LINEAR_Y;
        return WriteToMemory(img, image.data().data());
    }

    ByteImage decode_png(std::span<const std::uint8_t> bytes, int channels)
    {
        png_image img{};
        img.version = PNG_IMAGE_VERSION;
        if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        {
            throw ImageIoError(std::string("png decode failed: ") + img.message);
        }
        img.format = FormatForChannels(channels);
        ByteImage out(img.width, img.height, channels);
        const png_color white{255, 255, 255};
        if (!png_image_finish_read(&img, &white, out.data().data(), 0, nullptr))
        {
            png_image_free(&img);
            throw ImageIoError(std::string("png decode failed: ") + img.message);
        }
        return out;
    }

    WordImage decode_png16(std::span<const std::uint8_t> bytes)
    {
        png_image img{};
        img.version = PNG_IMAGE_VERSION;
        if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        {
            throw ImageIoError(std::string("png decode failed: ") + img.message);
        }
        img.format = PNG_FORMAT_LINEAR_Y;
        WordImage out(img.width, img.height, 1);
        if (!png_image_finish_read(&img, nullptr, out.data().data(), 0, nullptr))
        {
            png_image_free(&img);
            throw ImageIoError(std::string("png decode failed: ") + img.message);
        }
        return out;
    }

    ByteImage read_png(const std::filesystem::path& path, int channels)
    {
        const auto bytes = ReadFile(path);
        try
        {
            return decode_png(bytes, channels);
        }
        catch (const ImageIoError& e)
        {
            throw ImageIoError(path.string() + ": " + e.what());
        }
    }

    void write_png(const std::filesystem::path& path, const ByteImage& image)
    {
        const auto bytes = encode_png(image);
        std::ofstream out(path, std::ios::binary);
        if (!out)
        {
            throw ImageIoError("cannot write " + path.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }

    namespace
    {
        constexpr char DumpMagic[4] = {'T', 'X', 'F', 'B'};

        void PutU32(std::ofstream& out, std::uint32_t v)
        {
            const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
            out.write(reinterpret_cast<const char*>(b), 4);
        }

        std::uint32_t GetU32(const std::uint8_t* p)
        {
            return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
        }
    } // namespace

    void write_float_dump(const std::filesystem::path& path, const RealImage& image)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
        {
            throw ImageIoError("cannot write " + path.string());
        }
        out.write(DumpMagic, 4);
        PutU32(out, image.width());
        PutU32(out, image.height());
        PutU32(out, image.channels());
        for (double v : image.data())
        {
            PutU32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    }

    RealImage read_float_dump(const std::filesystem::path& path)
    {
        const auto bytes = ReadFile(path);
        if (bytes.size() < 16 || std::memcmp(bytes.data(), DumpMagic, 4) != 0)
        {
            throw ImageIoError(path.string() + ": not a float dump");
        }
        const int w = static_cast<int>(GetU32(bytes.data() + 4));
        const int h = static_cast<int>(GetU32(bytes.data() + 8));
        const int c = static_cast<int>(GetU32(bytes.data() + 12));
        RealImage out(w, h, c);
        if (bytes.size() != 16 + out.data().size() * 4)
        {
            throw ImageIoError(path.string() + ": truncated float dump");
        }
        for (std::size_t i = 0; i < out.data().size(); ++i)
        {
            out.data()[i] = std::bit_cast<float>(GetU32(bytes.data() + 16 + 4 * i));
        }
        return out;
    }

    ByteImage normalized_gray(const RealImage& field)
    {
        double peak = 0;
        for (double v : field.data())
        {
            peak = std::max(peak, v);
        }
        ByteImage out(field.width(), field.height(), 1);
        for (std::size_t i = 0; i < field.pixel_count(); ++i)
        {
            out.data()[i] = peak > 0 ? quantize(field.pixel(i)[0] / peak) : 0;
        }
        return out;
    }
} // namespace texfuse
