#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace texfuse
{
    // Interleaved, row-major image with a fixed channel count.
    template <typename T>
    class Image
    {
    public:
        Image() = default;
        Image(int width, int height, int channels, T fill = T{})
            : width_(width), height_(height), channels_(channels),
              data_(static_cast<std::size_t>(width) * height * channels, fill)
        {
        }

        int width() const noexcept
        {
            return width_;
        }
        int height() const noexcept
        {
            return height_;
        }
        int channels() const noexcept
        {
            return channels_;
        }
        bool empty() const noexcept
        {
            return data_.empty();
        }
        std::size_t pixel_count() const noexcept
        {
            return static_cast<std::size_t>(width_) * height_;
        }

        std::size_t offset(int x, int y) const noexcept
        {
            return (static_cast<std::size_t>(y) * width_ + x) * channels_;
        }

        T& at(int x, int y, int c = 0) noexcept
        {
            return data_[this->offset(x, y) + c];
        }
        const T& at(int x, int y, int c = 0) const noexcept
        {
            return data_[this->offset(x, y) + c];
        }

        T* pixel(std::size_t index) noexcept
        {
            return data_.data() + index * channels_;
        }
        const T* pixel(std::size_t index) const noexcept
        {
            return data_.data() + index * channels_;
        }

        std::span<T> data() noexcept
        {
            return data_;
        }
        std::span<const T> data() const noexcept
        {
            return data_;
        }

        template <typename U>
        bool same_shape(const Image<U>& other) const noexcept
        {
            return width_ == other.width() && height_ == other.height() && channels_ == other.channels();
        }

        template <typename U>
        bool same_size(const Image<U>& other) const noexcept
        {
            return width_ == other.width() && height_ == other.height();
        }

        friend bool operator==(const Image&, const Image&) = default;

    private:
        int width_ = 0;
        int height_ = 0;
        int channels_ = 0;
        std::vector<T> data_;
    };

    using ByteImage = Image<std::uint8_t>;
    using WordImage = Image<std::uint16_t>;
    using RealImage = Image<double>;
    // Single channel, values 0 or 1.
    using Mask = Image<std::uint8_t>;

    RealImage to_real(const ByteImage& image);
    // round(255 * clamp(v, 0, 1)) per channel.
    ByteImage to_bytes(const RealImage& image);
    std::uint8_t quantize(double value) noexcept;

    ByteImage mask_to_gray(const Mask& mask);
    Mask gray_to_mask(const ByteImage& gray);
    std::size_t count_nonzero(const Mask& mask);

    struct BilinearTaps
    {
        std::array<std::int32_t, 4> index; // pixel (not element) indices
        std::array<double, 4> weight;
    };

    // Bilinear footprint at continuous coordinates where integer values hit
    // sample centers; out-of-range taps clamp to the edge.
    BilinearTaps bilinear_taps(int width, int height, double x, double y) noexcept;

    // Samples an image at pixel-space coordinates with pixel centers at i + 0.5.
    Eigen::Vector3d sample_rgb(const RealImage& image, double px, double py) noexcept;

    // PNG (8-bit gray/RGB and 16-bit gray).
    ByteImage read_png(const std::filesystem::path& path, int channels = 3);
    void write_png(const std::filesystem::path& path, const ByteImage& image);
    std::vector<std::uint8_t> encode_png(const ByteImage& image);
    std::vector<std::uint8_t> encode_png(const WordImage& image);
    ByteImage decode_png(std::span<const std::uint8_t> bytes, int channels = 3);
    WordImage decode_png16(std::span<const std::uint8_t> bytes);

    // Debug dump: "TXFB", u32 width, u32 height, u32 channels, then little-endian f32 row-major.
    void write_float_dump(const std::filesystem::path& path, const RealImage& image);
    RealImage read_float_dump(const std::filesystem::path& path);

    // Single-channel field normalized by its maximum into an 8-bit image.
    ByteImage normalized_gray(const RealImage& field);
} // namespace texfuse
