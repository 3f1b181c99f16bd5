#pragma once

#include <Eigen/Core>

#include "texfuse/image.hpp"

namespace texfuse
{
    // UV texture: RGB texels in [0, 1]. Row 0 is the top of the image, so UV
    // v = 1 addresses the first row (Wavefront convention).
    class TextureMap
    {
    public:
        TextureMap() = default;
        TextureMap(int width, int height, double fill = 0.5) : texels_(width, height, 3, fill)
        {
        }
        explicit TextureMap(RealImage texels);

        int width() const noexcept
        {
            return texels_.width();
        }
        int height() const noexcept
        {
            return texels_.height();
        }
        bool empty() const noexcept
        {
            return texels_.empty();
        }

        RealImage& texels() noexcept
        {
            return texels_;
        }
        const RealImage& texels() const noexcept
        {
            return texels_;
        }

        // Continuous texel coordinates for a UV (texel centers at integers).
        Eigen::Vector2d texel_coords(const Eigen::Vector2d& uv) const noexcept
        {
            return {uv.x() * width() - 0.5, (1.0 - uv.y()) * height() - 0.5};
        }

        BilinearTaps taps(const Eigen::Vector2d& uv) const noexcept;
        Eigen::Vector3d sample(const Eigen::Vector2d& uv) const noexcept;

        void clamp_in_place() noexcept;

    private:
        RealImage texels_;
    };

    TextureMap load_texture(const std::filesystem::path& path);
    void save_texture(const std::filesystem::path& path, const TextureMap& texture);
} // namespace texfuse
