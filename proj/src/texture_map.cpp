#include "texfuse/texture_map.hpp"

#include <algorithm>

#include "texfuse/errors.hpp"

namespace texfuse
{
    TextureMap::TextureMap(RealImage texels) : texels_(std::move(texels))
    {
        if (texels_.channels() != 3)
        {
            throw ImageIoError("texture must have 3 channels");
        }
    }

    BilinearTaps TextureMap::taps(const Eigen::Vector2d& uv) const noexcept
    {
        const Eigen::Vector2d t = this->texel_coords(uv);
        return bilinear_taps(this->width(), this->height(), t.x(), t.y());
    }

    Eigen::Vector3d TextureMap::sample(const Eigen::Vector2d& uv) const noexcept
    {
        const BilinearTaps t = this->taps(uv);
        Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
        for (int k = 0; k < 4; ++k)
        {
            const double* p = texels_.pixel(t.index[k]);
            rgb += t.weight[k] * Eigen::Vector3d(p[0], p[1], p[2]);
        }
        return rgb;
    }

    void TextureMap::clamp_in_place() noexcept
    {
        for (double& v : texels_.data())
        {
            v = std::clamp(v, 0.0, 1.0);
        }
    }

    TextureMap load_texture(const std::filesystem::path& path)
    {
        return TextureMap(to_real(read_png(path, 3)));
    }

    void save_texture(const std::filesystem::path& path, const TextureMap& texture)
    {
        write_png(path, to_bytes(texture.texels()));
    }
} // namespace texfuse
