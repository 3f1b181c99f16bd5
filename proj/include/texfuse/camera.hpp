#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "texfuse/image.hpp"
#include "texfuse/mesh.hpp"
#include "texfuse/texture_map.hpp"

namespace texfuse
{
    struct RenderSettings
    {
        int width = 512;
        int height = 512;
        double elevation = 0.0;
        // Pixels per world unit; default maps [-1, 1] to 90% of the smaller side.
        std::optional<double> scale;
    };

    // Weak-perspective (scaled orthographic) camera orbiting the +Y axis.
    // Azimuth 0 looks down -Z at the subject's front; positive azimuths move
    // toward the subject's left (+X).
    struct Camera
    {
        double azimuth = 0.0;
        double elevation = 0.0;
        double scale = 1.0;
        int width = 0;
        int height = 0;
        Eigen::Vector2d principal_point = Eigen::Vector2d::Zero();

        // Rows: camera right, up, and back (toward the viewer).
        Eigen::Matrix3d rotation() const noexcept;
        Eigen::Vector3d view_direction() const noexcept;
        Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const noexcept;
        // Continuous pixel coordinates; pixel (i, j) has its center at (i + 0.5, j + 0.5).
        Eigen::Vector2d project(const Eigen::Vector3d& world) const noexcept;
        // Signed distance along the view direction; smaller is nearer.
        double depth(const Eigen::Vector3d& world) const noexcept;

        friend bool operator==(const Camera&, const Camera&) = default;
    };

    double default_scale(int width, int height) noexcept;
    // Maps to (-180, 180].
    double normalize_azimuth(double degrees) noexcept;

    Camera make_turntable_camera(double azimuth, const RenderSettings& settings = {});

    inline constexpr std::int32_t SentinelEmpty = -1;

    struct ViewBuffers
    {
        int width = 0;
        int height = 0;
        std::vector<std::int32_t> face_id;
        std::vector<double> depth;
        std::vector<Eigen::Vector3d> world_pos;
        std::vector<Eigen::Vector3d> world_normal;
        std::vector<Eigen::Vector2d> uv;
        std::vector<std::uint8_t> silhouette;

        std::size_t pixel_count() const noexcept
        {
            return face_id.size();
        }
        bool covered(std::size_t index) const noexcept
        {
            return face_id[index] != SentinelEmpty;
        }
    };

    // Z-buffered, one sample per pixel center, no culling; depth ties keep the
    // lower face index. Shared edges follow a top-left rule so a pixel center
    // is owned by exactly one of two adjacent triangles.
    ViewBuffers rasterize(const TriangleMesh& mesh, const Camera& camera);

    // Camera-space normals encoded as round(255 (n + 1) / 2); background (128, 128, 128).
    ByteImage render_normal_map(const ViewBuffers& buffers, const Camera& camera);
    ByteImage render_silhouette(const ViewBuffers& buffers);
    // 16-bit depth with near = high; background 0.
    WordImage render_depth16(const ViewBuffers& buffers);

    RealImage render_textured(const ViewBuffers& buffers, const TextureMap& texture);
    RealImage render_textured(const TriangleMesh& mesh, const TextureMap& texture, const Camera& camera);

    // Sorted distinct face ids present in the buffers.
    std::vector<int> visible_face_set(const ViewBuffers& buffers);
    Mask silhouette_mask(const ViewBuffers& buffers);
} // namespace texfuse
