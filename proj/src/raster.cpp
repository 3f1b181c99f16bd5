#include "texfuse/camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

#include "texfuse/errors.hpp"

namespace texfuse
{
    Eigen::Matrix3d Camera::rotation() const noexcept
    {
        const double az = azimuth * std::numbers::pi / 180.0;
        const double el = elevation * std::numbers::pi / 180.0;
        const Eigen::Vector3d back(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
        const Eigen::Vector3d right(std::cos(az), 0.0, -std::sin(az));
        const Eigen::Vector3d up = back.cross(right);
        Eigen::Matrix3d r;
        r.row(0) = right;
        r.row(1) = up;
        r.row(2) = back;
        return r;
    }

    Eigen::Vector3d Camera::view_direction() const noexcept
    {
        return -this->rotation().row(2).transpose();
    }

    Eigen::Vector3d Camera::to_camera(const Eigen::Vector3d& world) const noexcept
    {
        return this->rotation() * world;
    }

    Eigen::Vector2d Camera::project(const Eigen::Vector3d& world) const noexcept
    {
        const Eigen::Vector3d c = this->to_camera(world);
        return {principal_point.x() + scale * c.x(), principal_point.y() - scale * c.y()};
    }

    double Camera::depth(const Eigen::Vector3d& world) const noexcept
    {
        return -this->to_camera(world).z();
    }

    double default_scale(int width, int height) noexcept
    {
        return 0.45 * std::min(width, height);
    }

    double normalize_azimuth(double degrees) noexcept
    {
        double a = std::fmod(degrees, 360.0);
        if (a <= -180.0)
        {
            a += 360.0;
        }
        else if (a > 180.0)
        {
            a -= 360.0;
        }
        return a;
    }

    Camera make_turntable_camera(double azimuth, const RenderSettings& settings)
    {
        if (settings.width <= 0 || settings.height <= 0)
        {
            throw Error("image size must be positive");
        }
        Camera cam;
        cam.azimuth = azimuth;
        cam.elevation = settings.elevation;
        cam.width = settings.width;
        cam.height = settings.height;
        cam.scale = settings.scale.value_or(default_scale(settings.width, settings.height));
        cam.principal_point = Eigen::Vector2d(settings.width / 2.0, settings.height / 2.0);
        return cam;
    }

    namespace
    {
        // Evaluated with canonically ordered endpoints so that swapping the
        // endpoints negates the result exactly.
        double EdgeFunction(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) noexcept
        {
            const bool swapped = b.x() < a.x() || (b.x() == a.x() && b.y() < a.y());
            const Eigen::Vector2d& s = swapped ? b : a;
            const Eigen::Vector2d& t = swapped ? a : b;
            const double e = (t.x() - s.x()) * (p.y() - s.y()) - (t.y() - s.y()) * (p.x() - s.x());
            return swapped ? -e : e;
        }

        // True when the inward normal of edge (a, b) points right, or straight down in image rows.
        bool IsTopLeft(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double orientation) noexcept
        {
            const double gx = -(b.y() - a.y()) * orientation;
            const double gy = (b.x() - a.x()) * orientation;
            return gx > 0 || (gx == 0 && gy > 0);
        }
    } // namespace

    ViewBuffers rasterize(const TriangleMesh& mesh, const Camera& camera)
    {
        ViewBuffers buf;
        buf.width = camera.width;
        buf.height = camera.height;
        const std::size_t n = static_cast<std::size_t>(camera.width) * camera.height;
        buf.face_id.assign(n, SentinelEmpty);
        buf.depth.assign(n, std::numeric_limits<double>::infinity());
        buf.world_pos.assign(n, Eigen::Vector3d::Zero());
        buf.world_normal.assign(n, Eigen::Vector3d::Zero());
        buf.uv.assign(n, Eigen::Vector2d::Zero());
        buf.silhouette.assign(n, 0);

        const bool has_normals = mesh.vertex_normals.size() == mesh.vertices.size();
        for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        {
            const Face& face = mesh.faces[f];
            Eigen::Vector2d s[3];
            for (int k = 0; k < 3; ++k)
            {
                s[k] = camera.project(mesh.vertices[face[k]]);
            }
            const double area = EdgeFunction(s[0], s[1], s[2]);
            if (area == 0 || !std::isfinite(area))
            {
                continue;
            }
            const double orientation = area > 0 ? 1.0 : -1.0;
            const double inv_area = 1.0 / std::abs(area);
            const bool top_left[3] = {
                IsTopLeft(s[1], s[2], orientation),
                IsTopLeft(s[2], s[0], orientation),
                IsTopLeft(s[0], s[1], orientation),
            };

            const double min_x = std::min({s[0].x(), s[1].x(), s[2].x()});
            const double max_x = std::max({s[0].x(), s[1].x(), s[2].x()});
            const double min_y = std::min({s[0].y(), s[1].y(), s[2].y()});
            const double max_y = std::max({s[0].y(), s[1].y(), s[2].y()});
            const int x0 = std::max(0, static_cast<int>(std::ceil(min_x - 0.5)));
            const int x1 = std::min(camera.width - 1, static_cast<int>(std::floor(max_x - 0.5)));
            const int y0 = std::max(0, static_cast<int>(std::ceil(min_y - 0.5)));
            const int y1 = std::min(camera.height - 1, static_cast<int>(std::floor(max_y - 0.5)));

            for (int y = y0; y <= y1; ++y)
            {
                for (int x = x0; x <= x1; ++x)
                {
                    const Eigen::Vector2d p(x + 0.5, y + 0.5);
                    const double w[3] = {
                        orientation * EdgeFunction(s[1], s[2], p),
                        orientation * EdgeFunction(s[2], s[0], p),
                        orientation * EdgeFunction(s[0], s[1], p),
                    };
                    bool inside = true;
                    for (int k = 0; k < 3 && inside; ++k)
                    {
                        inside = w[k] > 0 || (w[k] == 0 && top_left[k]);
                    }
                    if (!inside)
                    {
                        continue;
                    }
                    const double b0 = w[0] * inv_area;
                    const double b1 = w[1] * inv_area;
                    const double b2 = w[2] * inv_area;
                    const Eigen::Vector3d pos =
                        b0 * mesh.vertices[face[0]] + b1 * mesh.vertices[face[1]] + b2 * mesh.vertices[face[2]];
                    const double d = camera.depth(pos);
                    const std::size_t idx = static_cast<std::size_t>(y) * camera.width + x;
                    if (!(d < buf.depth[idx]))
                    {
                        continue;
                    }
                    buf.depth[idx] = d;
                    buf.face_id[idx] = static_cast<std::int32_t>(f);
                    buf.world_pos[idx] = pos;

                    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
                    if (has_normals)
                    {
                        normal = b0 * mesh.vertex_normals[face[0]] + b1 * mesh.vertex_normals[face[1]] +
                                 b2 * mesh.vertex_normals[face[2]];
                    }
                    if (normal.squaredNorm() < 1e-24)
                    {
                        normal = face_normal(mesh, static_cast<int>(f));
                    }
                    buf.world_normal[idx] = normal.normalized();

                    const CornerUvs& uv = mesh.corner_uvs[f];
                    buf.uv[idx] = (b0 * uv[0] + b1 * uv[1] + b2 * uv[2]).cwiseMax(0.0).cwiseMin(1.0);
                    buf.silhouette[idx] = 1;
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i)
        {
            if (!buf.silhouette[i])
            {
                buf.depth[i] = 0.0;
            }
        }
        return buf;
    }

    ByteImage render_normal_map(const ViewBuffers& buffers, const Camera& camera)
    {
        ByteImage out(buffers.width, buffers.height, 3, 128);
        const Eigen::Matrix3d r = camera.rotation();
        for (std::size_t i = 0; i < buffers.pixel_count(); ++i)
        {
            if (!buffers.covered(i))
            {
                continue;
            }
            const Eigen::Vector3d n = r * buffers.world_normal[i];
            std::uint8_t* px = out.pixel(i);
            for (int c = 0; c < 3; ++c)
            {
                px[c] = quantize((n[c] + 1.0) / 2.0);
            }
        }
        return out;
    }

    ByteImage render_silhouette(const ViewBuffers& buffers)
    {
        ByteImage out(buffers.width, buffers.height, 1, 0);
        for (std::size_t i = 0; i < buffers.pixel_count(); ++i)
        {
            out.data()[i] = buffers.covered(i) ? 255 : 0;
        }
        return out;
    }

    Mask silhouette_mask(const ViewBuffers& buffers)
    {
        Mask out(buffers.width, buffers.height, 1, 0);
        std::copy(buffers.silhouette.begin(), buffers.silhouette.end(), out.data().begin());
        return out;
    }

    WordImage render_depth16(const ViewBuffers& buffers)
    {
        // Normalized meshes lie within depth [-sqrt(3), sqrt(3)].
        const double range = std::sqrt(3.0);
        WordImage out(buffers.width, buffers.height, 1, 0);
        for (std::size_t i = 0; i < buffers.pixel_count(); ++i)
        {
            if (buffers.covered(i))
            {
                const double t = std::clamp((range - buffers.depth[i]) / (2 * range), 0.0, 1.0);
                out.data()[i] = static_cast<std::uint16_t>(1 + std::lround(65534.0 * t));
            }
        }
        return out;
    }

    RealImage render_textured(const ViewBuffers& buffers, const TextureMap& texture)
    {
        RealImage out(buffers.width, buffers.height, 3, 1.0);
        for (std::size_t i = 0; i < buffers.pixel_count(); ++i)
        {
            if (!buffers.covered(i))
            {
                continue;
            }
            const Eigen::Vector3d rgb = texture.sample(buffers.uv[i]);
            double* px = out.pixel(i);
            px[0] = rgb.x();
            px[1] = rgb.y();
            px[2] = rgb.z();
        }
        return out;
    }

    RealImage render_textured(const TriangleMesh& mesh, const TextureMap& texture, const Camera& camera)
    {
        if (texture.empty())
        {
            throw Error("render_textured: empty texture");
        }
        return render_textured(rasterize(mesh, camera), texture);
    }

    std::vector<int> visible_face_set(const ViewBuffers& buffers)
    {
        std::vector<int> faces;
        for (auto id : buffers.face_id)
        {
            if (id != SentinelEmpty)
            {
                faces.push_back(id);
            }
        }
        std::sort(faces.begin(), faces.end());
        faces.erase(std::unique(faces.begin(), faces.end()), faces.end());
        return faces;
    }
} // namespace texfuse
