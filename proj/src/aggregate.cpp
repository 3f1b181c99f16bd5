#include "texfuse/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "texfuse/errors.hpp"

namespace texfuse
{
    SupportView make_support_view(const TriangleMesh& mesh, const Camera& camera, RealImage image)
    {
        if (image.width() != camera.width || image.height() != camera.height || image.channels() != 3)
        {
            throw Error("support image must be RGB and match the camera size");
        }
        auto buffers = std::make_shared<const ViewBuffers>(rasterize(mesh, camera));
        SupportView view{camera, std::move(image), buffers, visible_face_set(*buffers)};
        return view;
    }

    Eigen::Vector3d sample_support(const SupportView& view, const Eigen::Vector2d& pixel) noexcept
    {
        const RealImage& image = view.image;
        const BilinearTaps taps = bilinear_taps(image.width(), image.height(), pixel.x() - 0.5, pixel.y() - 0.5);
        Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
        double total = 0.0;
        for (int k = 0; k < 4; ++k)
        {
            if (taps.weight[k] > 0 && view.buffers->covered(taps.index[k]))
            {
                const double* p = image.pixel(taps.index[k]);
                rgb += taps.weight[k] * Eigen::Vector3d(p[0], p[1], p[2]);
                total += taps.weight[k];
            }
        }
        if (total > 0)
        {
            return rgb / total;
        }
        return sample_rgb(image, pixel.x(), pixel.y());
    }

    Mask cross_view_visibility(const SupportView& support, const ViewBuffers& target)
    {
        Mask out(target.width, target.height, 1, 0);
        if (support.visible_faces.empty())
        {
            return out;
        }
        std::vector<std::uint8_t> seen(static_cast<std::size_t>(support.visible_faces.back()) + 1, 0);
        for (int f : support.visible_faces)
        {
            seen[f] = 1;
        }
        const Camera& cam = support.camera;
        for (std::size_t i = 0; i < target.pixel_count(); ++i)
        {
            const auto f = target.face_id[i];
            if (f == SentinelEmpty || static_cast<std::size_t>(f) >= seen.size() || !seen[f])
            {
                continue;
            }
            const Eigen::Vector2d p = cam.project(target.world_pos[i]);
            if (p.x() >= 0 && p.x() < cam.width && p.y() >= 0 && p.y() < cam.height)
            {
                out.data()[i] = 1;
            }
        }
        return out;
    }

    namespace
    {
        // Squared distance to the nearest zero-valued sample along one line
        // (lower envelope of parabolas). Entries of `f` that are infinite are
        // skipped; an all-infinite line stays infinite.
        void SquaredDistance1d(std::span<const double> f, std::span<double> out, std::vector<int>& v, std::vector<double>& z)
        {
            const int n = static_cast<int>(f.size());
            constexpr double inf = std::numeric_limits<double>::infinity();
            v.resize(n);
            z.resize(n + 1);
            int k = -1;
            for (int q = 0; q < n; ++q)
            {
                if (f[q] == inf)
                {
                    continue;
                }
                if (k < 0)
                {
                    k = 0;
                    v[0] = q;
                    z[0] = -inf;
                    z[1] = inf;
                    continue;
                }
                double s = 0;
                while (true)
                {
                    const int p = v[k];
                    s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
                    // z[0] is -inf, so this never walks past the first parabola.
                    if (s > z[k])
                    {
                        break;
                    }
                    --k;
                }
                ++k;
                v[k] = q;
                z[k] = s;
                z[k + 1] = inf;
            }
            if (k < 0)
            {
                std::fill(out.begin(), out.end(), inf);
                return;
            }
            int j = 0;
            for (int q = 0; q < n; ++q)
            {
                while (z[j + 1] < q)
                {
                    ++j;
                }
                const double dq = q - v[j];
                out[q] = dq * dq + f[v[j]];
            }
        }
    } // namespace

    RealImage distance_transform(const Mask& mask)
    {
        const int w = mask.width();
        const int h = mask.height();
        RealImage out(w, h, 1, 0.0);
        if (mask.empty())
        {
            return out;
        }
        const auto values = mask.data();
        const bool any_zero = std::any_of(values.begin(), values.end(), [](auto m) { return m == 0; });
        if (!any_zero)
        {
            for (int y = 0; y < h; ++y)
            {
                for (int x = 0; x < w; ++x)
                {
                    out.at(x, y) = std::min({x + 1, y + 1, w - x, h - y});
                }
            }
            return out;
        }

        constexpr double inf = std::numeric_limits<double>::infinity();
        std::vector<double> grid(static_cast<std::size_t>(w) * h);
        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            grid[i] = values[i] ? inf : 0.0;
        }

        std::vector<int> v;
        std::vector<double> z;
        std::vector<double> line_in(std::max(w, h));
        std::vector<double> line_out(std::max(w, h));
        for (int x = 0; x < w; ++x)
        {
            for (int y = 0; y < h; ++y)
            {
                line_in[y] = grid[static_cast<std::size_t>(y) * w + x];
            }
            SquaredDistance1d(std::span(line_in.data(), h), std::span(line_out.data(), h), v, z);
            for (int y = 0; y < h; ++y)
            {
                grid[static_cast<std::size_t>(y) * w + x] = line_out[y];
            }
        }
        for (int y = 0; y < h; ++y)
        {
            std::span<double> row(grid.data() + static_cast<std::size_t>(y) * w, w);
            std::copy(row.begin(), row.end(), line_in.begin());
            SquaredDistance1d(std::span(line_in.data(), w), row, v, z);
        }
        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            out.data()[i] = values[i] ? std::sqrt(grid[i]) : 0.0;
        }
        return out;
    }

    RealImage angular_difference(
        const SupportView& support, const ViewBuffers& target, const Camera& target_camera, const Mask& visibility)
    {
        RealImage out(target.width, target.height, 1, 0.0);
        const Eigen::Matrix3d rv = support.camera.rotation();
        const Eigen::Matrix3d rc = target_camera.rotation();
        for (std::size_t i = 0; i < target.pixel_count(); ++i)
        {
            if (!visibility.data()[i])
            {
                continue;
            }
            const Eigen::Vector3d& n = target.world_normal[i];
            const Eigen::Vector3d nv = rv * n;
            const Eigen::Vector3d nc = rc * n;
            const double cosine = nv.dot(nc) / std::max(nv.norm() * nc.norm(), AngleEpsilon);
            out.data()[i] = std::acos(std::clamp(cosine, -1.0, 1.0));
        }
        return out;
    }

    std::vector<Mask> boundary_exclusion(std::span<const Mask> visibility, int radius)
    {
        std::vector<Mask> out;
        if (visibility.empty())
        {
            return out;
        }
        const int w = visibility.front().width();
        const int h = visibility.front().height();
        std::vector<std::uint8_t> coverage(static_cast<std::size_t>(w) * h, 0);
        for (const Mask& m : visibility)
        {
            if (m.width() != w || m.height() != h)
            {
                throw Error("boundary_exclusion: visibility maps differ in size");
            }
            for (std::size_t i = 0; i < coverage.size(); ++i)
            {
                coverage[i] = static_cast<std::uint8_t>(std::min(255, coverage[i] + (m.data()[i] ? 1 : 0)));
            }
        }

        for (const Mask& m : visibility)
        {
            Mask keep(w, h, 1, 1);
            if (radius > 0)
            {
                Mask inverse(w, h, 1);
                for (std::size_t i = 0; i < coverage.size(); ++i)
                {
                    inverse.data()[i] = m.data()[i] ? 0 : 1;
                }
                const RealImage inside = distance_transform(m);
                const RealImage outside = distance_transform(inverse);
                for (std::size_t i = 0; i < coverage.size(); ++i)
                {
                    const double dist = m.data()[i] ? inside.data()[i] : outside.data()[i];
                    if (coverage[i] == 1 && dist <= radius)
                    {
                        keep.data()[i] = 0;
                    }
                }
            }
            out.push_back(std::move(keep));
        }
        return out;
    }

    std::vector<double> pixel_weights(std::span<const WeightTerms> terms, double alpha, double beta)
    {
        std::vector<double> w(terms.size(), 0.0);
        double total = 0.0;
        for (std::size_t v = 0; v < terms.size(); ++v)
        {
            const WeightTerms& t = terms[v];
            if (t.visible && t.kept)
            {
                w[v] = std::exp(-alpha * t.angle) * std::pow(t.distance, beta);
                total += w[v];
            }
        }
        if (total < MinTotalWeight)
        {
            std::fill(w.begin(), w.end(), 0.0);
            return w;
        }
        for (double& x : w)
        {
            x /= total + WeightEpsilon;
        }
        return w;
    }

    std::vector<RealImage> blend_weights(std::span<const Mask> visibility, std::span<const Mask> boundary_keep,
        std::span<const RealImage> angle, std::span<const RealImage> distance, double alpha, double beta)
    {
        const std::size_t views = visibility.size();
        if (boundary_keep.size() != views || angle.size() != views || distance.size() != views)
        {
            throw Error("blend_weights: per-view map counts differ");
        }
        std::vector<RealImage> out;
        if (views == 0)
        {
            return out;
        }
        const int w = visibility.front().width();
        const int h = visibility.front().height();
        for (std::size_t v = 0; v < views; ++v)
        {
            if (!visibility[v].same_size(visibility.front()) || !boundary_keep[v].same_size(visibility.front()) ||
                !angle[v].same_size(visibility.front()) || !distance[v].same_size(visibility.front()))
            {
                throw Error("blend_weights: map sizes differ");
            }
            out.emplace_back(w, h, 1, 0.0);
        }
        std::vector<WeightTerms> terms(views);
        for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i)
        {
            bool any = false;
            for (std::size_t v = 0; v < views; ++v)
            {
                terms[v] = {visibility[v].data()[i] != 0, boundary_keep[v].data()[i] != 0, angle[v].data()[i],
                    distance[v].data()[i]};
                any = any || terms[v].visible;
            }
            if (!any)
            {
                continue;
            }
            const auto weights = pixel_weights(terms, alpha, beta);
            for (std::size_t v = 0; v < views; ++v)
            {
                out[v].data()[i] = weights[v];
            }
        }
        return out;
    }

    BlendResult aggregate_views(std::span<const SupportView> support, const Camera& target_camera,
        const TriangleMesh& mesh, const BlendParams& params)
    {
        if (support.empty())
        {
            throw Error("aggregate_views: empty support set");
        }
        auto target = std::make_shared<const ViewBuffers>(rasterize(mesh, target_camera));
        const std::size_t views = support.size();

        std::vector<Mask> visibility;
        std::vector<RealImage> distance;
        std::vector<RealImage> angle;
        for (const SupportView& view : support)
        {
            visibility.push_back(cross_view_visibility(view, *target));
            distance.push_back(distance_transform(visibility.back()));
            angle.push_back(angular_difference(view, *target, target_camera, visibility.back()));
        }
        std::vector<Mask> keep = boundary_exclusion(visibility, params.boundary_radius);
        std::vector<RealImage> weights = blend_weights(visibility, keep, angle, distance, params.alpha, params.beta);

        BlendResult result;
        result.blended = RealImage(target->width, target->height, 3, 1.0);
        result.known_mask = Mask(target->width, target->height, 1, 0);
        for (std::size_t i = 0; i < target->pixel_count(); ++i)
        {
            Eigen::Vector3d color = Eigen::Vector3d::Zero();
            bool known = false;
            for (std::size_t v = 0; v < views; ++v)
            {
                const double wv = weights[v].data()[i];
                if (wv <= 0)
                {
                    continue;
                }
                const Eigen::Vector2d p = support[v].camera.project(target->world_pos[i]);
                color += wv * sample_support(support[v], p);
                known = true;
            }
            if (known)
            {
                double* px = result.blended.pixel(i);
                px[0] = color.x();
                px[1] = color.y();
                px[2] = color.z();
                result.known_mask.data()[i] = 1;
            }
        }
        result.per_view_weights = std::move(weights);
        result.target_buffers = std::move(target);
        if (params.keep_diagnostics)
        {
            result.diagnostics = {std::move(visibility), std::move(keep), std::move(angle), std::move(distance)};
        }
        return result;
    }
} // namespace texfuse
