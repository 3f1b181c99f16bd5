#include "texfuse/inpaint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <regex>

#include "texfuse/camera.hpp"
#include "texfuse/errors.hpp"

namespace texfuse
{
    namespace
    {
        void RequireShape(const ByteImage& image, int w, int h, int channels, const char* name)
        {
            if (image.width() != w || image.height() != h)
            {
                throw SizeMismatch(std::string(name) + " is " + std::to_string(image.width()) + "x" +
                                   std::to_string(image.height()) + ", expected " + std::to_string(w) + "x" +
                                   std::to_string(h));
            }
            if (image.channels() != channels)
            {
                throw InvalidRequest(std::string(name) + " must have " + std::to_string(channels) + " channel(s)");
            }
        }

        bool IsKnown(const ByteImage& mask, std::size_t i)
        {
            return mask.data()[i] != 0;
        }
    } // namespace

    void validate_request(const InpaintRequest& request)
    {
        const int w = request.blended.width();
        const int h = request.blended.height();
        if (w <= 0 || h <= 0)
        {
            throw InvalidRequest("blended image is empty");
        }
        RequireShape(request.blended, w, h, 3, "blended");
        RequireShape(request.known_mask, w, h, 1, "known_mask");
        RequireShape(request.normal_map, w, h, 3, "normal_map");
        RequireShape(request.silhouette, w, h, 1, "silhouette");
        for (auto v : request.known_mask.data())
        {
            if (v != 0 && v != 255)
            {
                throw InvalidRequest("known_mask must contain only 0 and 255");
            }
        }
        if (request.steps <= 0)
        {
            throw InvalidRequest("steps must be positive");
        }
    }

    ByteImage composite_known(const ByteImage& generated, const ByteImage& blended, const ByteImage& known_mask)
    {
        ByteImage out = generated;
        for (std::size_t i = 0; i < out.pixel_count(); ++i)
        {
            if (IsKnown(known_mask, i))
            {
                std::copy_n(blended.pixel(i), 3, out.pixel(i));
            }
        }
        return out;
    }

    InpaintResponse inpaint(const InpaintRequest& request, InpaintBackend& backend, KnownRegionPolicy policy)
    {
        validate_request(request);
        const auto start = std::chrono::steady_clock::now();
        ByteImage image = backend.inpaint(request);
        const auto stop = std::chrono::steady_clock::now();

        if (image.width() != request.blended.width() || image.height() != request.blended.height() || image.channels() != 3)
        {
            throw SizeMismatch("backend '" + backend.id() + "' returned " + std::to_string(image.width()) + "x" +
                               std::to_string(image.height()) + "x" + std::to_string(image.channels()) + ", expected " +
                               std::to_string(request.blended.width()) + "x" + std::to_string(request.blended.height()) +
                               "x3");
        }

        int worst = 0;
        for (std::size_t i = 0; i < image.pixel_count(); ++i)
        {
            if (!IsKnown(request.known_mask, i))
            {
                continue;
            }
            for (int c = 0; c < 3; ++c)
            {
                worst = std::max(worst, std::abs(int(image.pixel(i)[c]) - int(request.blended.pixel(i)[c])));
            }
        }
        if (worst > KnownRegionTolerance)
        {
            if (policy == KnownRegionPolicy::strict)
            {
                throw KnownRegionViolation("backend '" + backend.id() + "' changed known pixels by up to " +
                                           std::to_string(worst) + "/255");
            }
            image = composite_known(image, request.blended, request.known_mask);
        }

        InpaintResponse response;
        response.image = std::move(image);
        response.backend_id = backend.id();
        response.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(stop - start).count();
        return response;
    }

    std::string view_file_name(double azimuth)
    {
        const double a = normalize_azimuth(azimuth);
        char buf[64];
        if (a == std::round(a))
        {
            std::snprintf(buf, sizeof(buf), "view_%ld.png", std::lround(a));
        }
        else
        {
            std::snprintf(buf, sizeof(buf), "view_%g.png", a);
        }
        return buf;
    }

    std::map<double, ByteImage> load_ground_truth_views(const std::filesystem::path& dir)
    {
        if (!std::filesystem::is_directory(dir))
        {
            throw Error("ground-truth directory not found: " + dir.string());
        }
        static const std::regex pattern(R"(view_(-?[0-9]+(\.[0-9]+)?)\.png)");
        std::map<double, ByteImage> views;
        for (const auto& entry : std::filesystem::directory_iterator(dir))
        {
            std::smatch m;
            const std::string name = entry.path().filename().string();
            if (entry.is_regular_file() && std::regex_match(name, m, pattern))
            {
                views.emplace(normalize_azimuth(std::stod(m[1].str())), read_png(entry.path(), 3));
            }
        }
        if (views.empty())
        {
            throw Error("no view_<azimuth>.png files in " + dir.string());
        }
        return views;
    }

    OracleBackend::OracleBackend(std::map<double, ByteImage> views)
    {
        for (auto& [az, image] : views)
        {
            views_.emplace(normalize_azimuth(az), std::move(image));
        }
    }

    std::string OracleBackend::id() const
    {
        return "oracle";
    }

    bool OracleBackend::has_view(double azimuth) const
    {
        const double a = normalize_azimuth(azimuth);
        const auto it = views_.lower_bound(a - 1e-6);
        return it != views_.end() && std::abs(it->first - a) <= 1e-6;
    }

    const ByteImage& OracleBackend::view(double azimuth) const
    {
        const double a = normalize_azimuth(azimuth);
        const auto it = views_.lower_bound(a - 1e-6);
        if (it == views_.end() || std::abs(it->first - a) > 1e-6)
        {
            throw BackendUnavailable("oracle has no ground-truth view for azimuth " + std::to_string(a));
        }
        return it->second;
    }

    ByteImage OracleBackend::inpaint(const InpaintRequest& request)
    {
        const ByteImage& truth = this->view(request.view_azimuth);
        if (!truth.same_size(request.blended))
        {
            throw SizeMismatch("oracle view size differs from the request");
        }
        return composite_known(truth, request.blended, request.known_mask);
    }

    ByteImage OracleBackend::back_view(const BackViewRequest& /*request*/)
    {
        return this->view(180.0);
    }

    std::string DiffuseFillBackend::id() const
    {
        return "diffuse-fill";
    }

    ByteImage DiffuseFillBackend::back_view(const BackViewRequest& /*request*/)
    {
        throw BackendUnavailable("diffuse-fill backend cannot synthesize a back view");
    }

    ByteImage DiffuseFillBackend::inpaint(const InpaintRequest& request)
    {
        const int w = request.blended.width();
        const int h = request.blended.height();
        const std::size_t n = static_cast<std::size_t>(w) * h;

        std::vector<std::uint8_t> inside(n);
        std::vector<std::uint8_t> unknown(n);
        RealImage color = to_real(request.blended);
        for (std::size_t i = 0; i < n; ++i)
        {
            inside[i] = request.silhouette.data()[i] >= 128;
            unknown[i] = inside[i] && !IsKnown(request.known_mask, i);
            if (!inside[i] && !IsKnown(request.known_mask, i))
            {
                std::fill_n(color.pixel(i), 3, 1.0);
            }
        }

        // Seed unknown pixels with the color of the nearest known pixel (BFS order).
        std::vector<std::uint8_t> assigned(n, 0);
        std::deque<std::size_t> queue;
        Eigen::Vector3d known_sum = Eigen::Vector3d::Zero();
        std::size_t known_count = 0;
        for (std::size_t i = 0; i < n; ++i)
        {
            if (inside[i] && !unknown[i])
            {
                assigned[i] = 1;
                queue.push_back(i);
                known_sum += Eigen::Vector3d(color.pixel(i)[0], color.pixel(i)[1], color.pixel(i)[2]);
                ++known_count;
            }
        }
        const auto for_neighbors = [&](std::size_t i, auto&& fn) {
            const int x = static_cast<int>(i % w);
            const int y = static_cast<int>(i / w);
            if (x > 0)
            {
                fn(i - 1);
            }
            if (x + 1 < w)
            {
                fn(i + 1);
            }
            if (y > 0)
            {
                fn(i - w);
            }
            if (y + 1 < h)
            {
                fn(i + w);
            }
        };
        while (!queue.empty())
        {
            const std::size_t i = queue.front();
            queue.pop_front();
            for_neighbors(i, [&](std::size_t j) {
                if (unknown[j] && !assigned[j])
                {
                    assigned[j] = 1;
                    std::copy_n(color.pixel(i), 3, color.pixel(j));
                    queue.push_back(j);
                }
            });
        }
        const Eigen::Vector3d fallback = known_count > 0 ? Eigen::Vector3d(known_sum / known_count) : Eigen::Vector3d(0.5, 0.5, 0.5);
        std::vector<std::size_t> active;
        for (std::size_t i = 0; i < n; ++i)
        {
            if (unknown[i])
            {
                active.push_back(i);
                if (!assigned[i])
                {
                    std::copy_n(fallback.data(), 3, color.pixel(i));
                }
            }
        }

        // Gauss-Seidel relaxation over silhouette neighbors.
        for (int iter = 0; iter < MaxIterations; ++iter)
        {
            double max_change = 0;
            for (std::size_t i : active)
            {
                Eigen::Vector3d sum = Eigen::Vector3d::Zero();
                int count = 0;
                for_neighbors(i, [&](std::size_t j) {
                    if (inside[j])
                    {
                        sum += Eigen::Vector3d(color.pixel(j)[0], color.pixel(j)[1], color.pixel(j)[2]);
                        ++count;
                    }
                });
                if (count == 0)
                {
                    continue;
                }
                const Eigen::Vector3d next = sum / count;
                double* px = color.pixel(i);
                for (int c = 0; c < 3; ++c)
                {
                    max_change = std::max(max_change, std::abs(next[c] - px[c]));
                    px[c] = next[c];
                }
            }
            if (max_change < 1.0 / 255.0)
            {
                break;
            }
        }
        return composite_known(to_bytes(color), request.blended, request.known_mask);
    }
} // namespace texfuse
