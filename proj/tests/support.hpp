#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include <unistd.h>

#include "texfuse/camera.hpp"
#include "texfuse/errors.hpp"
#include "texfuse/image.hpp"
#include "texfuse/inpaint.hpp"
#include "texfuse/mesh.hpp"

namespace testing
{
    using namespace texfuse;

    // Fresh directory under the system temp dir, removed on destruction.
    class TempDir
    {
    public:
        explicit TempDir(const std::string& name)
        {
            static int counter = 0;
            path_ = std::filesystem::temp_directory_path() /
                    ("texfuse_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
            std::filesystem::remove_all(path_);
            std::filesystem::create_directories(path_);
        }
        ~TempDir()
        {
            std::error_code ec;
            std::filesystem::remove_all(path_, ec);
        }
        const std::filesystem::path& path() const noexcept
        {
            return path_;
        }

    private:
        std::filesystem::path path_;
    };

    inline RealImage random_image(int w, int h, int c, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0)
    {
        std::uniform_real_distribution<double> u(lo, hi);
        RealImage out(w, h, c);
        for (double& v : out.data())
        {
            v = u(rng);
        }
        return out;
    }

    inline Mask random_mask(int w, int h, double p_one, std::mt19937_64& rng)
    {
        std::bernoulli_distribution b(p_one);
        Mask out(w, h, 1);
        for (auto& v : out.data())
        {
            v = b(rng) ? 1 : 0;
        }
        return out;
    }

    // Independent icosphere: subdivided icosahedron projected to the unit sphere.
    inline TriangleMesh icosphere(int levels)
    {
        const double t = (1.0 + std::sqrt(5.0)) / 2.0;
        std::vector<Eigen::Vector3d> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
            {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
        std::vector<Face> f = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
            {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9}, {4, 9, 5},
            {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
        for (auto& p : v)
        {
            p.normalize();
        }
        for (int l = 0; l < levels; ++l)
        {
            std::map<std::pair<int, int>, int> mid;
            const auto midpoint = [&](int a, int b) {
                const auto key = std::minmax(a, b);
                const auto it = mid.find(key);
                if (it != mid.end())
                {
                    return it->second;
                }
                v.push_back((v[a] + v[b]).normalized());
                return mid[key] = static_cast<int>(v.size()) - 1;
            };
            std::vector<Face> next;
            for (const Face& face : f)
            {
                const int a = midpoint(face[0], face[1]);
                const int b = midpoint(face[1], face[2]);
                const int c = midpoint(face[2], face[0]);
                next.push_back({face[0], a, c});
                next.push_back({face[1], b, a});
                next.push_back({face[2], c, b});
                next.push_back({a, b, c});
            }
            f = std::move(next);
        }
        TriangleMesh mesh;
        mesh.vertices = v;
        mesh.faces = f;
        for (std::size_t i = 0; i < f.size(); ++i)
        {
            mesh.corner_uvs.push_back({Eigen::Vector2d(0.1, 0.1), Eigen::Vector2d(0.9, 0.1), Eigen::Vector2d(0.5, 0.9)});
        }
        compute_vertex_normals_in_place(mesh);
        return mesh;
    }

    // Axis-aligned quad in the z = z0 plane covering [-s, s]^2, two triangles,
    // facing +Z, mapped to the full UV square.
    inline TriangleMesh front_quad(double s = 1.0, double z0 = 0.0)
    {
        TriangleMesh mesh;
        mesh.vertices = {{-s, -s, z0}, {s, -s, z0}, {s, s, z0}, {-s, s, z0}};
        mesh.faces = {{0, 1, 2}, {0, 2, 3}};
        const Eigen::Vector2d uv[4] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        mesh.corner_uvs = {{uv[0], uv[1], uv[2]}, {uv[0], uv[2], uv[3]}};
        compute_vertex_normals_in_place(mesh);
        return mesh;
    }

    // Nearest-zero search over the whole image; pixels of an all-ones mask
    // measure to the nearest pixel just outside the border.
    inline RealImage brute_force_edt(const Mask& mask)
    {
        const int w = mask.width();
        const int h = mask.height();
        RealImage out(w, h, 1, 0.0);
        bool any_zero = false;
        for (auto v : mask.data())
        {
            any_zero |= v == 0;
        }
        for (int y = 0; y < h; ++y)
        {
            for (int x = 0; x < w; ++x)
            {
                if (!mask.at(x, y))
                {
                    continue;
                }
                double best = std::numeric_limits<double>::infinity();
                if (any_zero)
                {
                    for (int yy = 0; yy < h; ++yy)
                    {
                        for (int xx = 0; xx < w; ++xx)
                        {
                            if (!mask.at(xx, yy))
                            {
                                best = std::min(best, std::sqrt(double((x - xx) * (x - xx) + (y - yy) * (y - yy))));
                            }
                        }
                    }
                }
                else
                {
                    best = std::min({x + 1, y + 1, w - x, h - y});
                }
                out.at(x, y) = best;
            }
        }
        return out;
    }

    // Answers like another backend but records every request.
    class RecordingBackend : public InpaintBackend
    {
    public:
        explicit RecordingBackend(InpaintBackend& inner) : inner_(inner)
        {
        }
        std::string id() const override
        {
            return inner_.id();
        }
        ByteImage inpaint(const InpaintRequest& request) override
        {
            inpaint_requests.push_back(request);
            return inner_.inpaint(request);
        }
        ByteImage back_view(const BackViewRequest& request) override
        {
            back_requests.push_back(request);
            return inner_.back_view(request);
        }

        std::vector<InpaintRequest> inpaint_requests;
        std::vector<BackViewRequest> back_requests;

    private:
        InpaintBackend& inner_;
    };

    // Refuses every call, like an unreachable service.
    class DownBackend : public InpaintBackend
    {
    public:
        std::string id() const override
        {
            return "down";
        }
        ByteImage inpaint(const InpaintRequest&) override
        {
            throw BackendUnavailable("service down");
        }
        ByteImage back_view(const BackViewRequest&) override
        {
            throw BackendUnavailable("service down");
        }
    };

    inline RenderSettings square(int size)
    {
        RenderSettings s;
        s.width = s.height = size;
        return s;
    }

    inline double brute_force_psnr(const RealImage& a, const RealImage& b)
    {
        double sum = 0.0;
        for (std::size_t i = 0; i < a.data().size(); ++i)
        {
            const double d = a.data()[i] - b.data()[i];
            sum += d * d;
        }
        const double mse = sum / double(a.data().size());
        return -10.0 * std::log10(mse);
    }

    // Direct 2-D windowed statistics at every valid window position.
    inline double brute_force_ssim(const RealImage& a, const RealImage& b)
    {
        const auto gray = [](const RealImage& img, int x, int y) {
            return 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
        };
        double kernel[11][11];
        double norm = 0.0;
        for (int j = 0; j < 11; ++j)
        {
            for (int i = 0; i < 11; ++i)
            {
                kernel[j][i] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
                norm += kernel[j][i];
            }
        }
        const double c1 = 0.01 * 0.01;
        const double c2 = 0.03 * 0.03;
        double total = 0.0;
        int windows = 0;
        for (int y = 0; y + 11 <= a.height(); ++y)
        {
            for (int x = 0; x + 11 <= a.width(); ++x)
            {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int j = 0; j < 11; ++j)
                {
                    for (int i = 0; i < 11; ++i)
                    {
                        const double w = kernel[j][i] / norm;
                        const double va = gray(a, x + i, y + j);
                        const double vb = gray(b, x + i, y + j);
                        ma += w * va;
                        mb += w * vb;
                        saa += w * va * va;
                        sbb += w * vb * vb;
                        sab += w * va * vb;
                    }
                }
                const double va = saa - ma * ma;
                const double vb = sbb - mb * mb;
                const double cov = sab - ma * mb;
                total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++windows;
            }
        }
        return total / windows;
    }

    inline double max_abs_diff(const RealImage& a, const RealImage& b)
    {
        double m = 0.0;
        for (std::size_t i = 0; i < a.data().size(); ++i)
        {
            m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
        }
        return m;
    }
} // namespace testing
