#include "texfuse/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <utility>

#include <Eigen/Geometry>

#include "texfuse/errors.hpp"

namespace texfuse
{
    MeshKind parse_mesh_kind(std::string_view name)
    {
        if (name == "uv_sphere")
        {
            return MeshKind::uv_sphere;
        }
        if (name == "cube")
        {
            return MeshKind::cube;
        }
        if (name == "capsule")
        {
            return MeshKind::capsule;
        }
        throw ConfigError("unknown test mesh kind '" + std::string(name) + "' (expected uv_sphere, cube or capsule)");
    }

    std::string_view to_string(MeshKind kind) noexcept
    {
        switch (kind)
        {
        case MeshKind::uv_sphere:
            return "uv_sphere";
        case MeshKind::cube:
            return "cube";
        case MeshKind::capsule:
            return "capsule";
        }
        return "unknown";
    }

    void validate_mesh(const TriangleMesh& mesh)
    {
        if (mesh.corner_uvs.size() != mesh.faces.size())
        {
            throw MeshFormatError("mesh has " + std::to_string(mesh.faces.size()) + " faces but " +
                                  std::to_string(mesh.corner_uvs.size()) + " UV triples");
        }
        const int n = static_cast<int>(mesh.vertices.size());
        for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        {
            for (int idx : mesh.faces[f])
            {
                if (idx < 0 || idx >= n)
                {
                    throw MeshFormatError("face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                                          " (vertex count " + std::to_string(n) + ")");
                }
            }
        }
    }

    namespace
    {
        std::vector<std::string_view> SplitWs(std::string_view line)
        {
            std::vector<std::string_view> tokens;
            std::size_t i = 0;
            while (i < line.size())
            {
                while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
                {
                    ++i;
                }
                const std::size_t start = i;
                while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])))
                {
                    ++i;
                }
                if (i > start)
                {
                    tokens.push_back(line.substr(start, i - start));
                }
            }
            return tokens;
        }

        double ParseDouble(std::string_view token, const std::string& where)
        {
            // std::from_chars for double is available in libstdc++ 11.
            double value = 0;
            const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
            if (ec != std::errc() || ptr != token.data() + token.size())
            {
                throw MeshFormatError(where + ": cannot parse number '" + std::string(token) + "'");
            }
            return value;
        }

        int ResolveIndex(std::string_view token, std::size_t count, const std::string& where)
        {
            int value = 0;
            const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
            if (ec != std::errc() || ptr != token.data() + token.size() || value == 0)
            {
                throw MeshFormatError(where + ": bad index '" + std::string(token) + "'");
            }
            const long resolved = value > 0 ? value - 1 : static_cast<long>(count) + value;
            if (resolved < 0 || resolved >= static_cast<long>(count))
            {
                throw MeshFormatError(where + ": index " + std::string(token) + " out of range");
            }
            return static_cast<int>(resolved);
        }
    } // namespace

    TriangleMesh parse_obj(std::string_view text, const std::string& source_name)
    {
        TriangleMesh mesh;
        std::vector<Eigen::Vector2d> texcoords;

        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size())
        {
            std::size_t end = text.find('\n', pos);
            if (end == std::string_view::npos)
            {
                end = text.size();
            }
            std::string_view line = text.substr(pos, end - pos);
            pos = end + 1;
            ++line_no;

            if (const auto hash = line.find('#'); hash != std::string_view::npos)
            {
                line = line.substr(0, hash);
            }
            const auto tokens = SplitWs(line);
            if (tokens.empty())
            {
                continue;
            }
            const std::string where = source_name + ":" + std::to_string(line_no);
            const std::string_view tag = tokens[0];
            if (tag == "v")
            {
                if (tokens.size() < 4)
                {
                    throw MeshFormatError(where + ": vertex needs 3 coordinates");
                }
                mesh.vertices.emplace_back(
                    ParseDouble(tokens[1], where), ParseDouble(tokens[2], where), ParseDouble(tokens[3], where));
            }
            else if (tag == "vt")
            {
                if (tokens.size() < 3)
                {
                    throw MeshFormatError(where + ": texture coordinate needs 2 values");
                }
                texcoords.emplace_back(ParseDouble(tokens[1], where), ParseDouble(tokens[2], where));
            }
            else if (tag == "f")
            {
                const std::size_t corners = tokens.size() - 1;
                if (corners != 3)
                {
                    throw MeshFormatError(where + ": non-triangular face with " + std::to_string(corners) +
                                          " corners; triangulate the mesh before loading");
                }
                Face face{};
                CornerUvs uvs;
                for (int k = 0; k < 3; ++k)
                {
                    const std::string_view corner = tokens[k + 1];
                    const auto slash = corner.find('/');
                    face[k] = ResolveIndex(corner.substr(0, slash), mesh.vertices.size(), where);
                    std::string_view vt;
                    if (slash != std::string_view::npos)
                    {
                        vt = corner.substr(slash + 1);
                        vt = vt.substr(0, vt.find('/'));
                    }
                    if (vt.empty())
                    {
                        throw MeshFormatError(where + ": face has no texture coordinates; export the mesh with a UV "
                                                      "parameterization (f v/vt or f v/vt/vn) before loading");
                    }
                    uvs[k] = texcoords[ResolveIndex(vt, texcoords.size(), where)];
                }
                mesh.faces.push_back(face);
                mesh.corner_uvs.push_back(uvs);
            }
            // vn, o, g, s, usemtl, mtllib: ignored (normals are recomputed).
        }

        if (mesh.faces.empty())
        {
            throw MeshFormatError(source_name + ": no faces");
        }
        validate_mesh(mesh);
        normalize_in_place(mesh);
        compute_vertex_normals_in_place(mesh);
        return mesh;
    }

    TriangleMesh load_mesh(const std::filesystem::path& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
        {
            throw MeshFormatError("cannot open mesh file " + path.string());
        }
        std::stringstream buffer;
        buffer << in.rdbuf();
        return parse_obj(buffer.str(), path.string());
    }

    void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path, const std::string& material_library,
        const std::string& material)
    {
        std::ofstream out(path);
        if (!out)
        {
            throw MeshFormatError("cannot write " + path.string());
        }
        char buf[128];
        if (!material_library.empty())
        {
            out << "mtllib " << material_library << '\n';
        }
        for (const auto& v : mesh.vertices)
        {
            const Eigen::Vector3d p = v * mesh.original_scale + mesh.original_center;
            std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", p.x(), p.y(), p.z());
            out << buf;
        }
        for (const auto& uvs : mesh.corner_uvs)
        {
            for (const auto& uv : uvs)
            {
                std::snprintf(buf, sizeof(buf), "vt %.9g %.9g\n", uv.x(), uv.y());
                out << buf;
            }
        }
        if (!material.empty())
        {
            out << "usemtl " << material << '\n';
        }
        for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        {
            const auto& face = mesh.faces[f];
            const std::size_t t = 3 * f + 1;
            out << "f " << face[0] + 1 << '/' << t << ' ' << face[1] + 1 << '/' << t + 1 << ' ' << face[2] + 1 << '/'
                << t + 2 << '\n';
        }
        if (!out)
        {
            throw MeshFormatError("write failed for " + path.string());
        }
    }

    void normalize_in_place(TriangleMesh& mesh)
    {
        if (mesh.vertices.empty())
        {
            return;
        }
        Eigen::Vector3d lo = mesh.vertices.front();
        Eigen::Vector3d hi = lo;
        for (const auto& v : mesh.vertices)
        {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
        const Eigen::Vector3d center = 0.5 * (lo + hi);
        double half = 0.5 * (hi - lo).maxCoeff();
        if (!(half > 0))
        {
            half = 1;
        }
        for (auto& v : mesh.vertices)
        {
            v = (v - center) / half;
        }
        mesh.original_center = mesh.original_center + mesh.original_scale * center;
        mesh.original_scale *= half;
    }

    Eigen::Vector3d face_normal(const TriangleMesh& mesh, int face) noexcept
    {
        const auto& f = mesh.faces[face];
        const Eigen::Vector3d& a = mesh.vertices[f[0]];
        return (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
    }

    void compute_vertex_normals_in_place(TriangleMesh& mesh)
    {
        mesh.vertex_normals.assign(mesh.vertices.size(), Eigen::Vector3d::Zero());
        for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        {
            const Eigen::Vector3d n = face_normal(mesh, static_cast<int>(f));
            for (int idx : mesh.faces[f])
            {
                mesh.vertex_normals[idx] += n;
            }
        }
        for (auto& n : mesh.vertex_normals)
        {
            const double len = n.norm();
            n = len > 0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::UnitZ();
        }
    }

    TriangleMesh compute_vertex_normals(TriangleMesh mesh)
    {
        compute_vertex_normals_in_place(mesh);
        return mesh;
    }

    double surface_area(const TriangleMesh& mesh) noexcept
    {
        double area = 0;
        for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        {
            area += 0.5 * face_normal(mesh, static_cast<int>(f)).norm();
        }
        return area;
    }

    int euler_characteristic(const TriangleMesh& mesh)
    {
        std::set<std::pair<int, int>> edges;
        for (const auto& f : mesh.faces)
        {
            for (int k = 0; k < 3; ++k)
            {
                const int a = f[k];
                const int b = f[(k + 1) % 3];
                edges.emplace(std::min(a, b), std::max(a, b));
            }
        }
        return static_cast<int>(mesh.vertices.size()) - static_cast<int>(edges.size()) +
               static_cast<int>(mesh.faces.size());
    }

    double uv_overlap_fraction(const TriangleMesh& mesh, int grid)
    {
        std::vector<std::uint16_t> hits(static_cast<std::size_t>(grid) * grid, 0);
        for (const auto& uvs : mesh.corner_uvs)
        {
            Eigen::Vector2d p[3];
            for (int k = 0; k < 3; ++k)
            {
                p[k] = uvs[k] * grid;
            }
            const double area = (p[1] - p[0]).x() * (p[2] - p[0]).y() - (p[1] - p[0]).y() * (p[2] - p[0]).x();
            if (area == 0)
            {
                continue;
            }
            const int x0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].x(), p[1].x(), p[2].x()}))));
            const int x1 = std::min(grid - 1, static_cast<int>(std::ceil(std::max({p[0].x(), p[1].x(), p[2].x()}))));
            const int y0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].y(), p[1].y(), p[2].y()}))));
            const int y1 = std::min(grid - 1, static_cast<int>(std::ceil(std::max({p[0].y(), p[1].y(), p[2].y()}))));
            for (int y = y0; y <= y1; ++y)
            {
                for (int x = x0; x <= x1; ++x)
                {
                    const Eigen::Vector2d c(x + 0.5, y + 0.5);
                    bool inside = true;
                    for (int k = 0; k < 3 && inside; ++k)
                    {
                        const Eigen::Vector2d& a = p[k];
                        const Eigen::Vector2d& b = p[(k + 1) % 3];
                        const double e = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
                        inside = area > 0 ? e > 0 : e < 0;
                    }
                    if (inside)
                    {
                        ++hits[static_cast<std::size_t>(y) * grid + x];
                    }
                }
            }
        }
        const auto overlapped = std::count_if(hits.begin(), hits.end(), [](auto h) { return h > 1; });
        return static_cast<double>(overlapped) / hits.size();
    }

    namespace
    {
        class MeshBuilder
        {
        public:
            int AddVertex(const Eigen::Vector3d& p)
            {
                mesh_.vertices.push_back(p);
                return static_cast<int>(mesh_.vertices.size()) - 1;
            }

            // Corners are reordered when needed so the face winds outward
            // (valid for convex solids centered on the origin).
            void AddFace(Face face, CornerUvs uvs)
            {
                const Eigen::Vector3d& a = mesh_.vertices[face[0]];
                const Eigen::Vector3d& b = mesh_.vertices[face[1]];
                const Eigen::Vector3d& c = mesh_.vertices[face[2]];
                if ((b - a).cross(c - a).dot(a + b + c) < 0)
                {
                    std::swap(face[1], face[2]);
                    std::swap(uvs[1], uvs[2]);
                }
                mesh_.faces.push_back(face);
                mesh_.corner_uvs.push_back(uvs);
            }

            void AddQuad(const std::array<int, 4>& q, const std::array<Eigen::Vector2d, 4>& uv)
            {
                this->AddFace({q[0], q[1], q[2]}, {uv[0], uv[1], uv[2]});
                this->AddFace({q[0], q[2], q[3]}, {uv[0], uv[2], uv[3]});
            }

            TriangleMesh Finish()
            {
                normalize_in_place(mesh_);
                mesh_.original_center.setZero();
                mesh_.original_scale = 1.0;
                compute_vertex_normals_in_place(mesh_);
                return std::move(mesh_);
            }

        private:
            TriangleMesh mesh_;
        };

        // Longitude 0 faces -Z so texture seams sit on the back of the subject.
        Eigen::Vector3d RingPoint(double radius, double y, double u)
        {
            const double phi = 2 * std::numbers::pi * u;
            return {-radius * std::sin(phi), y, -radius * std::cos(phi)};
        }

        TriangleMesh MakeCube()
        {
            MeshBuilder builder;
            for (int i = 0; i < 8; ++i)
            {
                const double z = (i & 4) ? 1 : -1;
                const double y = (i == 2 || i == 3 || i == 6 || i == 7) ? 1 : -1;
                const double x = (i == 1 || i == 2 || i == 5 || i == 6) ? 1 : -1;
                builder.AddVertex({x, y, z});
            }
            // Each side as a quad wound counter-clockwise seen from outside,
            // paired with its cell in a 3x2 atlas.
            const std::array<std::array<int, 4>, 6> sides = {{
                {4, 5, 6, 7}, // +Z
                {1, 0, 3, 2}, // -Z
                {5, 1, 2, 6}, // +X
                {0, 4, 7, 3}, // -X
                {7, 6, 2, 3}, // +Y
                {0, 1, 5, 4}, // -Y
            }};
            constexpr double margin = 0.02;
            for (int s = 0; s < 6; ++s)
            {
                const Eigen::Vector2d origin((s % 3) / 3.0 + margin, (s / 3) / 2.0 + margin);
                const Eigen::Vector2d extent(1.0 / 3.0 - 2 * margin, 0.5 - 2 * margin);
                const std::array<Eigen::Vector2d, 4> uv = {
                    origin,
                    origin + Eigen::Vector2d(extent.x(), 0),
                    origin + extent,
                    origin + Eigen::Vector2d(0, extent.y()),
                };
                builder.AddQuad(sides[s], uv);
            }
            return builder.Finish();
        }

        TriangleMesh MakeUvSphere(int subdivision)
        {
            const int rings = std::max(2, subdivision);
            const int segments = std::max(3, subdivision);
            MeshBuilder builder;
            const int top = builder.AddVertex({0, 1, 0});
            std::vector<std::vector<int>> ring(rings + 1);
            for (int i = 1; i < rings; ++i)
            {
                const double theta = std::numbers::pi * i / rings;
                for (int j = 0; j < segments; ++j)
                {
                    ring[i].push_back(builder.AddVertex(
                        RingPoint(std::sin(theta), std::cos(theta), static_cast<double>(j) / segments)));
                }
            }
            const int bottom = builder.AddVertex({0, -1, 0});

            const auto uv = [&](int i, int j) { return Eigen::Vector2d(static_cast<double>(j) / segments, 1.0 - static_cast<double>(i) / rings); };
            for (int j = 0; j < segments; ++j)
            {
                const int jn = (j + 1) % segments;
                const double uc = (j + 0.5) / segments;
                builder.AddFace({top, ring[1][j], ring[1][jn]}, {Eigen::Vector2d(uc, 1.0), uv(1, j), uv(1, j + 1)});
                for (int i = 1; i + 1 < rings; ++i)
                {
                    builder.AddQuad({ring[i][j], ring[i + 1][j], ring[i + 1][jn], ring[i][jn]},
                        {uv(i, j), uv(i + 1, j), uv(i + 1, j + 1), uv(i, j + 1)});
                }
                builder.AddFace({bottom, ring[rings - 1][jn], ring[rings - 1][j]},
                    {Eigen::Vector2d(uc, 0.0), uv(rings - 1, j + 1), uv(rings - 1, j)});
            }
            return builder.Finish();
        }

        TriangleMesh MakeCapsule(int subdivision)
        {
            constexpr double radius = 0.5;
            constexpr double half_length = 0.5;
            const int segments = std::max(3, 2 * subdivision);
            const int cap_rings = std::max(1, subdivision / 2);

            MeshBuilder builder;
            struct Ring
            {
                std::vector<int> ids;
                double polar; // polar angle within its cap, pi/2 at the equators
            };
            std::vector<Ring> top_rings(cap_rings);
            std::vector<Ring> bottom_rings(cap_rings);
            const int top = builder.AddVertex({0, half_length + radius, 0});
            const int bottom = builder.AddVertex({0, -half_length - radius, 0});
            for (int k = 0; k < cap_rings; ++k)
            {
                const double polar = 0.5 * std::numbers::pi * (k + 1) / cap_rings;
                top_rings[k].polar = polar;
                bottom_rings[k].polar = polar;
                for (int j = 0; j < segments; ++j)
                {
                    const double u = static_cast<double>(j) / segments;
                    top_rings[k].ids.push_back(
                        builder.AddVertex(RingPoint(radius * std::sin(polar), half_length + radius * std::cos(polar), u)));
                    bottom_rings[k].ids.push_back(builder.AddVertex(
                        RingPoint(radius * std::sin(polar), -half_length - radius * std::cos(polar), u)));
                }
            }

            constexpr double disc_radius = 0.23;
            const auto cap_uv = [&](const Eigen::Vector2d& center, double polar, int j) {
                const double rho = disc_radius * polar / (0.5 * std::numbers::pi);
                const double phi = 2 * std::numbers::pi * j / segments;
                return Eigen::Vector2d(center + rho * Eigen::Vector2d(std::cos(phi), std::sin(phi)));
            };
            const Eigen::Vector2d top_center(0.25, 0.75);
            const Eigen::Vector2d bottom_center(0.75, 0.75);

            for (int j = 0; j < segments; ++j)
            {
                const int jn = (j + 1) % segments;
                for (const auto& [pole, rings, center] :
                    {std::tuple{top, &top_rings, top_center}, std::tuple{bottom, &bottom_rings, bottom_center}})
                {
                    const auto& r = *rings;
                    builder.AddFace({pole, r[0].ids[j], r[0].ids[jn]},
                        {center, cap_uv(center, r[0].polar, j), cap_uv(center, r[0].polar, j + 1)});
                    for (int k = 0; k + 1 < cap_rings; ++k)
                    {
                        builder.AddQuad({r[k].ids[j], r[k + 1].ids[j], r[k + 1].ids[jn], r[k].ids[jn]},
                            {cap_uv(center, r[k].polar, j), cap_uv(center, r[k + 1].polar, j),
                                cap_uv(center, r[k + 1].polar, j + 1), cap_uv(center, r[k].polar, j + 1)});
                    }
                }

                // Cylinder chart: [0,1] x [0.02, 0.48], seam column duplicated in UV only.
                const double u0 = static_cast<double>(j) / segments;
                const double u1 = static_cast<double>(j + 1) / segments;
                const auto& upper = top_rings.back().ids;
                const auto& lower = bottom_rings.back().ids;
                builder.AddQuad({upper[j], lower[j], lower[jn], upper[jn]},
                    {Eigen::Vector2d(u0, 0.48), Eigen::Vector2d(u0, 0.02), Eigen::Vector2d(u1, 0.02),
                        Eigen::Vector2d(u1, 0.48)});
            }
            return builder.Finish();
        }
    } // namespace

    TriangleMesh generate_test_mesh(MeshKind kind, int subdivision)
    {
        if (subdivision < 1)
        {
            throw MeshFormatError("subdivision must be >= 1");
        }
        switch (kind)
        {
        case MeshKind::cube:
            return MakeCube();
        case MeshKind::uv_sphere:
            return MakeUvSphere(subdivision);
        case MeshKind::capsule:
            return MakeCapsule(subdivision);
        }
        throw MeshFormatError("unknown test mesh kind");
    }
} // namespace texfuse
