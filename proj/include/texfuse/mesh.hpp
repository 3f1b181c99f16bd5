#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace texfuse
{
    using Face = std::array<int, 3>;
    using CornerUvs = std::array<Eigen::Vector2d, 3>;

    // Fixed geometry with per-corner texture coordinates. Positions are kept
    // normalized to [-1, 1]^3; original_center/original_scale map them back
    // to the source frame (source = normalized * scale + center).
    struct TriangleMesh
    {
        std::vector<Eigen::Vector3d> vertices;
        std::vector<Face> faces;
        std::vector<CornerUvs> corner_uvs;
        std::vector<Eigen::Vector3d> vertex_normals;

        Eigen::Vector3d original_center = Eigen::Vector3d::Zero();
        double original_scale = 1.0;

        std::size_t vertex_count() const noexcept
        {
            return vertices.size();
        }
        std::size_t face_count() const noexcept
        {
            return faces.size();
        }
        bool empty() const noexcept
        {
            return faces.empty();
        }
    };

    enum class MeshKind
    {
        uv_sphere,
        cube,
        capsule,
    };

    MeshKind parse_mesh_kind(std::string_view name);
    std::string_view to_string(MeshKind kind) noexcept;

    // Throws MeshFormatError when indices or UV counts are inconsistent.
    void validate_mesh(const TriangleMesh& mesh);

    TriangleMesh load_mesh(const std::filesystem::path& path);
    TriangleMesh parse_obj(std::string_view text, const std::string& source_name = "<memory>");

    // Writes positions in the source frame. `material_library`/`material`
    // are emitted as mtllib/usemtl when non-empty.
    void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path, const std::string& material_library = {},
        const std::string& material = {});

    // Recenters on the bounding-box center and scales the largest half extent to 1.
    void normalize_in_place(TriangleMesh& mesh);

    // Area-weighted incident face normals; isolated vertices get +Z.
    TriangleMesh compute_vertex_normals(TriangleMesh mesh);
    void compute_vertex_normals_in_place(TriangleMesh& mesh);

    Eigen::Vector3d face_normal(const TriangleMesh& mesh, int face) noexcept; // unnormalized, length = 2 * area
    double surface_area(const TriangleMesh& mesh) noexcept;

    // V - E + F over unique undirected position edges.
    int euler_characteristic(const TriangleMesh& mesh);

    // Fraction of a `grid` x `grid` rasterized atlas covered by more than one face.
    double uv_overlap_fraction(const TriangleMesh& mesh, int grid = 512);

    TriangleMesh generate_test_mesh(MeshKind kind, int subdivision);
} // namespace texfuse
