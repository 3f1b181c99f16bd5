#pragma once

#include <memory>
#include <span>
#include <vector>

#include "texfuse/camera.hpp"
#include "texfuse/image.hpp"
#include "texfuse/mesh.hpp"

namespace texfuse
{
    // One accepted view of the subject: its camera, its appearance and the
    // geometry buffers it was rendered with.
    struct SupportView
    {
        Camera camera;
        RealImage image;
        std::shared_ptr<const ViewBuffers> buffers;
        std::vector<int> visible_faces;
    };

    SupportView make_support_view(const TriangleMesh& mesh, const Camera& camera, RealImage image);

    // Bilinear sample of the support image restricted to taps on the
    // subject; background taps are dropped and the rest renormalized.
    Eigen::Vector3d sample_support(const SupportView& view, const Eigen::Vector2d& pixel) noexcept;

    inline constexpr double WeightEpsilon = 1e-8;
    inline constexpr double AngleEpsilon = 1e-8;
    // Pixels whose unnormalized weight total falls below this are unknown.
    inline constexpr double MinTotalWeight = 1e-6;

    struct BlendParams
    {
        double alpha = 3.0;
        double beta = 3.0;
        int boundary_radius = 2;
        bool keep_diagnostics = false;
    };

    struct BlendDiagnostics
    {
        std::vector<Mask> visibility;
        std::vector<Mask> boundary_keep;
        std::vector<RealImage> angle;
        std::vector<RealImage> distance;
    };

    struct BlendResult
    {
        RealImage blended;  // white where unknown
        Mask known_mask;
        std::vector<RealImage> per_view_weights;
        BlendDiagnostics diagnostics;
        std::shared_ptr<const ViewBuffers> target_buffers;
    };

    // 1 where the target pixel's face is visible in the support view and the
    // surface point reprojects inside the support image.
    Mask cross_view_visibility(const SupportView& support, const ViewBuffers& target);

    // Exact Euclidean distance (pixels) from each 1-pixel to the nearest
    // 0-pixel; 0 on 0-pixels. A mask without zeros measures to one step past
    // the image border.
    RealImage distance_transform(const Mask& mask);

    // Angle between the surface normal expressed in the support and target
    // camera frames, on pixels where `visibility` is set.
    RealImage angular_difference(
        const SupportView& support, const ViewBuffers& target, const Camera& target_camera, const Mask& visibility);

    // B_v: 0 where a pixel lies within `radius` of the boundary of M_v and is
    // covered by exactly one view, 1 elsewhere.
    std::vector<Mask> boundary_exclusion(std::span<const Mask> visibility, int radius);

    struct WeightTerms
    {
        bool visible = false;
        bool kept = true;
        double angle = 0.0;
        double distance = 0.0;
    };

    // Per-pixel normalized weights for each contributing view; all zero when
    // the unnormalized total is below MinTotalWeight.
    std::vector<double> pixel_weights(std::span<const WeightTerms> terms, double alpha, double beta);

    std::vector<RealImage> blend_weights(std::span<const Mask> visibility, std::span<const Mask> boundary_keep,
        std::span<const RealImage> angle, std::span<const RealImage> distance, double alpha, double beta);

    BlendResult aggregate_views(std::span<const SupportView> support, const Camera& target_camera,
        const TriangleMesh& mesh, const BlendParams& params = {});
} // namespace texfuse
