#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "texfuse/aggregate.hpp"
#include "texfuse/camera.hpp"
#include "texfuse/image.hpp"
#include "texfuse/mesh.hpp"
#include "texfuse/texture_map.hpp"

namespace texfuse
{
    // Covered pixels of one view and the bilinear texel footprint of each.
    // The geometry is fixed during fusion, so rendering a texture through a
    // plan is a sparse linear map.
    struct SamplePlan
    {
        int width = 0;
        int height = 0;
        std::vector<std::uint32_t> pixels;
        std::vector<BilinearTaps> taps;
    };

    SamplePlan build_sample_plan(const ViewBuffers& buffers, int texture_width, int texture_height);
    // Same values as render_textured for the buffers the plan came from.
    RealImage render_plan(const SamplePlan& plan, const TextureMap& texture);
    // gradient += J^T upstream (3-channel texture-shaped accumulator).
    void accumulate_texture_gradient(const SamplePlan& plan, const RealImage& upstream, RealImage& gradient);

    struct RenderGradient
    {
        RealImage image;
        RealImage texture_gradient;
    };

    RenderGradient render_with_gradient(
        const TriangleMesh& mesh, const TextureMap& texture, const Camera& camera, const RealImage& upstream);

    struct LossValue
    {
        double value = 0.0;
        RealImage gradient; // w.r.t. the first argument
    };

    // Mean absolute difference over masked pixels and all channels.
    LossValue l1_loss(const RealImage& a, const RealImage& b, const Mask& mask);

    struct ProxyOptions
    {
        int levels = 4;
        bool blur = true;
    };

    // Mean of masked L1 over a Gaussian pyramid (5-tap binomial blur, 2x decimation).
    // Level 0 is the full-resolution pair.
    LossValue perceptual_proxy_loss(const RealImage& a, const RealImage& b, const Mask& mask, const ProxyOptions& options = {});
    int effective_levels(int width, int height, int levels) noexcept;

    struct AdamParams
    {
        double lr = 0.1;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    struct OptState
    {
        AdamParams params;
        std::vector<double> first_moment;
        std::vector<double> second_moment;
        std::int64_t step = 0;

        OptState() = default;
        OptState(std::size_t size, const AdamParams& p) : params(p), first_moment(size, 0.0), second_moment(size, 0.0)
        {
        }
    };

    // Bias-corrected Adam update of arbitrary parameters (no clamping).
    void adam_step(std::span<double> values, std::span<const double> gradient, OptState& state);
    // Texture variant: texels are clamped to [0, 1] after the update.
    void adam_step(TextureMap& texture, const RealImage& gradient, OptState& state);

    // Sum over views of proxy + lambda * L1 between the rendered texture and
    // each view image, masked to the view silhouette.
    class FusionObjective
    {
    public:
        FusionObjective(std::span<const SupportView> views, int texture_width, int texture_height, double lambda,
            const ProxyOptions& proxy = {});
        ~FusionObjective();

        struct Evaluation
        {
            double total = 0.0;
            std::vector<double> per_view;
            RealImage gradient;
        };

        Evaluation evaluate(const TextureMap& texture) const;
        std::size_t view_count() const noexcept
        {
            return views_.size();
        }

        struct Workspace;

    private:
        struct ViewTerm
        {
            SamplePlan plan;
            std::vector<RealImage> target_pyramid; // level 0 is the view image
            std::vector<Mask> mask_pyramid;
        };

        std::vector<ViewTerm> views_;
        // Scratch shared by evaluate(); an objective is not safe to evaluate concurrently.
        std::unique_ptr<Workspace> workspace_;
        int texture_width_;
        int texture_height_;
        double lambda_;
        ProxyOptions proxy_;
    };

    struct FuseConfig
    {
        int iterations = 400;
        double lambda = 10.0;
        AdamParams adam;
        int resolution = 1024;
        ProxyOptions proxy;
        bool bake_init = true;
        double alpha = 3.0; // baking weights
        double beta = 3.0;
        int checkpoint_every = 0;
        std::filesystem::path checkpoint_dir;
    };

    struct LossRecord
    {
        int iteration = 0;
        std::vector<double> per_view;
        double total = 0.0;
    };

    struct FuseResult
    {
        TextureMap texture;
        std::vector<LossRecord> trace;
    };

    // Adam on the fusion objective, all views per iteration. `init` overrides
    // the configured initialization.
    FuseResult optimize_texture(const TriangleMesh& mesh, std::span<const SupportView> views, const FuseConfig& config,
        const TextureMap* init = nullptr);

    // Per-texel reprojection of the views, blended with angle/distance
    // weights; texels no view observes stay 0.5.
    TextureMap bake_initial_texture(
        const TriangleMesh& mesh, std::span<const SupportView> views, int width, int height, double alpha = 3.0, double beta = 3.0);

    // 1 where the texel center maps to a surface point visible in at least one view.
    Mask observed_texels(const TriangleMesh& mesh, std::span<const SupportView> views, int width, int height);

    // Writes <stem>.obj, <stem>.mtl and <stem>.png.
    void export_textured_mesh(const TriangleMesh& mesh, const TextureMap& texture, const std::filesystem::path& obj_path);

    void write_loss_trace_csv(const std::filesystem::path& path, std::span<const LossRecord> trace);
} // namespace texfuse
