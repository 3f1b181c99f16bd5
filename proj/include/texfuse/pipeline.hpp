#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "texfuse/aggregate.hpp"
#include "texfuse/camera.hpp"
#include "texfuse/inpaint.hpp"
#include "texfuse/mesh.hpp"

namespace texfuse
{
    enum class BackViewSource
    {
        file,
        backend,
        none,
    };

    BackViewSource parse_back_view_source(std::string_view name);
    std::string_view to_string(BackViewSource source) noexcept;

    enum class ViewOrigin
    {
        input,
        back_init,
        synthesized,
    };

    std::string_view to_string(ViewOrigin origin) noexcept;

    inline const std::vector<double> DefaultSchedule{45, -45, 90, -90, 135, -135, 180};

    struct PipelineConfig
    {
        std::vector<double> schedule = DefaultSchedule;
        BlendParams blend;
        int image_size = 512;
        std::uint64_t base_seed = 0;
        BackViewSource back_view_source = BackViewSource::backend;
        std::filesystem::path back_view_path;
        GuidanceMode guidance = GuidanceMode::both;
        KnownRegionPolicy policy = KnownRegionPolicy::strict;
        // Accept an entirely known blend without calling the backend.
        bool skip_fully_known = true;
        double guidance_scale = 15.0;
        int steps = 25;
        std::string negative_prompt;
    };

    // Throws ConfigError on duplicate or zero schedule entries and bad sizes.
    void validate_config(const PipelineConfig& config);

    struct MultiViewSet
    {
        std::vector<SupportView> views;
        std::vector<ViewOrigin> origins;
    };

    // One line of the backend request log.
    struct RequestRecord
    {
        std::string endpoint; // "backview" or "inpaint"
        double azimuth = 0.0;
        std::string prompt;
        std::uint64_t seed = 0;
        bool dispatched = true;
        std::string backend_id;
        std::int64_t elapsed_ms = 0;
    };

    struct StepRecord
    {
        double azimuth = 0.0;
        BlendResult blend;
        ByteImage result;
        std::size_t unknown_pixels = 0;
    };

    struct SynthesisResult
    {
        MultiViewSet set;
        std::vector<StepRecord> steps;
        std::vector<RequestRecord> requests;
    };

    struct SynthesisOptions
    {
        // When set, per-view artifacts and requests.jsonl are written here as
        // each step completes.
        std::optional<std::filesystem::path> run_dir;
        bool keep_weights = false;
    };

    // Images the gateway sends for a view; cues excluded by `mode` are
    // replaced by neutral images (flat normal, full silhouette).
    ByteImage guidance_normal(const ViewBuffers& buffers, const Camera& camera, GuidanceMode mode);
    ByteImage guidance_silhouette(const ViewBuffers& buffers, GuidanceMode mode);

    // 255 where the blend is known or the pixel is background.
    ByteImage request_known_mask(const BlendResult& blend);

    SupportView initialize_back_view(const TriangleMesh& mesh, const SupportView& input, const PipelineConfig& config,
        InpaintBackend* backend, RequestRecord* record = nullptr);

    SynthesisResult synthesize_all_views(const TriangleMesh& mesh, const RealImage& input_image, const PipelineConfig& config,
        InpaintBackend* backend, const SynthesisOptions& options = {});

    std::string azimuth_label(double azimuth);
} // namespace texfuse
