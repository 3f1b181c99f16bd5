#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "texfuse/image.hpp"

namespace texfuse
{
    enum class PromptStyle
    {
        front_pipeline,
        back_init,
    };

    // Which shape cues accompany an inpainting request.
    enum class GuidanceMode
    {
        none,
        normal,
        silhouette,
        both,
    };

    GuidanceMode parse_guidance(std::string_view name);
    std::string_view to_string(GuidanceMode mode) noexcept;

    // Text prompt for a view. Front-pipeline azimuths snap to the nearest
    // multiple of 45 degrees before labeling.
    std::string view_prompt(double azimuth, PromptStyle style);

    struct InpaintRequest
    {
        ByteImage blended;     // RGB; unknown pixels white
        ByteImage known_mask;  // gray; 255 = keep, 0 = synthesize
        ByteImage normal_map;  // RGB camera-space encoding
        ByteImage silhouette;  // gray
        std::string prompt;
        std::string negative_prompt;
        std::uint64_t seed = 0;
        double guidance_scale = 15.0;
        int steps = 25;
        double view_azimuth = 0.0;
        GuidanceMode guidance = GuidanceMode::both;
    };

    struct InpaintResponse
    {
        ByteImage image;
        std::string backend_id;
        std::int64_t elapsed_ms = 0;
    };

    struct BackViewRequest
    {
        ByteImage input_image; // RGB
        ByteImage normal_map;  // RGB
        WordImage depth;       // 16-bit gray, near = high
        ByteImage silhouette;  // gray
        std::string prompt;
        std::uint64_t seed = 0;
    };

    class InpaintBackend
    {
    public:
        virtual ~InpaintBackend() = default;

        virtual std::string id() const = 0;
        virtual ByteImage inpaint(const InpaintRequest& request) = 0;
        virtual ByteImage back_view(const BackViewRequest& request) = 0;
    };

    enum class KnownRegionPolicy
    {
        strict,  // reject responses that alter known pixels beyond tolerance
        lenient, // composite known pixels back over the response
    };

    // Largest per-channel deviation (in 8-bit steps) a backend may introduce on known pixels.
    inline constexpr int KnownRegionTolerance = 2;

    // Throws InvalidRequest when images disagree in size or format.
    void validate_request(const InpaintRequest& request);

    // Dispatches one request and enforces the response contract.
    InpaintResponse inpaint(
        const InpaintRequest& request, InpaintBackend& backend, KnownRegionPolicy policy = KnownRegionPolicy::strict);

    // Returns the response image with known pixels copied from `blended`.
    ByteImage composite_known(const ByteImage& generated, const ByteImage& blended, const ByteImage& known_mask);

    // Answers with pre-rendered ground-truth views keyed by azimuth.
    class OracleBackend : public InpaintBackend
    {
    public:
        explicit OracleBackend(std::map<double, ByteImage> views);

        std::string id() const override;
        ByteImage inpaint(const InpaintRequest& request) override;
        ByteImage back_view(const BackViewRequest& request) override;

        const ByteImage& view(double azimuth) const;
        bool has_view(double azimuth) const;

    private:
        std::map<double, ByteImage> views_;
    };

    // Reads every view_<azimuth>.png in a directory.
    std::map<double, ByteImage> load_ground_truth_views(const std::filesystem::path& dir);
    std::string view_file_name(double azimuth);

    // Dependency-free smoke backend: propagates known colors into unknown
    // silhouette pixels, then relaxes them by neighbor averaging.
    class DiffuseFillBackend : public InpaintBackend
    {
    public:
        std::string id() const override;
        ByteImage inpaint(const InpaintRequest& request) override;
        // Not supported: there is nothing to propagate from in the opposite view.
        ByteImage back_view(const BackViewRequest& request) override;

        static constexpr int MaxIterations = 10000;
    };

    // Client for the HTTP inpainting service.
    class RemoteBackend : public InpaintBackend
    {
    public:
        RemoteBackend(std::string endpoint, int timeout_ms = 600000, int retries = 2);
        ~RemoteBackend() override;

        std::string id() const override;
        ByteImage inpaint(const InpaintRequest& request) override;
        ByteImage back_view(const BackViewRequest& request) override;

        // GET /health; returns the reported model name.
        std::string health();

    private:
        class Impl;
        std::unique_ptr<Impl> impl_;
    };
} // namespace texfuse
