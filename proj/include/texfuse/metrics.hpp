#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "texfuse/camera.hpp"
#include "texfuse/image.hpp"
#include "texfuse/mesh.hpp"
#include "texfuse/texture_map.hpp"

namespace texfuse
{
    inline constexpr double PsnrCap = 99.0;

    // Mean squared error over masked pixels and all channels; values in [0, 1].
    double mean_squared_error(const RealImage& a, const RealImage& b, const Mask* mask = nullptr);
    // 10 log10(1 / MSE), reported as PsnrCap when the images agree exactly.
    double psnr(const RealImage& a, const RealImage& b, const Mask* mask = nullptr);

    RealImage luma(const RealImage& image);
    // Single-scale SSIM on Rec. 601 luma: 11x11 Gaussian window (sigma 1.5),
    // averaged over every window position that fits inside the image.
    double ssim(const RealImage& a, const RealImage& b);

    struct EvalRow
    {
        double azimuth = 0.0;
        double psnr = 0.0;
        double ssim = 0.0;
    };

    struct EvalReport
    {
        std::vector<EvalRow> rows;
        double mean_psnr = 0.0;
        double mean_ssim = 0.0;
    };

    // Returns the ground-truth image for an azimuth; throws when it has none.
    using GroundTruthProvider = std::function<ByteImage(double azimuth)>;

    struct EvalOptions
    {
        int views = 90;
        double spacing = 4.0;
        bool masked = false;
        RenderSettings render;
    };

    std::vector<double> turntable_azimuths(int views, double spacing);
    EvalReport turntable_eval(
        const TriangleMesh& mesh, const TextureMap& texture, const GroundTruthProvider& ground_truth, const EvalOptions& options = {});

    void write_report_csv(std::ostream& out, const EvalReport& report);
    std::string format_report_table(const EvalReport& report);
} // namespace texfuse
