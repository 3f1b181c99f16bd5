#include "texfuse/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "texfuse/errors.hpp"

namespace texfuse
{
    double mean_squared_error(const RealImage& a, const RealImage& b, const Mask* mask)
    {
        if (!a.same_shape(b))
        {
            throw Error("metric inputs differ in shape");
        }
        if (mask && !a.same_size(*mask))
        {
            throw Error("metric mask differs in size");
        }
        const int channels = a.channels();
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < a.pixel_count(); ++i)
        {
            if (mask && !mask->data()[i])
            {
                continue;
            }
            const double* pa = a.pixel(i);
            const double* pb = b.pixel(i);
            for (int c = 0; c < channels; ++c)
            {
                const double d = pa[c] - pb[c];
                sum += d * d;
            }
            count += channels;
        }
        if (count == 0)
        {
            throw Error("metric mask selects no pixels");
        }
        return sum / static_cast<double>(count);
    }

    double psnr(const RealImage& a, const RealImage& b, const Mask* mask)
    {
        const double mse = mean_squared_error(a, b, mask);
        if (mse <= 0.0)
        {
            return PsnrCap;
        }
        return std::min(PsnrCap, 10.0 * std::log10(1.0 / mse));
    }

    RealImage luma(const RealImage& image)
    {
        if (image.channels() == 1)
        {
            return image;
        }
        if (image.channels() < 3)
        {
            throw Error("luma needs a gray or RGB image");
        }
        RealImage out(image.width(), image.height(), 1, 0.0);
        for (std::size_t i = 0; i < image.pixel_count(); ++i)
        {
            const double* p = image.pixel(i);
            out.data()[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        }
        return out;
    }

    namespace
    {
        constexpr int Window = 11;
        constexpr double Sigma = 1.5;
        constexpr double C1 = 0.01 * 0.01;
        constexpr double C2 = 0.03 * 0.03;

        std::array<double, Window> GaussianKernel()
        {
            std::array<double, Window> k{};
            double sum = 0.0;
            for (int i = 0; i < Window; ++i)
            {
                const double x = i - Window / 2;
                k[i] = std::exp(-x * x / (2.0 * Sigma * Sigma));
                sum += k[i];
            }
            for (double& v : k)
            {
                v /= sum;
            }
            return k;
        }

        // Separable "valid" filtering: output is (w - 10) x (h - 10).
        std::vector<double> Filter(const std::vector<double>& in, int w, int h)
        {
            static const auto kernel = GaussianKernel();
            const int ow = w - Window + 1;
            const int oh = h - Window + 1;
            std::vector<double> rows(static_cast<std::size_t>(ow) * h, 0.0);
            for (int y = 0; y < h; ++y)
            {
                for (int x = 0; x < ow; ++x)
                {
                    double s = 0.0;
                    for (int k = 0; k < Window; ++k)
                    {
                        s += kernel[k] * in[static_cast<std::size_t>(y) * w + x + k];
                    }
                    rows[static_cast<std::size_t>(y) * ow + x] = s;
                }
            }
            std::vector<double> out(static_cast<std::size_t>(ow) * oh, 0.0);
            for (int y = 0; y < oh; ++y)
            {
                for (int x = 0; x < ow; ++x)
                {
                    double s = 0.0;
                    for (int k = 0; k < Window; ++k)
                    {
                        s += kernel[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
                    }
                    out[static_cast<std::size_t>(y) * ow + x] = s;
                }
            }
            return out;
        }
    } // namespace

    double ssim(const RealImage& a, const RealImage& b)
    {
        if (!a.same_shape(b))
        {
            throw Error("ssim inputs differ in shape");
        }
        if (a.width() < Window || a.height() < Window)
        {
            throw Error("ssim needs images of at least 11x11 pixels");
        }
        const RealImage la = luma(a);
        const RealImage lb = luma(b);
        const int w = la.width();
        const int h = la.height();
        const std::size_t n = la.pixel_count();
        std::vector<double> x(la.data().begin(), la.data().end());
        std::vector<double> y(lb.data().begin(), lb.data().end());
        std::vector<double> xx(n), yy(n), xy(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = Filter(x, w, h);
        const auto my = Filter(y, w, h);
        const auto sxx = Filter(xx, w, h);
        const auto syy = Filter(yy, w, h);
        const auto sxy = Filter(xy, w, h);
        double total = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i)
        {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cov = sxy[i] - mx[i] * my[i];
            total += ((2 * mx[i] * my[i] + C1) * (2 * cov + C2)) /
                     ((mx[i] * mx[i] + my[i] * my[i] + C1) * (vx + vy + C2));
        }
        return total / static_cast<double>(mx.size());
    }

    std::vector<double> turntable_azimuths(int views, double spacing)
    {
        std::vector<double> out;
        for (int i = 0; i < views; ++i)
        {
            out.push_back(i * spacing);
        }
        return out;
    }

    EvalReport turntable_eval(
        const TriangleMesh& mesh, const TextureMap& texture, const GroundTruthProvider& ground_truth, const EvalOptions& options)
    {
        if (options.views <= 0)
        {
            throw Error("turntable_eval needs at least one view");
        }
        EvalReport report;
        for (double azimuth : turntable_azimuths(options.views, options.spacing))
        {
            const Camera camera = make_turntable_camera(azimuth, options.render);
            const ViewBuffers buffers = rasterize(mesh, camera);
            const RealImage rendered = to_real(to_bytes(render_textured(buffers, texture)));
            const ByteImage truth_bytes = ground_truth(azimuth);
            RealImage truth = to_real(truth_bytes);
            if (!truth.same_shape(rendered))
            {
                throw Error("ground truth for azimuth " + std::to_string(azimuth) + " has the wrong size or channels");
            }
            EvalRow row;
            row.azimuth = azimuth;
            if (options.masked)
            {
                const Mask mask = silhouette_mask(buffers);
                row.psnr = psnr(rendered, truth, &mask);
            }
            else
            {
                row.psnr = psnr(rendered, truth);
            }
            row.ssim = ssim(rendered, truth);
            report.rows.push_back(row);
            report.mean_psnr += row.psnr;
            report.mean_ssim += row.ssim;
        }
        report.mean_psnr /= static_cast<double>(report.rows.size());
        report.mean_ssim /= static_cast<double>(report.rows.size());
        return report;
    }

    void write_report_csv(std::ostream& out, const EvalReport& report)
    {
        // lpips/fid/clip columns stay empty for an external scorer to fill in.
        out << "azimuth,psnr,ssim,lpips,fid,clip\n";
        char buf[128];
        for (const EvalRow& row : report.rows)
        {
            std::snprintf(buf, sizeof(buf), "%g,%.6f,%.6f,,,\n", row.azimuth, row.psnr, row.ssim);
            out << buf;
        }
    }

    std::string format_report_table(const EvalReport& report)
    {
        std::string out = " azimuth |   psnr dB |     ssim\n---------+-----------+---------\n";
        char buf[128];
        for (const EvalRow& row : report.rows)
        {
            std::snprintf(buf, sizeof(buf), "%8g | %9.3f | %8.5f\n", row.azimuth, row.psnr, row.ssim);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), "---------+-----------+---------\n    mean | %9.3f | %8.5f\n", report.mean_psnr,
            report.mean_ssim);
        out += buf;
        return out;
    }
} // namespace texfuse
