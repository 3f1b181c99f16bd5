#include "texfuse/texture_fuse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "texfuse/errors.hpp"

namespace texfuse
{
    SamplePlan build_sample_plan(const ViewBuffers& buffers, int texture_width, int texture_height)
    {
        SamplePlan plan;
        plan.width = buffers.width;
        plan.height = buffers.height;
        for (std::size_t i = 0; i < buffers.pixel_count(); ++i)
        {
            if (!buffers.covered(i))
            {
                continue;
            }
            const Eigen::Vector2d& uv = buffers.uv[i];
            plan.pixels.push_back(static_cast<std::uint32_t>(i));
            plan.taps.push_back(bilinear_taps(
                texture_width, texture_height, uv.x() * texture_width - 0.5, (1.0 - uv.y()) * texture_height - 0.5));
        }
        return plan;
    }

    namespace
    {
        // Overwrites the covered pixels of `out`.
        void RenderInto(const SamplePlan& plan, const TextureMap& texture, RealImage& out)
        {
            const RealImage& tex = texture.texels();
            for (std::size_t k = 0; k < plan.pixels.size(); ++k)
            {
                const BilinearTaps& t = plan.taps[k];
                double* px = out.pixel(plan.pixels[k]);
                px[0] = px[1] = px[2] = 0.0;
                for (int j = 0; j < 4; ++j)
                {
                    const double* texel = tex.pixel(t.index[j]);
                    px[0] += t.weight[j] * texel[0];
                    px[1] += t.weight[j] * texel[1];
                    px[2] += t.weight[j] * texel[2];
                }
            }
        }
    } // namespace

    RealImage render_plan(const SamplePlan& plan, const TextureMap& texture)
    {
        RealImage out(plan.width, plan.height, 3, 1.0);
        RenderInto(plan, texture, out);
        return out;
    }

    void accumulate_texture_gradient(const SamplePlan& plan, const RealImage& upstream, RealImage& gradient)
    {
        for (std::size_t k = 0; k < plan.pixels.size(); ++k)
        {
            const BilinearTaps& t = plan.taps[k];
            const double* g = upstream.pixel(plan.pixels[k]);
            for (int j = 0; j < 4; ++j)
            {
                double* dst = gradient.pixel(t.index[j]);
                dst[0] += t.weight[j] * g[0];
                dst[1] += t.weight[j] * g[1];
                dst[2] += t.weight[j] * g[2];
            }
        }
    }

    RenderGradient render_with_gradient(
        const TriangleMesh& mesh, const TextureMap& texture, const Camera& camera, const RealImage& upstream)
    {
        if (upstream.width() != camera.width || upstream.height() != camera.height || upstream.channels() != 3)
        {
            throw Error("render_with_gradient: upstream gradient must match the image size");
        }
        const SamplePlan plan = build_sample_plan(rasterize(mesh, camera), texture.width(), texture.height());
        RenderGradient out;
        out.image = render_plan(plan, texture);
        out.texture_gradient = RealImage(texture.width(), texture.height(), 3, 0.0);
        accumulate_texture_gradient(plan, upstream, out.texture_gradient);
        return out;
    }

    namespace
    {
        // Writes scale * d|a - b| / d a (mean over masked values) into
        // `gradient` and returns the mean absolute difference.
        double MaskedL1(const RealImage& a, const RealImage& b, const Mask& mask, double scale, RealImage& gradient)
        {
            if (!gradient.same_shape(a))
            {
                gradient = RealImage(a.width(), a.height(), a.channels(), 0.0);
            }
            const int channels = a.channels();
            const std::size_t pixels = a.pixel_count();
            const std::uint8_t* m = mask.data().data();
            std::size_t count = 0;
            for (std::size_t i = 0; i < pixels; ++i)
            {
                count += m[i] ? channels : 0;
            }
            auto g = gradient.data();
            if (count == 0)
            {
                std::fill(g.begin(), g.end(), 0.0);
                return 0.0;
            }
            const double step = scale / static_cast<double>(count);
            const double* pa = a.data().data();
            const double* pb = b.data().data();
            double sum = 0.0;
            for (std::size_t i = 0; i < pixels; ++i)
            {
                const std::size_t base = i * channels;
                if (!m[i])
                {
                    for (int c = 0; c < channels; ++c)
                    {
                        g[base + c] = 0.0;
                    }
                    continue;
                }
                for (int c = 0; c < channels; ++c)
                {
                    const double diff = pa[base + c] - pb[base + c];
                    sum += std::abs(diff);
                    g[base + c] = diff > 0 ? step : (diff < 0 ? -step : 0.0);
                }
            }
            return sum / static_cast<double>(count);
        }
    } // namespace

    LossValue l1_loss(const RealImage& a, const RealImage& b, const Mask& mask)
    {
        if (!a.same_shape(b) || !a.same_size(mask))
        {
            throw Error("l1_loss: image and mask shapes differ");
        }
        LossValue out;
        out.value = MaskedL1(a, b, mask, 1.0, out.gradient);
        return out;
    }

    namespace
    {
        constexpr double Binomial[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

        int Clamp(int v, int hi) noexcept
        {
            return v < 0 ? 0 : (v > hi ? hi : v);
        }

        void Reshape(RealImage& image, int w, int h, int c)
        {
            if (image.width() != w || image.height() != h || image.channels() != c)
            {
                image = RealImage(w, h, c, 0.0);
            }
        }

        // out(x, y) = blur(in)(2x, 2y) with edge clamping; plain decimation
        // when blur is off. `tmp` is scratch.
        void Downsample(const RealImage& in, bool blur, RealImage& out, RealImage& tmp)
        {
            const int w = in.width();
            const int h = in.height();
            const int c = in.channels();
            const int w2 = (w + 1) / 2;
            const int h2 = (h + 1) / 2;
            Reshape(out, w2, h2, c);
            if (!blur)
            {
                for (int y = 0; y < h2; ++y)
                {
                    for (int x = 0; x < w2; ++x)
                    {
                        std::copy_n(&in.at(2 * x, 2 * y), c, &out.at(x, y));
                    }
                }
                return;
            }
            Reshape(tmp, w2, h, c);
            for (int y = 0; y < h; ++y)
            {
                for (int x = 0; x < w2; ++x)
                {
                    double* dst = &tmp.at(x, y);
                    for (int k = 0; k < c; ++k)
                    {
                        dst[k] = 0.0;
                    }
                    for (int t = 0; t < 5; ++t)
                    {
                        const double* src = &in.at(Clamp(2 * x + t - 2, w - 1), y);
                        for (int k = 0; k < c; ++k)
                        {
                            dst[k] += Binomial[t] * src[k];
                        }
                    }
                }
            }
            std::fill(out.data().begin(), out.data().end(), 0.0);
            for (int y = 0; y < h2; ++y)
            {
                for (int t = 0; t < 5; ++t)
                {
                    const double* src = &tmp.at(0, Clamp(2 * y + t - 2, h - 1));
                    double* dst = &out.at(0, y);
                    for (int i = 0; i < w2 * c; ++i)
                    {
                        dst[i] += Binomial[t] * src[i];
                    }
                }
            }
        }

        // Adds the adjoint of Downsample applied to `grad_out` into `grad_in`.
        void DownsampleTranspose(const RealImage& grad_out, bool blur, RealImage& grad_in, RealImage& tmp)
        {
            const int w = grad_in.width();
            const int h = grad_in.height();
            const int c = grad_in.channels();
            const int w2 = grad_out.width();
            const int h2 = grad_out.height();
            if (!blur)
            {
                for (int y = 0; y < h2; ++y)
                {
                    for (int x = 0; x < w2; ++x)
                    {
                        for (int k = 0; k < c; ++k)
                        {
                            grad_in.at(2 * x, 2 * y, k) += grad_out.at(x, y, k);
                        }
                    }
                }
                return;
            }
            Reshape(tmp, w2, h, c);
            std::fill(tmp.data().begin(), tmp.data().end(), 0.0);
            for (int y = 0; y < h2; ++y)
            {
                for (int t = 0; t < 5; ++t)
                {
                    const double* src = &grad_out.at(0, y);
                    double* dst = &tmp.at(0, Clamp(2 * y + t - 2, h - 1));
                    for (int i = 0; i < w2 * c; ++i)
                    {
                        dst[i] += Binomial[t] * src[i];
                    }
                }
            }
            for (int y = 0; y < h; ++y)
            {
                for (int x = 0; x < w2; ++x)
                {
                    const double* src = &tmp.at(x, y);
                    for (int t = 0; t < 5; ++t)
                    {
                        double* dst = &grad_in.at(Clamp(2 * x + t - 2, w - 1), y);
                        for (int k = 0; k < c; ++k)
                        {
                            dst[k] += Binomial[t] * src[k];
                        }
                    }
                }
            }
        }

        // A coarse pixel is masked in when any pixel of its 2x2 block is.
        Mask DownsampleMask(const Mask& in)
        {
            const int w = in.width();
            const int h = in.height();
            Mask out((w + 1) / 2, (h + 1) / 2, 1, 0);
            for (int y = 0; y < h; ++y)
            {
                for (int x = 0; x < w; ++x)
                {
                    if (in.at(x, y))
                    {
                        out.at(x / 2, y / 2) = 1;
                    }
                }
            }
            return out;
        }

        std::vector<RealImage> BuildPyramid(const RealImage& image, int levels, bool blur)
        {
            std::vector<RealImage> pyramid(levels);
            pyramid[0] = image;
            RealImage tmp;
            for (int k = 1; k < levels; ++k)
            {
                Downsample(pyramid[k - 1], blur, pyramid[k], tmp);
            }
            return pyramid;
        }

        std::vector<Mask> BuildMaskPyramid(const Mask& mask, int levels)
        {
            std::vector<Mask> pyramid{mask};
            for (int k = 1; k < levels; ++k)
            {
                pyramid.push_back(DownsampleMask(pyramid.back()));
            }
            return pyramid;
        }
    } // namespace

    // Scratch images reused across evaluations.
    struct FusionObjective::Workspace
    {
        RealImage rendered;
        std::vector<RealImage> pyramid;
        std::vector<RealImage> grads;
        RealImage tmp;
    };

    namespace
    {
        // proxy(a) + lambda * L1(a) against precomputed target pyramids;
        // leaves the gradient w.r.t. a in ws.grads[0].
        double ProxyPlusL1(const RealImage& a, std::span<const RealImage> target, std::span<const Mask> masks, bool blur,
            double lambda, FusionObjective::Workspace& ws)
        {
            const int levels = static_cast<int>(target.size());
            ws.pyramid.resize(levels);
            ws.grads.resize(levels);
            const double weight = 1.0 / levels;
            double value = (weight + lambda) * MaskedL1(a, target[0], masks[0], weight + lambda, ws.grads[0]);
            const RealImage* previous = &a;
            for (int k = 1; k < levels; ++k)
            {
                Downsample(*previous, blur, ws.pyramid[k], ws.tmp);
                value += weight * MaskedL1(ws.pyramid[k], target[k], masks[k], weight, ws.grads[k]);
                previous = &ws.pyramid[k];
            }
            for (int k = levels - 1; k > 0; --k)
            {
                DownsampleTranspose(ws.grads[k], blur, ws.grads[k - 1], ws.tmp);
            }
            return value;
        }
    } // namespace

    int effective_levels(int width, int height, int levels) noexcept
    {
        int l = std::max(1, levels);
        while (l > 1 && std::min(width, height) < (1 << l))
        {
            --l;
        }
        return l;
    }

    LossValue perceptual_proxy_loss(const RealImage& a, const RealImage& b, const Mask& mask, const ProxyOptions& options)
    {
        if (!a.same_shape(b) || !a.same_size(mask))
        {
            throw Error("perceptual_proxy_loss: image and mask shapes differ");
        }
        const int levels = effective_levels(a.width(), a.height(), options.levels);
        const auto target = BuildPyramid(b, levels, options.blur);
        const auto masks = BuildMaskPyramid(mask, levels);
        FusionObjective::Workspace ws;
        LossValue out;
        out.value = ProxyPlusL1(a, target, masks, options.blur, 0.0, ws);
        out.gradient = std::move(ws.grads[0]);
        return out;
    }

    void adam_step(std::span<double> values, std::span<const double> gradient, OptState& state)
    {
        if (values.size() != gradient.size() || state.first_moment.size() != values.size() ||
            state.second_moment.size() != values.size())
        {
            throw Error("adam_step: parameter, gradient and moment sizes differ");
        }
        const AdamParams& p = state.params;
        ++state.step;
        const double correction1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.step));
        const double correction2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.step));
        for (std::size_t i = 0; i < values.size(); ++i)
        {
            const double g = gradient[i];
            double& m = state.first_moment[i];
            double& v = state.second_moment[i];
            m = p.beta1 * m + (1.0 - p.beta1) * g;
            v = p.beta2 * v + (1.0 - p.beta2) * g * g;
            const double m_hat = m / correction1;
            const double v_hat = v / correction2;
            values[i] -= p.lr * m_hat / (std::sqrt(v_hat) + p.eps);
        }
    }

    void adam_step(TextureMap& texture, const RealImage& gradient, OptState& state)
    {
        if (!texture.texels().same_shape(gradient))
        {
            throw Error("adam_step: gradient shape differs from the texture");
        }
        adam_step(texture.texels().data(), gradient.data(), state);
        texture.clamp_in_place();
    }

    FusionObjective::FusionObjective(
        std::span<const SupportView> views, int texture_width, int texture_height, double lambda, const ProxyOptions& proxy)
        : workspace_(std::make_unique<Workspace>()), texture_width_(texture_width), texture_height_(texture_height),
          lambda_(lambda), proxy_(proxy)
    {
        for (const SupportView& view : views)
        {
            if (!view.buffers || view.image.empty())
            {
                throw Error("fusion view is missing its image or buffers");
            }
            ViewTerm term;
            term.plan = build_sample_plan(*view.buffers, texture_width, texture_height);
            const Mask mask = silhouette_mask(*view.buffers);
            const int levels = effective_levels(view.image.width(), view.image.height(), proxy.levels);
            term.target_pyramid = BuildPyramid(view.image, levels, proxy.blur);
            term.mask_pyramid = BuildMaskPyramid(mask, levels);
            views_.push_back(std::move(term));
        }
    }

    FusionObjective::~FusionObjective() = default;

    FusionObjective::Evaluation FusionObjective::evaluate(const TextureMap& texture) const
    {
        if (texture.width() != texture_width_ || texture.height() != texture_height_)
        {
            throw Error("fusion objective built for a different texture resolution");
        }
        Workspace& ws = *workspace_;
        Evaluation eval;
        eval.gradient = RealImage(texture_width_, texture_height_, 3, 0.0);
        for (const ViewTerm& term : views_)
        {
            const RealImage& target = term.target_pyramid.front();
            Reshape(ws.rendered, target.width(), target.height(), 3);
            std::fill(ws.rendered.data().begin(), ws.rendered.data().end(), 1.0);
            RenderInto(term.plan, texture, ws.rendered);
            const double value =
                ProxyPlusL1(ws.rendered, term.target_pyramid, term.mask_pyramid, proxy_.blur, lambda_, ws);
            eval.per_view.push_back(value);
            eval.total += value;
            accumulate_texture_gradient(term.plan, ws.grads[0], eval.gradient);
        }
        return eval;
    }

    namespace
    {
        struct TexelSurface
        {
            int face = -1;
            Eigen::Vector3d position;
            Eigen::Vector3d normal;
        };

        // Maps each texel center to the surface point of the face whose UV
        // triangle contains it (first face wins on overlaps).
        std::vector<TexelSurface> TexelSurfaces(const TriangleMesh& mesh, int width, int height)
        {
            std::vector<TexelSurface> out(static_cast<std::size_t>(width) * height);
            const bool has_normals = mesh.vertex_normals.size() == mesh.vertices.size();
            for (std::size_t f = 0; f < mesh.faces.size(); ++f)
            {
                Eigen::Vector2d p[3];
                for (int k = 0; k < 3; ++k)
                {
                    const Eigen::Vector2d& uv = mesh.corner_uvs[f][k];
                    p[k] = Eigen::Vector2d(uv.x() * width, (1.0 - uv.y()) * height);
                }
                const auto edge = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& q) {
                    return (b.x() - a.x()) * (q.y() - a.y()) - (b.y() - a.y()) * (q.x() - a.x());
                };
                const double area = edge(p[0], p[1], p[2]);
                if (area == 0)
                {
                    continue;
                }
                const int x0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].x(), p[1].x(), p[2].x()}) - 0.5)));
                const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({p[0].x(), p[1].x(), p[2].x()}))));
                const int y0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].y(), p[1].y(), p[2].y()}) - 0.5)));
                const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({p[0].y(), p[1].y(), p[2].y()}))));
                const auto& face = mesh.faces[f];
                for (int y = y0; y <= y1; ++y)
                {
                    for (int x = x0; x <= x1; ++x)
                    {
                        TexelSurface& ts = out[static_cast<std::size_t>(y) * width + x];
                        if (ts.face >= 0)
                        {
                            continue;
                        }
                        const Eigen::Vector2d q(x + 0.5, y + 0.5);
                        const double b0 = edge(p[1], p[2], q) / area;
                        const double b1 = edge(p[2], p[0], q) / area;
                        const double b2 = edge(p[0], p[1], q) / area;
                        if (b0 < 0 || b1 < 0 || b2 < 0)
                        {
                            continue;
                        }
                        ts.face = static_cast<int>(f);
                        ts.position = b0 * mesh.vertices[face[0]] + b1 * mesh.vertices[face[1]] + b2 * mesh.vertices[face[2]];
                        Eigen::Vector3d n = Eigen::Vector3d::Zero();
                        if (has_normals)
                        {
                            n = b0 * mesh.vertex_normals[face[0]] + b1 * mesh.vertex_normals[face[1]] +
                                b2 * mesh.vertex_normals[face[2]];
                        }
                        if (n.squaredNorm() < 1e-24)
                        {
                            n = face_normal(mesh, static_cast<int>(f));
                        }
                        ts.normal = n.normalized();
                    }
                }
            }
            return out;
        }

        // Pixel of `view` showing `position`, or -1 when it is off-image or occluded.
        long VisiblePixel(const SupportView& view, const Eigen::Vector3d& position)
        {
            const Camera& cam = view.camera;
            const Eigen::Vector2d p = cam.project(position);
            const long x = static_cast<long>(std::floor(p.x()));
            const long y = static_cast<long>(std::floor(p.y()));
            if (x < 0 || y < 0 || x >= cam.width || y >= cam.height)
            {
                return -1;
            }
            const long idx = y * cam.width + x;
            if (!view.buffers->covered(idx))
            {
                return -1;
            }
            const double tolerance = 3.0 / cam.scale;
            return cam.depth(position) <= view.buffers->depth[idx] + tolerance ? idx : -1;
        }
    } // namespace

    TextureMap bake_initial_texture(
        const TriangleMesh& mesh, std::span<const SupportView> views, int width, int height, double alpha, double beta)
    {
        TextureMap texture(width, height, 0.5);
        if (views.empty())
        {
            return texture;
        }
        const auto surfaces = TexelSurfaces(mesh, width, height);
        std::vector<RealImage> edge_distance;
        std::vector<Eigen::Vector3d> toward_viewer;
        for (const SupportView& view : views)
        {
            edge_distance.push_back(distance_transform(silhouette_mask(*view.buffers)));
            toward_viewer.push_back(view.camera.rotation().row(2).transpose());
        }
        for (std::size_t t = 0; t < surfaces.size(); ++t)
        {
            const TexelSurface& ts = surfaces[t];
            if (ts.face < 0)
            {
                continue;
            }
            Eigen::Vector3d color = Eigen::Vector3d::Zero();
            double total = 0.0;
            for (std::size_t v = 0; v < views.size(); ++v)
            {
                const long idx = VisiblePixel(views[v], ts.position);
                if (idx < 0)
                {
                    continue;
                }
                const double angle = std::acos(std::clamp(ts.normal.dot(toward_viewer[v]), -1.0, 1.0));
                const double weight = std::exp(-alpha * angle) * std::pow(edge_distance[v].data()[idx], beta);
                const Eigen::Vector2d p = views[v].camera.project(ts.position);
                color += weight * sample_support(views[v], p);
                total += weight;
            }
            if (total > 0)
            {
                color /= total;
                std::copy_n(color.data(), 3, texture.texels().pixel(t));
            }
        }
        texture.clamp_in_place();
        return texture;
    }

    Mask observed_texels(const TriangleMesh& mesh, std::span<const SupportView> views, int width, int height)
    {
        Mask out(width, height, 1, 0);
        const auto surfaces = TexelSurfaces(mesh, width, height);
        for (std::size_t t = 0; t < surfaces.size(); ++t)
        {
            if (surfaces[t].face < 0)
            {
                continue;
            }
            for (const SupportView& view : views)
            {
                if (VisiblePixel(view, surfaces[t].position) >= 0)
                {
                    out.data()[t] = 1;
                    break;
                }
            }
        }
        return out;
    }

    FuseResult optimize_texture(
        const TriangleMesh& mesh, std::span<const SupportView> views, const FuseConfig& config, const TextureMap* init)
    {
        if (views.empty())
        {
            throw Error("optimize_texture: no views to fuse");
        }
        const int res = config.resolution;
        FuseResult result;
        if (init)
        {
            result.texture = *init;
        }
        else if (config.bake_init)
        {
            result.texture = bake_initial_texture(mesh, views, res, res, config.alpha, config.beta);
        }
        else
        {
            result.texture = TextureMap(res, res, 0.5);
        }
        if (config.iterations <= 0)
        {
            return result;
        }

        const FusionObjective objective(views, result.texture.width(), result.texture.height(), config.lambda, config.proxy);
        OptState state(result.texture.texels().data().size(), config.adam);
        if (config.checkpoint_every > 0 && !config.checkpoint_dir.empty())
        {
            std::filesystem::create_directories(config.checkpoint_dir);
        }
        for (int it = 1; it <= config.iterations; ++it)
        {
            FusionObjective::Evaluation eval = objective.evaluate(result.texture);
            if (!std::isfinite(eval.total))
            {
                std::string detail;
                for (std::size_t v = 0; v < eval.per_view.size(); ++v)
                {
                    detail += " view" + std::to_string(v) + "=" + std::to_string(eval.per_view[v]);
                }
                throw Error("non-finite fusion loss at iteration " + std::to_string(it) + ":" + detail);
            }
            result.trace.push_back({it, eval.per_view, eval.total});
            adam_step(result.texture, eval.gradient, state);
            const auto texels = result.texture.texels().data();
            if (const auto bad = std::find_if(texels.begin(), texels.end(), [](double v) { return !std::isfinite(v); });
                bad != texels.end())
            {
                throw Error("non-finite texel at index " + std::to_string(bad - texels.begin()) + " after iteration " +
                            std::to_string(it));
            }
            if (config.checkpoint_every > 0 && !config.checkpoint_dir.empty() && it % config.checkpoint_every == 0)
            {
                char name[64];
                std::snprintf(name, sizeof(name), "texture_%05d.png", it);
                save_texture(config.checkpoint_dir / name, result.texture);
            }
        }
        return result;
    }

    void export_textured_mesh(const TriangleMesh& mesh, const TextureMap& texture, const std::filesystem::path& obj_path)
    {
        const std::filesystem::path dir = obj_path.parent_path();
        if (!dir.empty())
        {
            std::error_code ec;
            std::filesystem::create_directories(dir, ec);
        }
        const std::string stem = obj_path.stem().string();
        const std::filesystem::path mtl_path = obj_path.parent_path() / (stem + ".mtl");
        const std::filesystem::path png_path = obj_path.parent_path() / (stem + ".png");

        std::ofstream mtl(mtl_path);
        if (!mtl)
        {
            throw Error("cannot write " + mtl_path.string());
        }
        mtl << "newmtl material0\n"
            << "Ka 1 1 1\n"
            << "Kd 1 1 1\n"
            << "Ks 0 0 0\n"
            << "illum 1\n"
            << "map_Kd " << png_path.filename().string() << '\n';
        mtl.close();
        save_texture(png_path, texture);
        write_obj(mesh, obj_path, mtl_path.filename().string(), "material0");
    }

    void write_loss_trace_csv(const std::filesystem::path& path, std::span<const LossRecord> trace)
    {
        std::ofstream out(path);
        if (!out)
        {
            throw Error("cannot write " + path.string());
        }
        out << "iteration";
        const std::size_t views = trace.empty() ? 0 : trace.front().per_view.size();
        for (std::size_t v = 0; v < views; ++v)
        {
            out << ",view_" << v;
        }
        out << ",total\n";
        char buf[64];
        for (const LossRecord& r : trace)
        {
            out << r.iteration;
            for (double v : r.per_view)
            {
                std::snprintf(buf, sizeof(buf), ",%.9g", v);
                out << buf;
            }
            std::snprintf(buf, sizeof(buf), ",%.9g\n", r.total);
            out << buf;
        }
    }
} // namespace texfuse
