#include "texfuse/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "texfuse/errors.hpp"

namespace texfuse
{
    BackViewSource parse_back_view_source(std::string_view name)
    {
        if (name == "file")
        {
            return BackViewSource::file;
        }
        if (name == "backend")
        {
            return BackViewSource::backend;
        }
        if (name == "none")
        {
            return BackViewSource::none;
        }
        throw ConfigError("unknown back_view_source '" + std::string(name) + "' (expected file, backend or none)");
    }

    std::string_view to_string(BackViewSource source) noexcept
    {
        switch (source)
        {
        case BackViewSource::file:
            return "file";
        case BackViewSource::backend:
            return "backend";
        case BackViewSource::none:
            return "none";
        }
        return "none";
    }

    std::string_view to_string(ViewOrigin origin) noexcept
    {
        switch (origin)
        {
        case ViewOrigin::input:
            return "input";
        case ViewOrigin::back_init:
            return "back_init";
        case ViewOrigin::synthesized:
            return "synthesized";
        }
        return "synthesized";
    }

    std::string azimuth_label(double azimuth)
    {
        const double a = normalize_azimuth(azimuth);
        char buf[32];
        if (a == std::round(a))
        {
            std::snprintf(buf, sizeof(buf), "%ld", std::lround(a));
        }
        else
        {
            std::snprintf(buf, sizeof(buf), "%g", a);
        }
        return buf;
    }

    void validate_config(const PipelineConfig& config)
    {
        std::set<double> seen;
        for (double az : config.schedule)
        {
            const double a = normalize_azimuth(az);
            if (!std::isfinite(a))
            {
                throw ConfigError("schedule entries must be finite");
            }
            if (a == 0.0)
            {
                throw ConfigError("schedule must not contain azimuth 0 (the input view)");
            }
            if (!seen.insert(a).second)
            {
                throw ConfigError("schedule contains azimuth " + azimuth_label(a) + " twice");
            }
        }
        if (config.image_size < 16)
        {
            throw ConfigError("image_size must be at least 16");
        }
        if (config.blend.boundary_radius < 0)
        {
            throw ConfigError("boundary_radius must be non-negative");
        }
        if (config.steps <= 0)
        {
            throw ConfigError("steps must be positive");
        }
        if (config.back_view_source == BackViewSource::file && config.back_view_path.empty())
        {
            throw ConfigError("back_view_source = file needs a back-view image path");
        }
    }

    ByteImage guidance_normal(const ViewBuffers& buffers, const Camera& camera, GuidanceMode mode)
    {
        if (mode == GuidanceMode::normal || mode == GuidanceMode::both)
        {
            return render_normal_map(buffers, camera);
        }
        return ByteImage(buffers.width, buffers.height, 3, 128);
    }

    ByteImage guidance_silhouette(const ViewBuffers& buffers, GuidanceMode mode)
    {
        if (mode == GuidanceMode::silhouette || mode == GuidanceMode::both)
        {
            return render_silhouette(buffers);
        }
        return ByteImage(buffers.width, buffers.height, 1, 255);
    }

    ByteImage request_known_mask(const BlendResult& blend)
    {
        const ViewBuffers& buffers = *blend.target_buffers;
        ByteImage out(buffers.width, buffers.height, 1, 0);
        for (std::size_t i = 0; i < buffers.pixel_count(); ++i)
        {
            out.data()[i] = (!buffers.covered(i) || blend.known_mask.data()[i]) ? 255 : 0;
        }
        return out;
    }

    namespace
    {
        using Clock = std::chrono::steady_clock;
        using Json = nlohmann::json;

        std::int64_t Millis(Clock::time_point start)
        {
            return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
        }

        Json RecordJson(const RequestRecord& r)
        {
            return {{"endpoint", r.endpoint}, {"azimuth", r.azimuth}, {"prompt", r.prompt}, {"seed", r.seed},
                {"dispatched", r.dispatched}, {"backend_id", r.backend_id}, {"elapsed_ms", r.elapsed_ms}};
        }

        void WriteJson(const std::filesystem::path& path, const Json& value)
        {
            std::ofstream out(path);
            if (!out)
            {
                throw Error("cannot write " + path.string());
            }
            out << value.dump(2) << '\n';
        }

        // Run-directory persistence; a no-op when no directory was requested.
        class RunWriter
        {
        public:
            explicit RunWriter(const std::optional<std::filesystem::path>& dir) : dir_(dir)
            {
                if (dir_)
                {
                    std::filesystem::create_directories(*dir_);
                    std::ofstream truncate(*dir_ / "requests.jsonl");
                }
            }

            std::optional<std::filesystem::path> ViewDir(const std::string& name) const
            {
                if (!dir_)
                {
                    return std::nullopt;
                }
                const auto path = *dir_ / name;
                std::filesystem::create_directories(path);
                return path;
            }

            void Append(const RequestRecord& record) const
            {
                if (!dir_)
                {
                    return;
                }
                std::ofstream out(*dir_ / "requests.jsonl", std::ios::app);
                out << RecordJson(record).dump() << '\n';
            }

        private:
            std::optional<std::filesystem::path> dir_;
        };
    } // namespace

    SupportView initialize_back_view(const TriangleMesh& mesh, const SupportView& input, const PipelineConfig& config,
        InpaintBackend* backend, RequestRecord* record)
    {
        RenderSettings settings;
        settings.width = settings.height = config.image_size;
        const Camera camera = make_turntable_camera(180.0, settings);
        auto buffers = std::make_shared<const ViewBuffers>(rasterize(mesh, camera));
        ByteImage image;
        RequestRecord log;
        log.endpoint = "backview";
        log.azimuth = 180.0;
        switch (config.back_view_source)
        {
        case BackViewSource::none:
            throw ConfigError("back-view initialization requested with back_view_source = none");
        case BackViewSource::file:
            image = read_png(config.back_view_path, 3);
            log.dispatched = false;
            log.backend_id = "file";
            break;
        case BackViewSource::backend:
        {
            if (!backend)
            {
                throw ConfigError("back_view_source = backend needs a backend");
            }
            BackViewRequest request;
            request.input_image = to_bytes(input.image);
            request.normal_map = render_normal_map(*buffers, camera);
            request.depth = render_depth16(*buffers);
            request.silhouette = render_silhouette(*buffers);
            request.prompt = view_prompt(180.0, PromptStyle::back_init);
            request.seed = config.base_seed;
            log.prompt = request.prompt;
            log.seed = request.seed;
            log.backend_id = backend->id();
            const auto start = Clock::now();
            try
            {
                image = backend->back_view(request);
            }
            catch (const BackendUnavailable& e)
            {
                throw BackendUnavailable(std::string("back-view provider unavailable: ") + e.what());
            }
            log.elapsed_ms = Millis(start);
            break;
        }
        }
        if (image.width() != config.image_size || image.height() != config.image_size || image.channels() != 3)
        {
            throw SizeMismatch("back view is " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                               ", expected " + std::to_string(config.image_size) + "x" + std::to_string(config.image_size));
        }
        if (record)
        {
            *record = log;
        }
        return SupportView{camera, to_real(image), buffers, visible_face_set(*buffers)};
    }

    SynthesisResult synthesize_all_views(const TriangleMesh& mesh, const RealImage& input_image, const PipelineConfig& config,
        InpaintBackend* backend, const SynthesisOptions& options)
    {
        validate_config(config);
        if (input_image.width() != config.image_size || input_image.height() != config.image_size ||
            input_image.channels() != 3)
        {
            throw SizeMismatch("input image is " + std::to_string(input_image.width()) + "x" +
                               std::to_string(input_image.height()) + ", expected " + std::to_string(config.image_size) +
                               "x" + std::to_string(config.image_size) + " RGB");
        }
        RenderSettings settings;
        settings.width = settings.height = config.image_size;
        const RunWriter writer(options.run_dir);

        SynthesisResult result;
        const Camera input_camera = make_turntable_camera(0.0, settings);
        result.set.views.push_back(make_support_view(mesh, input_camera, input_image));
        result.set.origins.push_back(ViewOrigin::input);

        if (config.back_view_source != BackViewSource::none)
        {
            RequestRecord record;
            SupportView back = initialize_back_view(mesh, result.set.views.front(), config, backend, &record);
            writer.Append(record);
            if (const auto dir = writer.ViewDir("back_init"))
            {
                write_png(*dir / "result.png", to_bytes(back.image));
                write_png(*dir / "normal.png", render_normal_map(*back.buffers, back.camera));
                write_png(*dir / "silhouette.png", render_silhouette(*back.buffers));
                WriteJson(*dir / "meta.json", {{"source", std::string(to_string(config.back_view_source))},
                                                  {"prompt", record.prompt}, {"seed", record.seed},
                                                  {"backend_id", record.backend_id},
                                                  {"timings", {{"elapsed_ms", record.elapsed_ms}}}});
            }
            result.requests.push_back(std::move(record));
            result.set.views.push_back(std::move(back));
            result.set.origins.push_back(ViewOrigin::back_init);
        }

        for (std::size_t k = 0; k < config.schedule.size(); ++k)
        {
            const double azimuth = normalize_azimuth(config.schedule[k]);
            const auto step_start = Clock::now();
            const Camera camera = make_turntable_camera(azimuth, settings);
            BlendResult blend = aggregate_views(result.set.views, camera, mesh, config.blend);
            const std::int64_t aggregate_ms = Millis(step_start);
            const ViewBuffers& buffers = *blend.target_buffers;

            InpaintRequest request;
            request.blended = to_bytes(blend.blended);
            request.known_mask = request_known_mask(blend);
            request.normal_map = guidance_normal(buffers, camera, config.guidance);
            request.silhouette = guidance_silhouette(buffers, config.guidance);
            request.prompt = view_prompt(azimuth, PromptStyle::front_pipeline);
            request.negative_prompt = config.negative_prompt;
            request.seed = config.base_seed + k + 1;
            request.guidance_scale = config.guidance_scale;
            request.steps = config.steps;
            request.view_azimuth = azimuth;
            request.guidance = config.guidance;

            const std::size_t unknown =
                static_cast<std::size_t>(std::count(request.known_mask.data().begin(), request.known_mask.data().end(), 0));

            RequestRecord record;
            record.endpoint = "inpaint";
            record.azimuth = azimuth;
            record.prompt = request.prompt;
            record.seed = request.seed;
            ByteImage accepted;
            if (unknown == 0 && config.skip_fully_known)
            {
                validate_request(request);
                accepted = request.blended;
                record.dispatched = false;
                record.backend_id = "none";
            }
            else
            {
                if (!backend)
                {
                    throw ConfigError("view " + azimuth_label(azimuth) + " needs inpainting but no backend is configured");
                }
                InpaintResponse response = inpaint(request, *backend, config.policy);
                accepted = std::move(response.image);
                record.backend_id = response.backend_id;
                record.elapsed_ms = response.elapsed_ms;
            }
            writer.Append(record);

            if (const auto dir = writer.ViewDir("view_" + azimuth_label(azimuth)))
            {
                write_png(*dir / "blend.png", request.blended);
                write_png(*dir / "known_mask.png", request.known_mask);
                write_png(*dir / "normal.png", request.normal_map);
                write_png(*dir / "silhouette.png", request.silhouette);
                write_png(*dir / "result.png", accepted);
                WriteJson(*dir / "meta.json",
                    {{"azimuth", azimuth}, {"seed", request.seed}, {"prompt", request.prompt},
                        {"negative_prompt", request.negative_prompt}, {"guidance", std::string(to_string(config.guidance))},
                        {"guidance_scale", request.guidance_scale}, {"steps", request.steps},
                        {"backend_id", record.backend_id}, {"dispatched", record.dispatched},
                        {"unknown_pixels", unknown},
                        {"timings", {{"aggregate_ms", aggregate_ms}, {"inpaint_ms", record.elapsed_ms},
                                        {"elapsed_ms", Millis(step_start)}}}});
            }

            SupportView view{camera, to_real(accepted), blend.target_buffers, visible_face_set(buffers)};
            bool replaced = false;
            for (std::size_t v = 0; v < result.set.views.size(); ++v)
            {
                if (result.set.origins[v] == ViewOrigin::back_init &&
                    normalize_azimuth(result.set.views[v].camera.azimuth) == azimuth)
                {
                    result.set.views[v] = view;
                    result.set.origins[v] = ViewOrigin::synthesized;
                    replaced = true;
                }
            }
            if (!replaced)
            {
                result.set.views.push_back(view);
                result.set.origins.push_back(ViewOrigin::synthesized);
            }

            if (!options.keep_weights)
            {
                blend.per_view_weights.clear();
                blend.per_view_weights.shrink_to_fit();
            }
            result.requests.push_back(std::move(record));
            result.steps.push_back({azimuth, std::move(blend), std::move(accepted), unknown});
        }
        return result;
    }
} // namespace texfuse
