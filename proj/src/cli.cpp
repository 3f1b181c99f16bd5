#include "texfuse/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "texfuse/camera.hpp"
#include "texfuse/errors.hpp"
#include "texfuse/hashing.hpp"
#include "texfuse/mock_server.hpp"
#include "texfuse/pipeline.hpp"
#include "texfuse/texture_fuse.hpp"

namespace texfuse
{
    namespace fs = std::filesystem;
    using Json = nlohmann::json;

    TexturePattern parse_texture_pattern(std::string_view name)
    {
        if (name == "checker")
        {
            return TexturePattern::checker;
        }
        if (name == "stripes")
        {
            return TexturePattern::stripes;
        }
        if (name == "solid")
        {
            return TexturePattern::solid;
        }
        throw ConfigError("unknown texture pattern '" + std::string(name) + "' (expected checker, stripes or solid)");
    }

    TextureMap make_pattern_texture(TexturePattern pattern, int size, std::uint64_t seed)
    {
        if (size < 2)
        {
            throw ConfigError("texture size must be at least 2");
        }
        std::mt19937_64 rng(seed);
        const auto color = [&rng] {
            Eigen::Vector3d c;
            for (int k = 0; k < 3; ++k)
            {
                // 8-bit levels so the PNG stores the color exactly.
                c[k] = static_cast<double>(rng() >> 56) / 255.0;
            }
            return c;
        };
        Eigen::Vector3d a = color();
        Eigen::Vector3d b = color();
        // Keep the two colors clearly apart.
        if ((a - b).cwiseAbs().maxCoeff() < 0.25)
        {
            for (int k = 0; k < 3; ++k)
            {
                b[k] = a[k] < 0.5 ? std::min(1.0, a[k] + 0.5) : a[k] - 0.5;
            }
            b = (b * 255.0).array().round() / 255.0;
        }
        TextureMap texture(size, size);
        for (int y = 0; y < size; ++y)
        {
            for (int x = 0; x < size; ++x)
            {
                bool first = true;
                if (pattern == TexturePattern::checker)
                {
                    first = ((x * 8 / size) + (y * 8 / size)) % 2 == 0;
                }
                else if (pattern == TexturePattern::stripes)
                {
                    first = (x * 16 / size) % 2 == 0;
                }
                const Eigen::Vector3d& c = first ? a : b;
                std::copy_n(c.data(), 3, &texture.texels().at(x, y));
            }
        }
        return texture;
    }

    GenMeshOutputs cmd_gen_mesh(const GenMeshOptions& options)
    {
        if (options.out.empty())
        {
            throw ConfigError("gen-mesh needs --out");
        }
        if (options.subdivision < 1)
        {
            throw ConfigError("subdivision must be at least 1");
        }
        if (options.image_size < 16)
        {
            throw ConfigError("image size must be at least 16");
        }
        GenMeshOutputs out;
        out.mesh = options.out / "mesh.obj";
        out.texture = options.out / "texture.png";
        out.views_dir = options.out / "views";
        fs::create_directories(out.views_dir);

        write_obj(generate_test_mesh(options.kind, options.subdivision), out.mesh);
        save_texture(out.texture, make_pattern_texture(options.pattern, options.texture_size, options.seed));
        out.files = {out.mesh, out.texture};

        // Render from the files as written so later runs see identical inputs.
        const TriangleMesh mesh = load_mesh(out.mesh);
        const TextureMap texture = load_texture(out.texture);
        RenderSettings settings;
        settings.width = settings.height = options.image_size;
        std::vector<double> azimuths{0.0};
        azimuths.insert(azimuths.end(), DefaultSchedule.begin(), DefaultSchedule.end());
        for (double az : turntable_azimuths(options.turntable_views, options.turntable_spacing))
        {
            azimuths.push_back(az);
        }
        std::set<double> written;
        for (double az : azimuths)
        {
            const double a = normalize_azimuth(az);
            if (!written.insert(a).second)
            {
                continue;
            }
            const fs::path path = out.views_dir / view_file_name(a);
            write_png(path, to_bytes(render_textured(mesh, texture, make_turntable_camera(a, settings))));
            out.files.push_back(path);
        }
        return out;
    }

    std::unique_ptr<InpaintBackend> make_backend(const std::string& selector, const RemoteSettings& remote)
    {
        std::string s = selector;
        if (s.empty())
        {
            const char* env = std::getenv("TEXFUSE_BACKEND_URL");
            if (!env || !*env)
            {
                throw ConfigError("no backend given; pass --backend oracle:DIR, fill or remote:URL, or set TEXFUSE_BACKEND_URL");
            }
            s = std::string("remote:") + env;
        }
        if (s == "fill")
        {
            return std::make_unique<DiffuseFillBackend>();
        }
        if (s.rfind("oracle:", 0) == 0)
        {
            const fs::path dir = s.substr(7);
            if (!fs::is_directory(dir))
            {
                throw ConfigError("oracle directory not found: " + dir.string());
            }
            return std::make_unique<OracleBackend>(load_ground_truth_views(dir));
        }
        if (s.rfind("remote:", 0) == 0)
        {
            return std::make_unique<RemoteBackend>(s.substr(7), remote.timeout_ms, remote.retries);
        }
        throw ConfigError("unknown backend '" + s + "' (expected oracle:DIR, fill or remote:URL)");
    }

    namespace
    {
        using Clock = std::chrono::steady_clock;

        std::int64_t Millis(Clock::time_point start)
        {
            return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
        }

        void WriteJson(const fs::path& path, const Json& value)
        {
            std::ofstream out(path);
            if (!out)
            {
                throw Error("cannot write " + path.string());
            }
            out << value.dump(2) << '\n';
        }

        Json InputEntry(const fs::path& path)
        {
            return {{"path", fs::absolute(path).lexically_normal().string()}, {"sha256", sha256_file(path)}};
        }

        // Resolves manifest defaults, config file and flag overrides, in that order.
        struct ResolvedRun
        {
            RunConfig config;
            fs::path mesh;
            fs::path input;
            std::string backend;
        };

        ResolvedRun Resolve(const SynthesizeOptions& options)
        {
            ResolvedRun run;
            if (options.manifest)
            {
                std::ifstream in(*options.manifest);
                if (!in)
                {
                    throw ConfigError("manifest not found: " + options.manifest->string());
                }
                Json manifest;
                try
                {
                    manifest = Json::parse(in);
                    run.config = run_config_from_json(manifest.at("config"), options.manifest->string());
                    run.mesh = manifest.at("inputs").at("mesh").at("path").get<std::string>();
                    run.input = manifest.at("inputs").at("input").at("path").get<std::string>();
                    run.backend = manifest.at("backend").at("selector").get<std::string>();
                }
                catch (const Json::exception& e)
                {
                    throw ConfigError(options.manifest->string() + ": malformed manifest: " + e.what());
                }
            }
            if (options.config)
            {
                run.config = load_run_config(*options.config);
            }
            if (!options.mesh.empty())
            {
                run.mesh = options.mesh;
            }
            if (!options.input.empty())
            {
                run.input = options.input;
            }
            if (!options.backend.empty())
            {
                run.backend = options.backend;
            }
            PipelineConfig& p = run.config.pipeline;
            if (options.seed)
            {
                p.base_seed = *options.seed;
            }
            if (options.guidance)
            {
                p.guidance = parse_guidance(*options.guidance);
            }
            if (options.back_view)
            {
                p.back_view_source = BackViewSource::file;
                p.back_view_path = fs::absolute(*options.back_view).lexically_normal();
            }
            if (options.no_back_init)
            {
                p.back_view_source = BackViewSource::none;
            }
            if (options.texture_size)
            {
                run.config.fusion.resolution = *options.texture_size;
            }
            if (options.iterations)
            {
                run.config.fusion.iterations = *options.iterations;
            }
            validate_config(p);
            if (run.mesh.empty() || run.input.empty())
            {
                throw ConfigError("synthesize needs --mesh and --input (or --manifest)");
            }
            if (run.config.fusion.resolution < 2 || run.config.fusion.iterations < 0)
            {
                throw ConfigError("texture size must be at least 2 and iterations non-negative");
            }
            return run;
        }
    } // namespace

    SynthesizeOutputs cmd_synthesize(const SynthesizeOptions& options)
    {
        if (options.out.empty())
        {
            throw ConfigError("synthesize needs --out");
        }
        const auto start = Clock::now();
        ResolvedRun run = Resolve(options);
        const RunConfig& config = run.config;
        if (!fs::exists(run.mesh))
        {
            throw ConfigError("mesh not found: " + run.mesh.string());
        }
        if (!fs::exists(run.input))
        {
            throw ConfigError("input image not found: " + run.input.string());
        }
        if (config.pipeline.back_view_source == BackViewSource::file && !fs::exists(config.pipeline.back_view_path))
        {
            throw ConfigError("back-view image not found: " + config.pipeline.back_view_path.string());
        }

        const TriangleMesh mesh = load_mesh(run.mesh);
        const RealImage input = to_real(read_png(run.input, 3));
        if (input.width() != config.pipeline.image_size || input.height() != config.pipeline.image_size)
        {
            throw ConfigError(run.input.string() + " is " + std::to_string(input.width()) + "x" +
                              std::to_string(input.height()) + " but pipeline.image_size is " +
                              std::to_string(config.pipeline.image_size));
        }
        std::unique_ptr<InpaintBackend> backend = make_backend(run.backend, config.remote);

        Json manifest;
        manifest["config"] = to_json(config);
        manifest["inputs"]["mesh"] = InputEntry(run.mesh);
        manifest["inputs"]["input"] = InputEntry(run.input);
        if (config.pipeline.back_view_source == BackViewSource::file)
        {
            manifest["inputs"]["back_view"] = InputEntry(config.pipeline.back_view_path);
        }
        manifest["backend"] = {{"selector", run.backend}, {"id", backend->id()}};
        manifest["views_only"] = options.views_only;

        Json identity = manifest;
        for (auto& [name, entry] : identity["inputs"].items())
        {
            entry.erase("path");
        }
        identity["backend"].erase("selector");
        const std::string run_id = sha256_hex(identity.dump()).substr(0, 16);

        SynthesizeOutputs out;
        out.run_dir = options.out / "run" / run_id;
        out.manifest = out.run_dir / "manifest.json";
        fs::remove_all(out.run_dir);
        fs::create_directories(out.run_dir);
        manifest["run_id"] = run_id;

        Json timings;
        Json artifacts = Json::array();
        const auto fail = [&](const std::exception& e) {
            manifest["status"] = "failed";
            manifest["error"] = e.what();
            timings["total_ms"] = Millis(start);
            manifest["timings"] = timings;
            manifest["artifacts"] = artifacts;
            WriteJson(out.manifest, manifest);
        };

        SynthesisOptions synth_options;
        synth_options.run_dir = out.run_dir;
        SynthesisResult synthesis;
        try
        {
            const auto synth_start = Clock::now();
            synthesis = synthesize_all_views(mesh, input, config.pipeline, backend.get(), synth_options);
            timings["synthesis_ms"] = Millis(synth_start);
        }
        catch (const std::exception& e)
        {
            fail(e);
            throw;
        }
        artifacts.push_back("requests.jsonl");
        Json views = Json::array();
        for (std::size_t v = 0; v < synthesis.set.views.size(); ++v)
        {
            views.push_back({{"azimuth", synthesis.set.views[v].camera.azimuth},
                {"origin", std::string(to_string(synthesis.set.origins[v]))}});
        }
        manifest["views"] = views;
        for (const StepRecord& step : synthesis.steps)
        {
            artifacts.push_back("view_" + azimuth_label(step.azimuth));
        }
        if (!options.quiet)
        {
            std::cerr << "synthesized " << synthesis.steps.size() << " views into " << out.run_dir.string() << '\n';
        }

        if (!options.views_only)
        {
            try
            {
                const auto fuse_start = Clock::now();
                FuseConfig fuse = config.fusion;
                if (fuse.checkpoint_every > 0)
                {
                    fuse.checkpoint_dir = out.run_dir / "checkpoints";
                }
                const FuseResult fused = optimize_texture(mesh, synthesis.set.views, fuse);
                timings["fusion_ms"] = Millis(fuse_start);
                out.textured_mesh = out.run_dir / "textured.obj";
                out.texture = out.run_dir / "textured.png";
                export_textured_mesh(mesh, fused.texture, *out.textured_mesh);
                write_loss_trace_csv(out.run_dir / "loss.csv", fused.trace);
                for (const char* name : {"textured.obj", "textured.mtl", "textured.png", "loss.csv"})
                {
                    artifacts.push_back(name);
                }
                if (fuse.checkpoint_every > 0)
                {
                    artifacts.push_back("checkpoints");
                }
            }
            catch (const std::exception& e)
            {
                fail(e);
                throw;
            }
        }
        manifest["status"] = "ok";
        manifest["artifacts"] = artifacts;
        timings["total_ms"] = Millis(start);
        manifest["timings"] = timings;
        WriteJson(out.manifest, manifest);
        if (!options.quiet)
        {
            std::cerr << "manifest: " << out.manifest.string() << '\n';
        }
        return out;
    }

    EvalOutcome cmd_eval(const EvalCommandOptions& options)
    {
        for (const auto& [path, what] : {std::pair{options.mesh, "mesh"}, std::pair{options.texture, "texture"}})
        {
            if (!fs::exists(path))
            {
                throw ConfigError(std::string(what) + " not found: " + path.string());
            }
        }
        const TriangleMesh mesh = load_mesh(options.mesh);
        const TextureMap texture = load_texture(options.texture);
        const auto truth = load_ground_truth_views(options.gt_dir);
        EvalOptions eval = options.eval;
        if (!truth.empty())
        {
            const ByteImage& any = truth.begin()->second;
            eval.render.width = any.width();
            eval.render.height = any.height();
        }
        const GroundTruthProvider provider = [&truth](double azimuth) {
            const double a = normalize_azimuth(azimuth);
            for (const auto& [key, image] : truth)
            {
                if (std::abs(key - a) < 1e-6)
                {
                    return image;
                }
            }
            throw Error("ground truth has no view at azimuth " + azimuth_label(a));
        };
        EvalOutcome outcome;
        outcome.report = turntable_eval(mesh, texture, provider, eval);
        if (options.report)
        {
            std::ofstream csv(*options.report);
            if (!csv)
            {
                throw Error("cannot write " + options.report->string());
            }
            write_report_csv(csv, outcome.report);
        }
        if ((options.min_psnr && outcome.report.mean_psnr < *options.min_psnr) ||
            (options.min_ssim && outcome.report.mean_ssim < *options.min_ssim))
        {
            outcome.exit_code = ExitThreshold;
        }
        return outcome;
    }

    namespace
    {
        int ServeMock(int port, const std::string& host, const std::string& gt_dir, bool fill)
        {
            if (gt_dir.empty() == !fill)
            {
                throw ConfigError("serve-mock needs exactly one of --gt-dir or --fill");
            }
            std::unique_ptr<InpaintBackend> backend;
            if (fill)
            {
                backend = std::make_unique<DiffuseFillBackend>();
            }
            else
            {
                backend = std::make_unique<OracleBackend>(load_ground_truth_views(gt_dir));
            }
            const std::string name = backend->id();
            MockServer server(std::move(backend), name);
            const int bound = server.bind(host, port);
            std::cout << "listening on http://" << host << ":" << bound << std::endl;
            server.listen();
            return ExitOk;
        }
    } // namespace

    int run_cli(int argc, char** argv)
    {
        CLI::App app{"Single-view mesh texturing: view synthesis, texture fusion and evaluation"};
        app.require_subcommand(1);

        GenMeshOptions gen;
        std::string gen_kind;
        std::string gen_pattern;
        std::string gen_out;
        auto* gen_cmd = app.add_subcommand("gen-mesh", "Write a test mesh, its texture and ground-truth views");
        gen_cmd->add_option("kind", gen_kind, "uv_sphere, cube or capsule")->required();
        gen_cmd->add_option("subdivision", gen.subdivision, "Tessellation level (>= 1)")->required();
        gen_cmd->add_option("pattern", gen_pattern, "checker, stripes or solid")->required();
        gen_cmd->add_option("--out", gen_out, "Output directory")->required();
        gen_cmd->add_option("--seed", gen.seed, "Texture color seed");
        gen_cmd->add_option("--texture-size", gen.texture_size, "Texture resolution");
        gen_cmd->add_option("--image-size", gen.image_size, "View resolution");
        gen_cmd->add_option("--turntable", gen.turntable_views, "Number of turntable views at 4 degree spacing");

        SynthesizeOptions syn;
        std::string syn_mesh, syn_input, syn_config, syn_manifest, syn_out, syn_guidance, syn_back;
        std::uint64_t syn_seed = 0;
        int syn_texture = 0;
        int syn_iterations = 0;
        auto* syn_cmd = app.add_subcommand("synthesize", "Synthesize the view set and fuse it into a texture");
        syn_cmd->add_option("--mesh", syn_mesh, "Input OBJ with UVs");
        syn_cmd->add_option("--input", syn_input, "Input view (azimuth 0) PNG");
        syn_cmd->add_option("--config", syn_config, "TOML run configuration");
        syn_cmd->add_option("--manifest", syn_manifest, "Re-run from a previous manifest.json");
        syn_cmd->add_option("--backend", syn.backend, "oracle:DIR, fill or remote:URL (default: remote:$TEXFUSE_BACKEND_URL)");
        auto* seed_opt = syn_cmd->add_option("--seed", syn_seed, "Base seed");
        syn_cmd->add_option("--out", syn_out, "Output directory")->required();
        syn_cmd->add_flag("--views-only", syn.views_only, "Stop after view synthesis");
        syn_cmd->add_flag("--no-back-init", syn.no_back_init, "Skip back-view initialization");
        syn_cmd->add_option("--guidance", syn_guidance, "none, normal, silhouette or both");
        syn_cmd->add_option("--back-view", syn_back, "Use this PNG as the initial back view");
        auto* tex_opt = syn_cmd->add_option("--texture-size", syn_texture, "Override fusion.texture_resolution");
        auto* it_opt = syn_cmd->add_option("--iterations", syn_iterations, "Override fusion.iterations");

        EvalCommandOptions ev;
        std::string ev_mesh, ev_texture, ev_gt, ev_report;
        double ev_min_psnr = 0.0;
        double ev_min_ssim = 0.0;
        auto* ev_cmd = app.add_subcommand("eval", "Score a textured mesh against ground-truth turntable views");
        ev_cmd->add_option("--mesh", ev_mesh, "Mesh OBJ")->required();
        ev_cmd->add_option("--texture", ev_texture, "Texture PNG")->required();
        ev_cmd->add_option("--gt-dir", ev_gt, "Directory of view_<azimuth>.png")->required();
        ev_cmd->add_option("--views", ev.eval.views, "Number of views");
        ev_cmd->add_option("--spacing", ev.eval.spacing, "Degrees between views");
        ev_cmd->add_flag("--masked", ev.eval.masked, "Score PSNR on the silhouette only");
        auto* psnr_opt = ev_cmd->add_option("--min-psnr", ev_min_psnr, "Fail when mean PSNR is lower");
        auto* ssim_opt = ev_cmd->add_option("--min-ssim", ev_min_ssim, "Fail when mean SSIM is lower");
        ev_cmd->add_option("--report", ev_report, "Write the per-view report as CSV");

        int mock_port = 8765;
        std::string mock_host = "127.0.0.1";
        std::string mock_gt;
        bool mock_fill = false;
        auto* mock_cmd = app.add_subcommand("serve-mock", "Serve the inpainting protocol from an oracle or fill backend");
        mock_cmd->add_option("--port", mock_port, "Port (0 picks a free one)");
        mock_cmd->add_option("--host", mock_host, "Bind address");
        mock_cmd->add_option("--gt-dir", mock_gt, "Ground-truth views for the oracle");
        mock_cmd->add_flag("--fill", mock_fill, "Use diffuse fill instead of an oracle");

        auto* cfg_cmd = app.add_subcommand("default-config", "Print the default configuration");

        try
        {
            app.parse(argc, argv);
        }
        catch (const CLI::ParseError& e)
        {
            const int code = app.exit(e);
            return code == 0 ? ExitOk : ExitUsage;
        }

        try
        {
            if (*gen_cmd)
            {
                gen.kind = parse_mesh_kind(gen_kind);
                gen.pattern = parse_texture_pattern(gen_pattern);
                gen.out = gen_out;
                const GenMeshOutputs out = cmd_gen_mesh(gen);
                std::cout << "wrote " << out.files.size() << " files to " << gen.out.string() << '\n';
                return ExitOk;
            }
            if (*syn_cmd)
            {
                syn.mesh = syn_mesh;
                syn.input = syn_input;
                if (!syn_config.empty())
                    syn.config = syn_config;
                if (!syn_manifest.empty())
                    syn.manifest = syn_manifest;
                if (seed_opt->count())
                    syn.seed = syn_seed;
                if (!syn_guidance.empty())
                    syn.guidance = syn_guidance;
                if (!syn_back.empty())
                    syn.back_view = syn_back;
                if (tex_opt->count())
                    syn.texture_size = syn_texture;
                if (it_opt->count())
                    syn.iterations = syn_iterations;
                syn.out = syn_out;
                const SynthesizeOutputs out = cmd_synthesize(syn);
                std::cout << out.run_dir.string() << '\n';
                return ExitOk;
            }
            if (*ev_cmd)
            {
                ev.mesh = ev_mesh;
                ev.texture = ev_texture;
                ev.gt_dir = ev_gt;
                if (psnr_opt->count())
                    ev.min_psnr = ev_min_psnr;
                if (ssim_opt->count())
                    ev.min_ssim = ev_min_ssim;
                if (!ev_report.empty())
                    ev.report = ev_report;
                const EvalOutcome outcome = cmd_eval(ev);
                std::cout << format_report_table(outcome.report);
                if (outcome.exit_code == ExitThreshold)
                {
                    std::cerr << "threshold violated\n";
                }
                return outcome.exit_code;
            }
            if (*mock_cmd)
            {
                return ServeMock(mock_port, mock_host, mock_gt, mock_fill);
            }
            if (*cfg_cmd)
            {
                std::cout << default_config_toml();
                return ExitOk;
            }
        }
        catch (const ConfigError& e)
        {
            std::cerr << "error: " << e.what() << '\n';
            return ExitUsage;
        }
        catch (const BackendError& e)
        {
            std::cerr << "backend error: " << e.what() << '\n';
            return ExitBackend;
        }
        catch (const std::exception& e)
        {
            std::cerr << "error: " << e.what() << '\n';
            return ExitRuntime;
        }
        return ExitUsage;
    }
} // namespace texfuse
