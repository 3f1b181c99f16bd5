#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "texfuse/config.hpp"
#include "texfuse/inpaint.hpp"
#include "texfuse/mesh.hpp"
#include "texfuse/metrics.hpp"
#include "texfuse/texture_map.hpp"

namespace texfuse
{
    enum ExitCode : int
    {
        ExitOk = 0,
        ExitRuntime = 1,
        ExitUsage = 2,
        ExitThreshold = 3,
        ExitBackend = 4,
    };

    enum class TexturePattern
    {
        checker,
        stripes,
        solid,
    };

    TexturePattern parse_texture_pattern(std::string_view name);

    // 8x8 checker, 16 vertical stripes or a flat color; colors derive from the seed.
    TextureMap make_pattern_texture(TexturePattern pattern, int size, std::uint64_t seed);

    struct GenMeshOptions
    {
        MeshKind kind = MeshKind::uv_sphere;
        int subdivision = 16;
        TexturePattern pattern = TexturePattern::checker;
        std::filesystem::path out;
        std::uint64_t seed = 0;
        int texture_size = 256;
        int image_size = 512;
        int turntable_views = 90;
        double turntable_spacing = 4.0;
    };

    struct GenMeshOutputs
    {
        std::filesystem::path mesh;
        std::filesystem::path texture;
        std::filesystem::path views_dir;
        std::vector<std::filesystem::path> files;
    };

    // Writes mesh.obj, texture.png and views/view_<az>.png (schedule views and
    // the turntable sweep), rendered from the re-imported files.
    GenMeshOutputs cmd_gen_mesh(const GenMeshOptions& options);

    // "oracle:DIR", "fill" or "remote:URL"; empty falls back to TEXFUSE_BACKEND_URL.
    std::unique_ptr<InpaintBackend> make_backend(const std::string& selector, const RemoteSettings& remote = {});

    struct SynthesizeOptions
    {
        std::filesystem::path mesh;
        std::filesystem::path input;
        std::optional<std::filesystem::path> config;
        std::optional<std::filesystem::path> manifest;
        std::string backend;
        std::optional<std::uint64_t> seed;
        std::filesystem::path out;
        bool views_only = false;
        bool no_back_init = false;
        std::optional<std::string> guidance;
        std::optional<std::filesystem::path> back_view;
        std::optional<int> texture_size;
        std::optional<int> iterations;
        bool quiet = false;
    };

    struct SynthesizeOutputs
    {
        std::filesystem::path run_dir;
        std::filesystem::path manifest;
        std::optional<std::filesystem::path> textured_mesh;
        std::optional<std::filesystem::path> texture;
    };

    SynthesizeOutputs cmd_synthesize(const SynthesizeOptions& options);

    struct EvalCommandOptions
    {
        std::filesystem::path mesh;
        std::filesystem::path texture;
        std::filesystem::path gt_dir;
        EvalOptions eval;
        std::optional<double> min_psnr;
        std::optional<double> min_ssim;
        std::optional<std::filesystem::path> report;
    };

    struct EvalOutcome
    {
        EvalReport report;
        int exit_code = ExitOk;
    };

    EvalOutcome cmd_eval(const EvalCommandOptions& options);

    // Entry point of the texfuse executable.
    int run_cli(int argc, char** argv);
} // namespace texfuse
