#include <doctest.h>

#include <fstream>
#include <numeric>

#include "support.hpp"
#include "texfuse/metrics.hpp"
#include "texfuse/texture_fuse.hpp"

using namespace testing;

namespace
{
    double relative_error(double a, double b)
    {
        const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
        return std::abs(a - b) / scale;
    }

    TextureMap random_texture(int w, int h, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0)
    {
        return TextureMap(random_image(w, h, 3, rng, lo, hi));
    }

    std::vector<SupportView> rendered_views(const TriangleMesh& mesh, const TextureMap& truth,
        const std::vector<double>& azimuths, int size)
    {
        std::vector<SupportView> views;
        for (double az : azimuths)
        {
            const Camera cam = make_turntable_camera(az, square(size));
            views.push_back(make_support_view(mesh, cam, render_textured(mesh, truth, cam)));
        }
        return views;
    }

    // Central differences of the objective total over every texel channel.
    double max_fd_error(const FusionObjective& objective, const TextureMap& texture, double h = 1e-3)
    {
        const RealImage analytic = objective.evaluate(texture).gradient;
        TextureMap probe = texture;
        double worst = 0.0;
        auto values = probe.texels().data();
        for (std::size_t i = 0; i < values.size(); ++i)
        {
            const double saved = values[i];
            values[i] = saved + h;
            const double up = objective.evaluate(probe).total;
            values[i] = saved - h;
            const double down = objective.evaluate(probe).total;
            values[i] = saved;
            worst = std::max(worst, relative_error(analytic.data()[i], (up - down) / (2 * h)));
        }
        return worst;
    }

    Mask full_mask(int w, int h)
    {
        return Mask(w, h, 1, 1);
    }

    // Texels reached by any bilinear tap with nonzero weight.
    Mask footprint(std::span<const SupportView> views, int w, int h)
    {
        Mask out(w, h, 1, 0);
        for (const SupportView& v : views)
        {
            const SamplePlan plan = build_sample_plan(*v.buffers, w, h);
            for (const BilinearTaps& t : plan.taps)
            {
                for (int k = 0; k < 4; ++k)
                {
                    if (t.weight[k] != 0.0)
                    {
                        out.data()[t.index[k]] = 1;
                    }
                }
            }
        }
        return out;
    }
} // namespace

TEST_CASE("sample plan renders like the rasterizer")
{
    std::mt19937_64 rng(41);
    const TriangleMesh mesh = generate_test_mesh(MeshKind::uv_sphere, 12);
    const TextureMap tex = random_texture(24, 16, rng);
    const Camera cam = make_turntable_camera(35.0, square(48));
    const ViewBuffers buf = rasterize(mesh, cam);
    CHECK(max_abs_diff(render_plan(build_sample_plan(buf, 24, 16), tex), render_textured(buf, tex)) < 1e-12);
}

TEST_CASE("render gradient: zero upstream and single-texel footprint")
{
    RenderSettings s = square(4);
    s.scale = 2.0; // pixel centers land exactly on texel centers of a 4x4 map
    const Camera cam = make_turntable_camera(0.0, s);
    const TriangleMesh quad = front_quad();
    std::mt19937_64 rng(42);
    const TextureMap tex = random_texture(4, 4, rng);

    const RenderGradient zero = render_with_gradient(quad, tex, cam, RealImage(4, 4, 3, 0.0));
    CHECK(std::all_of(zero.texture_gradient.data().begin(), zero.texture_gradient.data().end(),
        [](double v) { return v == 0.0; }));
    CHECK(max_abs_diff(zero.image, render_textured(quad, tex, cam)) == 0.0);
    CHECK(max_abs_diff(zero.image, tex.texels()) < 1e-12);

    RealImage upstream(4, 4, 3, 0.0);
    upstream.at(1, 2, 0) = 1.0;
    const RenderGradient one = render_with_gradient(quad, tex, cam, upstream);
    for (int y = 0; y < 4; ++y)
    {
        for (int x = 0; x < 4; ++x)
        {
            for (int c = 0; c < 3; ++c)
            {
                const double expected = (x == 1 && y == 2 && c == 0) ? 1.0 : 0.0;
                CHECK(one.texture_gradient.at(x, y, c) == doctest::Approx(expected).epsilon(1e-12));
            }
        }
    }
    CHECK_THROWS(render_with_gradient(quad, tex, cam, RealImage(3, 4, 3, 0.0)));
}

TEST_CASE("render gradient matches finite differences of a linear functional")
{
    std::mt19937_64 rng(43);
    const TriangleMesh mesh = generate_test_mesh(MeshKind::uv_sphere, 6);
    TextureMap tex = random_texture(8, 8, rng);
    const Camera cam = make_turntable_camera(-20.0, square(24));
    const RealImage upstream = random_image(24, 24, 3, rng, -1.0, 1.0);
    const RealImage grad = render_with_gradient(mesh, tex, cam, upstream).texture_gradient;
    const auto functional = [&](const TextureMap& t) {
        const RealImage img = render_textured(mesh, t, cam);
        return std::inner_product(img.data().begin(), img.data().end(), upstream.data().begin(), 0.0);
    };
    double worst = 0.0;
    auto values = tex.texels().data();
    for (std::size_t i = 0; i < values.size(); ++i)
    {
        const double saved = values[i];
        values[i] = saved + 1e-3;
        const double up = functional(tex);
        values[i] = saved - 1e-3;
        const double down = functional(tex);
        values[i] = saved;
        worst = std::max(worst, relative_error(grad.data()[i], (up - down) / 2e-3));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("l1 loss examples and brute-force agreement")
{
    std::mt19937_64 rng(44);
    const RealImage a = random_image(10, 7, 3, rng);
    const LossValue same = l1_loss(a, a, full_mask(10, 7));
    CHECK(same.value == 0.0);
    CHECK(std::all_of(same.gradient.data().begin(), same.gradient.data().end(), [](double v) { return v == 0.0; }));

    RealImage shifted = a;
    for (double& v : shifted.data())
    {
        v += 0.5;
    }
    CHECK(l1_loss(shifted, a, full_mask(10, 7)).value == doctest::Approx(0.5).epsilon(1e-12));

    const RealImage b = random_image(10, 7, 3, rng);
    const Mask m = random_mask(10, 7, 0.6, rng);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < m.pixel_count(); ++i)
    {
        if (m.data()[i])
        {
            for (int c = 0; c < 3; ++c)
            {
                sum += std::abs(a.pixel(i)[c] - b.pixel(i)[c]);
                ++count;
            }
        }
    }
    const LossValue l = l1_loss(a, b, m);
    CHECK(std::abs(l.value - sum / double(count)) < 1e-7);
    for (std::size_t i = 0; i < m.pixel_count(); ++i)
    {
        for (int c = 0; c < 3; ++c)
        {
            const double d = a.pixel(i)[c] - b.pixel(i)[c];
            const double expected = m.data()[i] ? ((d > 0) - (d < 0)) / double(count) : 0.0;
            CHECK(l.gradient.pixel(i)[c] == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("pyramid proxy examples")
{
    std::mt19937_64 rng(45);
    const RealImage b = random_image(8, 8, 3, rng, 0.3, 0.7);
    CHECK(perceptual_proxy_loss(b, b, full_mask(8, 8)).value == 0.0);

    RealImage a = b;
    for (int y = 0; y < 8; ++y)
    {
        for (int x = 0; x < 8; ++x)
        {
            for (int c = 0; c < 3; ++c)
            {
                a.at(x, y, c) += ((x + y) % 2 ? 0.1 : -0.1);
            }
        }
    }
    const double plain = l1_loss(a, b, full_mask(8, 8)).value;
    const double proxy = perceptual_proxy_loss(a, b, full_mask(8, 8)).value;
    CHECK(proxy < plain);

    CHECK(effective_levels(512, 512, 4) == 4);
    CHECK(effective_levels(8, 8, 4) == 3);
    CHECK(effective_levels(1, 1, 4) == 1);

    // Single level without blur is plain L1.
    const RealImage c = random_image(8, 8, 3, rng);
    const Mask m = random_mask(8, 8, 0.5, rng);
    const LossValue p1 = perceptual_proxy_loss(c, b, m, {1, false});
    const LossValue l1 = l1_loss(c, b, m);
    CHECK(p1.value == doctest::Approx(l1.value).epsilon(1e-12));
    CHECK(max_abs_diff(p1.gradient, l1.gradient) < 1e-12);
}

TEST_CASE("pyramid proxy gradient matches finite differences")
{
    std::mt19937_64 rng(46);
    const RealImage b = random_image(16, 16, 3, rng, 0.0, 0.5);
    RealImage a = b;
    const RealImage offset = random_image(16, 16, 3, rng, 0.05, 0.5);
    for (std::size_t i = 0; i < a.data().size(); ++i)
    {
        a.data()[i] += offset.data()[i];
    }
    const Mask m = random_mask(16, 16, 0.7, rng);
    const RealImage g = perceptual_proxy_loss(a, b, m).gradient;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
    {
        RealImage up = a;
        RealImage down = a;
        up.data()[i] += 1e-3;
        down.data()[i] -= 1e-3;
        const double fd = (perceptual_proxy_loss(up, b, m).value - perceptual_proxy_loss(down, b, m).value) / 2e-3;
        worst = std::max(worst, relative_error(g.data()[i], fd));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("full objective gradient matches central finite differences")
{
    std::mt19937_64 rng(47);
    const TriangleMesh mesh = generate_test_mesh(MeshKind::uv_sphere, 8);

    SUBCASE("proxy pyramid plus weighted L1, several views")
    {
        // Targets brighter than any render keep every residual one-signed.
        const TextureMap truth = random_texture(16, 16, rng, 0.7, 1.0);
        const auto views = rendered_views(mesh, truth, {0.0, 60.0, -120.0}, 32);
        const FusionObjective objective(views, 16, 16, 10.0);
        CHECK(max_fd_error(objective, random_texture(16, 16, rng, 0.05, 0.45)) < 1e-4);
    }
    SUBCASE("mixed-sign residuals on the finest level")
    {
        const TextureMap start = random_texture(12, 12, rng, 0.3, 0.7);
        auto views = rendered_views(mesh, start, {15.0, -75.0}, 24);
        std::bernoulli_distribution coin(0.5);
        std::uniform_real_distribution<double> gap(0.1, 0.25);
        for (SupportView& v : views)
        {
            for (double& x : v.image.data())
            {
                x += coin(rng) ? gap(rng) : -gap(rng);
            }
        }
        const FusionObjective objective(views, 12, 12, 10.0, {1, false});
        CHECK(max_fd_error(objective, start) < 1e-4);
    }
}

TEST_CASE("objective with lambda 0 and a bare single level is the masked L1")
{
    std::mt19937_64 rng(48);
    const TriangleMesh mesh = generate_test_mesh(MeshKind::uv_sphere, 8);
    const TextureMap truth = random_texture(16, 16, rng);
    const auto views = rendered_views(mesh, truth, {0.0, 90.0}, 32);
    const FusionObjective objective(views, 16, 16, 0.0, {1, false});
    const TextureMap tex = random_texture(16, 16, rng);
    const FusionObjective::Evaluation e = objective.evaluate(tex);

    double total = 0.0;
    RealImage grad(16, 16, 3, 0.0);
    for (std::size_t v = 0; v < views.size(); ++v)
    {
        const RealImage rendered = render_textured(*views[v].buffers, tex);
        const LossValue l = l1_loss(rendered, views[v].image, silhouette_mask(*views[v].buffers));
        CHECK(e.per_view[v] == doctest::Approx(l.value).epsilon(1e-12));
        total += l.value;
        accumulate_texture_gradient(build_sample_plan(*views[v].buffers, 16, 16), l.gradient, grad);
    }
    CHECK(e.total == doctest::Approx(total).epsilon(1e-12));
    CHECK(max_abs_diff(e.gradient, grad) < 1e-12);
}

TEST_CASE("adam: bias-corrected first step on x squared")
{
    std::vector<double> x{1.0};
    OptState state(1, AdamParams{});
    const std::vector<double> g{2.0 * x[0]};
    adam_step(x, g, state);
    CHECK(state.step == 1);
    CHECK(std::abs(x[0] - 0.9) < 1e-6);
    // Hand evaluation: m = 0.2, v = 0.004; m_hat = 2, v_hat = 4.
    CHECK(state.first_moment[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(state.second_moment[0] == doctest::Approx(0.004).epsilon(1e-12));
    CHECK(x[0] == doctest::Approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-15));
}

TEST_CASE("adam: zero gradient, equal gradients and clamping")
{
    std::mt19937_64 rng(49);
    TextureMap tex = random_texture(4, 4, rng);
    const TextureMap before = tex;
    OptState state(tex.texels().data().size(), AdamParams{});
    adam_step(tex, RealImage(4, 4, 3, 0.0), state);
    CHECK(state.step == 1);
    CHECK(tex.texels() == before.texels());

    TextureMap twins(2, 1, 0.5);
    OptState twin_state(6, AdamParams{});
    RealImage g(2, 1, 3, 0.3);
    for (int i = 0; i < 5; ++i)
    {
        adam_step(twins, g, twin_state);
    }
    CHECK(twins.texels().at(0, 0, 0) == twins.texels().at(1, 0, 2));
    CHECK(twins.texels().at(0, 0, 0) < 0.5);

    TextureMap edge(1, 1, 0.02);
    OptState edge_state(3, AdamParams{});
    adam_step(edge, RealImage(1, 1, 3, 1.0), edge_state);
    CHECK(edge.texels().at(0, 0, 0) == 0.0);

    std::vector<double> x{0.0};
    OptState free_state(1, AdamParams{});
    const std::vector<double> up{1.0};
    adam_step(x, up, free_state);
    CHECK(x[0] < 0.0);
}

TEST_CASE("single-view fit from gray reaches 40 dB on the silhouette")
{
    std::mt19937_64 rng(50);
    const TriangleMesh mesh = generate_test_mesh(MeshKind::uv_sphere, 16);
    const TextureMap truth = random_texture(32, 32, rng);
    const auto views = rendered_views(mesh, truth, {30.0}, 64);
    FuseConfig config;
    config.resolution = 32;
    config.bake_init = false;
    const FuseResult r = optimize_texture(mesh, views, config);
    REQUIRE(r.trace.size() == 400);
    const RealImage fitted = render_textured(*views[0].buffers, r.texture);
    const Mask sil = silhouette_mask(*views[0].buffers);
    CHECK(psnr(fitted, views[0].image, &sil) >= 40.0);
    for (const LossRecord& rec : r.trace)
    {
        CHECK(std::isfinite(rec.total));
    }
    CHECK(r.trace.back().total <= r.trace.front().total);

    // Texels outside every footprint are still at the initial gray.
    const Mask touched = footprint(views, 32, 32);
    std::size_t untouched = 0;
    for (std::size_t i = 0; i < touched.pixel_count(); ++i)
    {
        if (!touched.data()[i])
        {
            ++untouched;
            for (int c = 0; c < 3; ++c)
            {
                CHECK(r.texture.texels().pixel(i)[c] == 0.5);
            }
        }
    }
    CHECK(untouched > 0);
}

TEST_CASE("multi-view fit from gray: trace finite and decreasing end to end")
{
    std::mt19937_64 rng(51);
    const TriangleMesh mesh = generate_test_mesh(MeshKind::uv_sphere, 16);
    const TextureMap truth = random_texture(32, 32, rng);
    const auto views = rendered_views(mesh, truth, {0.0, 45.0, -45.0, 90.0, -90.0, 135.0, -135.0, 180.0}, 64);
    FuseConfig config;
    config.resolution = 32;
    config.bake_init = false;
    const FuseResult r = optimize_texture(mesh, views, config);
    REQUIRE(r.trace.size() == 400);
    for (const LossRecord& rec : r.trace)
    {
        CHECK(std::isfinite(rec.total));
        CHECK(rec.per_view.size() == 8);
        CHECK(rec.total == doctest::Approx(std::accumulate(rec.per_view.begin(), rec.per_view.end(), 0.0)).epsilon(1e-12));
    }
    CHECK(r.trace.back().total <= r.trace.front().total);
    for (const SupportView& v : views)
    {
        const Mask sil = silhouette_mask(*v.buffers);
        CHECK(psnr(render_textured(*v.buffers, r.texture), v.image, &sil) >= 30.0);
    }
}

TEST_CASE("zero iterations return the initialization; no views is an error")
{
    std::mt19937_64 rng(52);
    const TriangleMesh mesh = generate_test_mesh(MeshKind::uv_sphere, 8);
    const TextureMap init = random_texture(8, 8, rng);
    const auto views = rendered_views(mesh, init, {0.0}, 16);
    FuseConfig config;
    config.iterations = 0;
    const FuseResult r = optimize_texture(mesh, views, config, &init);
    CHECK(r.texture.texels() == init.texels());
    CHECK(r.trace.empty());
    CHECK_THROWS(optimize_texture(mesh, std::span<const SupportView>(), config));
}

TEST_CASE("checkpoints and loss trace files")
{
    TempDir dir("fuse");
    std::mt19937_64 rng(53);
    const TriangleMesh mesh = generate_test_mesh(MeshKind::uv_sphere, 8);
    const auto views = rendered_views(mesh, random_texture(8, 8, rng), {0.0, 90.0}, 16);
    FuseConfig config;
    config.iterations = 6;
    config.resolution = 8;
    config.checkpoint_every = 3;
    config.checkpoint_dir = dir.path() / "ck";
    const FuseResult r = optimize_texture(mesh, views, config);
    CHECK(std::filesystem::exists(dir.path() / "ck" / "texture_00003.png"));
    CHECK(std::filesystem::exists(dir.path() / "ck" / "texture_00006.png"));
    CHECK_FALSE(std::filesystem::exists(dir.path() / "ck" / "texture_00004.png"));

    write_loss_trace_csv(dir.path() / "loss.csv", r.trace);
    std::ifstream in(dir.path() / "loss.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "iteration,view_0,view_1,total");
    int rows = 0;
    while (std::getline(in, line))
    {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 3);
    }
    CHECK(rows == 6);
}

TEST_CASE("baking: single frontal view matches per-texel reprojection")
{
    std::mt19937_64 rng(54);
    const TriangleMesh quad = front_quad();
    const Camera cam = make_turntable_camera(0.0, square(64));
    const RealImage image = random_image(64, 64, 3, rng);
    const std::vector<SupportView> one{make_support_view(quad, cam, image)};
    const TextureMap baked = bake_initial_texture(quad, one, 16, 16);
    for (int ty = 0; ty < 16; ++ty)
    {
        for (int tx = 0; tx < 16; ++tx)
        {
            const double u = (tx + 0.5) / 16.0;
            const double v = 1.0 - (ty + 0.5) / 16.0;
            const Eigen::Vector2d p = cam.project(Eigen::Vector3d(2 * u - 1, 2 * v - 1, 0.0));
            const Eigen::Vector3d expected = sample_rgb(image, p.x(), p.y());
            for (int c = 0; c < 3; ++c)
            {
                CHECK(baked.texels().at(tx, ty, c) == doctest::Approx(expected[c]).epsilon(1e-9));
            }
        }
    }
    CHECK(count_nonzero(observed_texels(quad, one, 16, 16)) == 256);

    const std::vector<SupportView> two{one[0], one[0]};
    CHECK(max_abs_diff(bake_initial_texture(quad, two, 16, 16).texels(), baked.texels()) < 1e-12);

    const TextureMap none = bake_initial_texture(quad, std::span<const SupportView>(), 8, 8);
    CHECK(std::all_of(none.texels().data().begin(), none.texels().data().end(), [](double x) { return x == 0.5; }));

    // Seen from behind, the quad's front texels are still the texels it covers.
    const std::vector<SupportView> back{make_support_view(quad, make_turntable_camera(180.0, square(64)), image)};
    CHECK(count_nonzero(observed_texels(quad, back, 16, 16)) == 256);
}

TEST_CASE("baking leaves unobserved texels gray")
{
    std::mt19937_64 rng(55);
    const TriangleMesh mesh = generate_test_mesh(MeshKind::uv_sphere, 16);
    const auto views = rendered_views(mesh, random_texture(32, 32, rng), {0.0}, 64);
    const TextureMap baked = bake_initial_texture(mesh, views, 32, 32);
    const Mask seen = observed_texels(mesh, views, 32, 32);
    CHECK(count_nonzero(seen) > 0);
    CHECK(count_nonzero(seen) < seen.pixel_count());
    for (std::size_t i = 0; i < seen.pixel_count(); ++i)
    {
        if (!seen.data()[i])
        {
            CHECK(baked.texels().pixel(i)[0] == 0.5);
        }
    }
}

TEST_CASE("export round-trips within 8-bit quantization")
{
    TempDir dir("export");
    std::mt19937_64 rng(56);
    const TriangleMesh mesh = generate_test_mesh(MeshKind::uv_sphere, 10);
    const TextureMap tex = random_texture(32, 32, rng);
    export_textured_mesh(mesh, tex, dir.path() / "out" / "model.obj");
    CHECK(std::filesystem::exists(dir.path() / "out" / "model.mtl"));
    CHECK(std::filesystem::exists(dir.path() / "out" / "model.png"));

    std::ifstream mtl(dir.path() / "out" / "model.mtl");
    const std::string text((std::istreambuf_iterator<char>(mtl)), std::istreambuf_iterator<char>());
    CHECK(text.find("map_Kd model.png") != std::string::npos);

    const TriangleMesh back = load_mesh(dir.path() / "out" / "model.obj");
    const TextureMap tex_back = load_texture(dir.path() / "out" / "model.png");
    for (double az : {0.0, 70.0, -145.0})
    {
        const Camera cam = make_turntable_camera(az, square(64));
        CHECK(max_abs_diff(render_textured(back, tex_back, cam), render_textured(mesh, tex, cam)) <= 1.0 / 255.0 + 1e-9);
    }
}
