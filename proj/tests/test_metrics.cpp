#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "texfuse/metrics.hpp"

using namespace testing;

TEST_CASE("psnr: identical images cap and uniform 0.1 difference is 20 dB")
{
    std::mt19937_64 rng(61);
    const RealImage a = random_image(17, 13, 3, rng, 0.0, 0.9);
    CHECK(psnr(a, a) == PsnrCap);
    RealImage b = a;
    for (double& v : b.data())
    {
        v += 0.1;
    }
    CHECK(std::abs(psnr(a, b) - 20.0) < 1e-6);
    CHECK(std::abs(psnr(b, a) - 20.0) < 1e-6);
}

TEST_CASE("psnr and mse match brute force on random fixtures")
{
    std::mt19937_64 rng(62);
    for (int trial = 0; trial < 20; ++trial)
    {
        const RealImage a = random_image(23, 19, 3, rng);
        const RealImage b = random_image(23, 19, 3, rng);
        CHECK(std::abs(psnr(a, b) - brute_force_psnr(a, b)) < 1e-6);
    }

    const RealImage a = random_image(8, 8, 3, rng);
    RealImage b = a;
    const Mask m = random_mask(8, 8, 0.5, rng);
    for (std::size_t i = 0; i < m.pixel_count(); ++i)
    {
        if (!m.data()[i])
        {
            b.pixel(i)[0] = 1.0 - a.pixel(i)[0];
        }
    }
    CHECK(psnr(a, b, &m) == PsnrCap);
    CHECK(mean_squared_error(a, b, &m) == 0.0);
    const Mask none(8, 8, 1, 0);
    CHECK_THROWS(mean_squared_error(a, b, &none));
    CHECK_THROWS(psnr(a, RealImage(4, 4, 3)));
}

TEST_CASE("ssim: identity, range, symmetry and brute-force agreement")
{
    std::mt19937_64 rng(63);
    const RealImage a = random_image(24, 20, 3, rng);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    for (int trial = 0; trial < 5; ++trial)
    {
        const RealImage x = random_image(24, 20, 3, rng);
        RealImage y = x;
        const RealImage noise = random_image(24, 20, 3, rng, -0.2, 0.2);
        for (std::size_t i = 0; i < y.data().size(); ++i)
        {
            y.data()[i] = std::clamp(y.data()[i] + noise.data()[i], 0.0, 1.0);
        }
        const double s = ssim(x, y);
        CHECK(std::abs(s - brute_force_ssim(x, y)) < 1e-6);
        CHECK(s == doctest::Approx(ssim(y, x)).epsilon(1e-12));
        CHECK(s <= 1.0);
        CHECK(s >= -1.0);
    }
    CHECK(ssim(RealImage(16, 16, 3, 0.0), RealImage(16, 16, 3, 1.0)) < 0.01);
    CHECK_THROWS(ssim(RealImage(10, 30, 3, 0.0), RealImage(10, 30, 3, 0.0)));
}

TEST_CASE("luma weights")
{
    RealImage px(1, 1, 3);
    px.at(0, 0, 0) = 1.0;
    CHECK(luma(px).at(0, 0) == doctest::Approx(0.299));
    px.at(0, 0, 0) = 0.0;
    px.at(0, 0, 1) = 1.0;
    CHECK(luma(px).at(0, 0) == doctest::Approx(0.587));
}

TEST_CASE("turntable azimuths")
{
    const auto az = turntable_azimuths(90, 4.0);
    REQUIRE(az.size() == 90);
    CHECK(az.front() == 0.0);
    CHECK(az.back() == 356.0);
    CHECK(turntable_azimuths(8, 45.0)[3] == 135.0);
}

TEST_CASE("turntable evaluation against the renderer itself")
{
    std::mt19937_64 rng(64);
    const TriangleMesh mesh = generate_test_mesh(MeshKind::uv_sphere, 12);
    const TextureMap tex(random_image(32, 32, 3, rng));
    EvalOptions options;
    options.views = 6;
    options.spacing = 60.0;
    options.render = square(48);
    const auto truth = [&](double az) {
        return to_bytes(render_textured(mesh, tex, make_turntable_camera(az, options.render)));
    };
    const EvalReport self = turntable_eval(mesh, tex, truth, options);
    REQUIRE(self.rows.size() == 6);
    CHECK(self.mean_psnr == PsnrCap);
    CHECK(self.mean_ssim == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(self.rows[2].azimuth == 120.0);

    // A texture offset by 0.1 (no clamping) leaves the masked PSNR near 20 dB.
    TextureMap dimmer(random_image(32, 32, 3, rng, 0.2, 0.9));
    TextureMap brighter = dimmer;
    for (double& v : brighter.texels().data())
    {
        v += 0.1;
    }
    options.masked = true;
    const auto truth2 = [&](double az) {
        return to_bytes(render_textured(mesh, dimmer, make_turntable_camera(az, options.render)));
    };
    const EvalReport shifted = turntable_eval(mesh, brighter, truth2, options);
    for (const EvalRow& row : shifted.rows)
    {
        CHECK(row.psnr == doctest::Approx(20.0).epsilon(0.01));
    }

    const auto wrong = [](double) { return ByteImage(8, 8, 3, 0); };
    CHECK_THROWS(turntable_eval(mesh, tex, wrong, options));
}

TEST_CASE("report csv and table")
{
    EvalReport r;
    r.rows = {{0.0, 30.5, 0.9}, {4.0, 28.25, 0.85}};
    r.mean_psnr = 29.375;
    r.mean_ssim = 0.875;
    std::ostringstream out;
    write_report_csv(out, r);
    CHECK(out.str() == "azimuth,psnr,ssim,lpips,fid,clip\n0,30.500000,0.900000,,,\n4,28.250000,0.850000,,,\n");
    const std::string table = format_report_table(r);
    CHECK(table.find("29.375") != std::string::npos);
}
