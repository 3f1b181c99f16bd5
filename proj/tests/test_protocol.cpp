#include <doctest.h>

#include "support.hpp"
#include "texfuse/mock_server.hpp"
#include "texfuse/protocol.hpp"

#include <httplib.h>

using namespace testing;
namespace proto = texfuse::protocol;

namespace
{
    std::vector<std::uint8_t> bytes(std::string_view s)
    {
        return {s.begin(), s.end()};
    }

    InpaintRequest sample_request(std::mt19937_64& rng, int w = 20, int h = 14)
    {
        InpaintRequest r;
        r.blended = to_bytes(random_image(w, h, 3, rng));
        r.known_mask = ByteImage(w, h, 1, 0);
        for (int y = 0; y < h; ++y)
        {
            for (int x = 0; x < w / 2; ++x)
            {
                r.known_mask.at(x, y) = 255;
            }
        }
        r.normal_map = to_bytes(random_image(w, h, 3, rng));
        r.silhouette = ByteImage(w, h, 1, 255);
        r.prompt = "a person, side view";
        r.negative_prompt = "blurry";
        r.seed = 0xFFFFFFFFFFFFFFF0ull;
        r.guidance_scale = 7.5;
        r.steps = 12;
        r.view_azimuth = -90.0;
        r.guidance = GuidanceMode::silhouette;
        return r;
    }

    std::map<double, ByteImage> oracle_views(std::mt19937_64& rng, int w = 20, int h = 14)
    {
        std::map<double, ByteImage> views;
        for (double az : {-90.0, 180.0})
        {
            views[az] = to_bytes(random_image(w, h, 3, rng));
        }
        return views;
    }

    struct RunningServer
    {
        explicit RunningServer(std::unique_ptr<InpaintBackend> backend)
            : server(std::move(backend), "test-model")
        {
            port = server.bind("127.0.0.1", 0);
            server.start();
        }
        std::string url() const
        {
            return "http://127.0.0.1:" + std::to_string(port);
        }

        MockServer server;
        int port = 0;
    };
} // namespace

TEST_CASE("base64 matches the standard test vectors")
{
    const std::vector<std::pair<std::string, std::string>> vectors = {{"", ""}, {"f", "Zg=="}, {"fo", "Zm8="},
        {"foo", "Zm9v"}, {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"}};
    for (const auto& [plain, encoded] : vectors)
    {
        CHECK(proto::base64_encode(bytes(plain)) == encoded);
        CHECK(proto::base64_decode(encoded) == bytes(plain));
    }
    CHECK_THROWS_AS(proto::base64_decode("Zm9"), MalformedResponse);
    CHECK_THROWS_AS(proto::base64_decode("Zm9*"), MalformedResponse);

    std::mt19937_64 rng(31);
    std::vector<std::uint8_t> blob(1000);
    for (auto& b : blob)
    {
        b = static_cast<std::uint8_t>(rng());
    }
    CHECK(proto::base64_decode(proto::base64_encode(blob)) == blob);
}

TEST_CASE("images survive the wire encoding")
{
    std::mt19937_64 rng(32);
    const ByteImage rgb = to_bytes(random_image(9, 5, 3, rng));
    CHECK(proto::decode_image(proto::encode_image(rgb), 3) == rgb);
    WordImage depth(7, 3, 1);
    for (auto& v : depth.data())
    {
        v = static_cast<std::uint16_t>(rng());
    }
    CHECK(proto::decode_image16(proto::encode_image(depth)) == depth);
    CHECK_THROWS_AS(proto::decode_image("AAAA", 3), MalformedResponse);
}

TEST_CASE("request and response JSON round-trip")
{
    std::mt19937_64 rng(33);
    const InpaintRequest r = sample_request(rng);
    const nlohmann::json j = proto::to_json(r);
    for (const char* key : {"image", "known_mask", "normal", "silhouette", "prompt", "negative_prompt", "seed",
             "guidance_scale", "steps", "azimuth"})
    {
        CHECK(j.contains(key));
    }
    const InpaintRequest back = proto::inpaint_request_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.blended == r.blended);
    CHECK(back.known_mask == r.known_mask);
    CHECK(back.normal_map == r.normal_map);
    CHECK(back.silhouette == r.silhouette);
    CHECK(back.prompt == r.prompt);
    CHECK(back.negative_prompt == r.negative_prompt);
    CHECK(back.seed == r.seed);
    CHECK(back.guidance_scale == r.guidance_scale);
    CHECK(back.steps == r.steps);
    CHECK(back.view_azimuth == r.view_azimuth);
    CHECK(back.guidance == r.guidance);

    BackViewRequest b;
    b.input_image = r.blended;
    b.normal_map = r.normal_map;
    b.depth = WordImage(20, 14, 1, 4242);
    b.silhouette = r.silhouette;
    b.prompt = "back";
    b.seed = 5;
    const BackViewRequest b2 = proto::backview_request_from_json(nlohmann::json::parse(proto::to_json(b).dump()));
    CHECK(b2.input_image == b.input_image);
    CHECK(b2.depth == b.depth);
    CHECK(b2.prompt == "back");
    CHECK(b2.seed == 5);

    InpaintResponse resp{r.blended, "x", 17};
    const InpaintResponse resp2 = proto::inpaint_response_from_json(proto::to_json(resp));
    CHECK(resp2.image == resp.image);
    CHECK(resp2.backend_id == "x");
    CHECK(resp2.elapsed_ms == 17);
}

TEST_CASE("malformed payloads name the offending field")
{
    std::mt19937_64 rng(34);
    const nlohmann::json good = proto::to_json(sample_request(rng));
    const auto message = [](const nlohmann::json& body) -> std::string {
        try
        {
            proto::inpaint_request_from_json(body);
        }
        catch (const MalformedResponse& e)
        {
            return e.what();
        }
        return "";
    };

    auto j = good;
    j.erase("prompt");
    CHECK(message(j).find("prompt") != std::string::npos);
    j = good;
    j["steps"] = "many";
    CHECK(message(j).find("steps") != std::string::npos);
    j = good;
    j["image"] = "not base64!";
    CHECK(message(j).find("image") != std::string::npos);
    j = good;
    j["seed"] = 1.5;
    CHECK(message(j).find("seed") != std::string::npos);
    j = good;
    j["guidance"] = "depth";
    CHECK_FALSE(message(j).empty());
    j = good;
    j.erase("negative_prompt");
    j.erase("guidance");
    CHECK(message(j).empty());

    CHECK_THROWS_AS(proto::inpaint_response_from_json(nlohmann::json{{"image", ""}}), MalformedResponse);
    CHECK_THROWS_AS(proto::backview_response_from_json(nlohmann::json::object()), MalformedResponse);
}

TEST_CASE("mock server speaks the HTTP protocol")
{
    std::mt19937_64 rng(35);
    const auto views = oracle_views(rng);
    RunningServer running(std::make_unique<OracleBackend>(views));
    httplib::Client client("127.0.0.1", running.port);

    const auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    const auto hj = nlohmann::json::parse(health->body);
    CHECK(hj["status"] == "ok");
    CHECK(hj["model"] == "test-model");

    const InpaintRequest r = sample_request(rng);
    const auto ok = client.Post("/inpaint", proto::to_json(r).dump(), "application/json");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    const InpaintResponse resp = proto::inpaint_response_from_json(nlohmann::json::parse(ok->body));
    CHECK(resp.backend_id == "oracle");
    CHECK(resp.elapsed_ms >= 0);
    for (std::size_t i = 0; i < resp.image.pixel_count(); ++i)
    {
        const ByteImage& expected = r.known_mask.data()[i] ? r.blended : views.at(-90.0);
        CHECK(std::equal(resp.image.pixel(i), resp.image.pixel(i) + 3, expected.pixel(i)));
    }

    const auto junk = client.Post("/inpaint", "{not json", "application/json");
    REQUIRE(junk);
    CHECK(junk->status == 400);

    auto missing = proto::to_json(r);
    missing.erase("known_mask");
    const auto bad_field = client.Post("/inpaint", missing.dump(), "application/json");
    REQUIRE(bad_field);
    CHECK(bad_field->status == 400);
    CHECK(bad_field->body.find("known_mask") != std::string::npos);

    auto mismatched = r;
    mismatched.silhouette = ByteImage(5, 5, 1, 255);
    const auto size = client.Post("/inpaint", proto::to_json(mismatched).dump(), "application/json");
    REQUIRE(size);
    CHECK(size->status == 422);

    auto unknown_view = r;
    unknown_view.view_azimuth = 45.0;
    const auto missing_view = client.Post("/inpaint", proto::to_json(unknown_view).dump(), "application/json");
    REQUIRE(missing_view);
    CHECK(missing_view->status == 503);

    BackViewRequest b;
    b.input_image = r.blended;
    b.normal_map = r.normal_map;
    b.depth = WordImage(20, 14, 1, 1);
    b.silhouette = r.silhouette;
    const auto back = client.Post("/backview", proto::to_json(b).dump(), "application/json");
    REQUIRE(back);
    CHECK(back->status == 200);
    CHECK(proto::backview_response_from_json(nlohmann::json::parse(back->body)) == views.at(180.0));

    b.depth = WordImage(3, 3, 1, 1);
    const auto back_bad = client.Post("/backview", proto::to_json(b).dump(), "application/json");
    REQUIRE(back_bad);
    CHECK(back_bad->status == 422);
}

TEST_CASE("mock server reports an unavailable model as 503")
{
    RunningServer running(std::make_unique<DownBackend>());
    httplib::Client client("127.0.0.1", running.port);
    std::mt19937_64 rng(36);
    const auto res = client.Post("/inpaint", proto::to_json(sample_request(rng)).dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 503);

    RemoteBackend remote(running.url(), 5000, 0);
    try
    {
        remote.inpaint(sample_request(rng));
        FAIL("expected a status error");
    }
    catch (const BackendStatusError& e)
    {
        CHECK(e.status() == 503);
    }
}

TEST_CASE("remote backend round-trips through the mock server")
{
    std::mt19937_64 rng(37);
    const auto views = oracle_views(rng);
    RunningServer running(std::make_unique<OracleBackend>(views));
    RemoteBackend remote(running.url(), 10000, 1);
    CHECK(remote.health() == "test-model");
    CHECK(remote.id() == "remote:" + running.url());

    const InpaintRequest r = sample_request(rng);
    OracleBackend local(views);
    const InpaintResponse via_http = inpaint(r, remote);
    CHECK(via_http.image == inpaint(r, local).image);
    CHECK(inpaint(r, remote).image == via_http.image);

    BackViewRequest b;
    b.input_image = r.blended;
    b.normal_map = r.normal_map;
    b.depth = WordImage(20, 14, 1, 1);
    b.silhouette = r.silhouette;
    CHECK(remote.back_view(b) == views.at(180.0));
}

TEST_CASE("remote backend against a closed port is unavailable")
{
    int port = 0;
    {
        RunningServer probe(std::make_unique<DownBackend>());
        port = probe.port;
    }
    RemoteBackend remote("http://127.0.0.1:" + std::to_string(port), 2000, 1);
    std::mt19937_64 rng(38);
    CHECK_THROWS_AS(remote.inpaint(sample_request(rng)), BackendUnavailable);
    CHECK_THROWS_AS(remote.health(), BackendUnavailable);
    CHECK_THROWS_AS(RemoteBackend("ftp://host", 1000, 0), ConfigError);
}
