#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "restage/bundle_io.hpp"
#include "restage/config.hpp"
#include "restage/synth.hpp"

using namespace restage;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("restage_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

SequenceBundle sample_bundle() {
    SceneSpec spec;
    spec.kind = SceneKind::ClusterSwarm;
    spec.num_points = 40;
    spec.frames = 6;
    spec.background_points = 14;
    spec.noise_sigma = 0.01;
    spec.seed = 31;
    return gen_scene(spec).first;
}

}  // namespace

TEST_CASE("bundle write/read round trip is bit-exact") {
    SequenceBundle bundle = sample_bundle();
    fs::path d1 = temp_dir("rt1"), d2 = temp_dir("rt2");
    write_bundle(bundle, d1);
    SequenceBundle back = read_bundle(d1);
    write_bundle(back, d2);

    for (const char* name : {"manifest.json", "tracks.f32", "visibility.u8", "labels.u8",
                             "colors.f32"})
        CHECK(slurp(d1 / name) == slurp(d2 / name));

    CHECK(back.num_tracks == bundle.num_tracks);
    CHECK(back.num_frames == bundle.num_frames);
    CHECK(back.t1 == bundle.t1);
    for (std::size_t i = 0; i < bundle.positions.size(); ++i)
        CHECK(back.positions[i] == bundle.positions[i]);
    CHECK(back.visibility == bundle.visibility);
    CHECK(back.labels == bundle.labels);
}

TEST_CASE("bundle reader reports byte-count and version problems") {
    SequenceBundle bundle = sample_bundle();
    fs::path dir = temp_dir("err");
    write_bundle(bundle, dir);

    SUBCASE("truncated array names expected and actual byte counts") {
        fs::resize_file(dir / "tracks.f32", 100);
        try {
            read_bundle(dir);
            CHECK(false);
        } catch (const std::runtime_error& e) {
            std::string msg = e.what();
            CHECK(msg.find("expected") != std::string::npos);
            CHECK(msg.find("100") != std::string::npos);
        }
    }
    SUBCASE("version mismatch is rejected") {
        std::string manifest = slurp(dir / "manifest.json");
        auto pos = manifest.find("restage-bundle/1");
        manifest.replace(pos, 16, "restage-bundle/9");
        std::ofstream(dir / "manifest.json") << manifest;
        CHECK_THROWS_AS(read_bundle(dir), std::runtime_error);
    }
    SUBCASE("non-finite floats are rejected with an offset") {
        std::fstream f(dir / "tracks.f32", std::ios::in | std::ios::out | std::ios::binary);
        float bad = std::numeric_limits<float>::quiet_NaN();
        f.seekp(24);
        f.write(reinterpret_cast<const char*>(&bad), 4);
        f.close();
        try {
            read_bundle(dir);
            CHECK(false);
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
        }
    }
}

TEST_CASE("ground truth and model round trips") {
    SceneSpec spec;
    spec.kind = SceneKind::TwoLinkArm;
    spec.num_points = 30;
    spec.frames = 5;
    spec.background_points = 10;
    spec.seed = 9;
    auto [bundle, gt] = gen_scene(spec);
    fs::path dir = temp_dir("gt");
    write_ground_truth(gt, dir);
    GroundTruth back = read_ground_truth(dir);
    CHECK(back.num_tracks == gt.num_tracks);
    CHECK(back.cluster_labels == gt.cluster_labels);
    CHECK(back.true_visibility == gt.true_visibility);
    for (std::size_t i = 0; i < gt.true_positions.size(); ++i)
        CHECK(back.true_positions[i] == gt.true_positions[i]);
    REQUIRE(back.cluster_poses.size() == gt.cluster_poses.size());
    for (std::size_t c = 0; c < gt.cluster_poses.size(); ++c)
        for (std::size_t t = 0; t < gt.cluster_poses[c].size(); ++t) {
            CHECK(back.cluster_poses[c][t].q == gt.cluster_poses[c][t].q);
            CHECK(back.cluster_poses[c][t].t == gt.cluster_poses[c][t].t);
        }

    SceneModel model = ground_truth_model(bundle, gt);
    fs::path mf = dir / "model.json";
    write_model(model, mf);
    SceneModel mback = read_model(mf);
    REQUIRE(mback.splats.size() == model.splats.size());
    for (std::size_t i = 0; i < model.splats.size(); ++i) {
        CHECK(mback.splats[i].mu == model.splats[i].mu);
        CHECK(mback.splats[i].orientation == model.splats[i].orientation);
        CHECK(mback.splats[i].source_track == model.splats[i].source_track);
    }
    for (int r = 0; r < model.coeffs.rows(); ++r)
        for (int k = 0; k < model.num_bases(); ++k)
            CHECK(mback.coeffs.beta(r, k) == model.coeffs.beta(r, k));
    for (std::size_t g = 0; g < model.bases.grid.size(); ++g) {
        CHECK(mback.bases.grid[g].q == model.bases.grid[g].q);
        CHECK(mback.bases.grid[g].t == model.bases.grid[g].t);
    }
}

TEST_CASE("depth PGM dump format") {
    DepthBuffer buf;
    buf.width = 3;
    buf.height = 2;
    buf.depth = {1.0, 2.0, 3.0, 1.5, kDepthSentinel, 2.5};
    buf.alpha = {1, 1, 1, 1, 0, 1};
    fs::path file = temp_dir("pgm") / "d.pgm";
    write_depth_pgm(buf, file, 1.0, 3.0);
    std::string text = slurp(file);
    CHECK(text.rfind("P2\n3 2\n65535\n", 0) == 0);
    // near -> 0, far and sentinel -> 65535, midpoints quantized linearly
    CHECK(text.find("0 32768 65535\n") != std::string::npos);
    CHECK(text.find("16384 65535 49151\n") != std::string::npos);
}

TEST_CASE("config parsing") {
    SUBCASE("defaults load and match the paper-derived values") {
        RunConfig c = load_config("default");
        CHECK(c.optim.epochs_init == 500);
        CHECK(c.optim.epochs_refine == 500);
        CHECK(c.losses.lambda_rigid == 1e-3);
        CHECK(c.losses.num_bases == 20);
        CHECK(c.optim.group_multipliers[3] == 0.1);
    }
    SUBCASE("paper preset raises the basis count") {
        RunConfig c = load_config("paper");
        CHECK(c.losses.num_bases == 100);
        CHECK(c.synth.frames == 100);
    }
    SUBCASE("unknown keys are rejected by name") {
        try {
            parse_config(R"({"losses": {"lambda_trak": 1.0}})");
            CHECK(false);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("lambda_trak") != std::string::npos);
        }
        CHECK_THROWS_AS(parse_config(R"({"nonsense": 1})"), ConfigError);
    }
    SUBCASE("wrong types are rejected") {
        CHECK_THROWS_AS(parse_config(R"({"optim": {"epochs_init": "many"}})"), ConfigError);
    }
    SUBCASE("dump -> parse is the identity") {
        RunConfig c = load_config("default");
        c.optim.seed = 1234;
        c.losses.num_bases = 7;
        c.artifact = ArtifactKind::OffsetLimb;
        RunConfig back = parse_config(dump_config(c));
        CHECK(back.optim.seed == 1234);
        CHECK(back.losses.num_bases == 7);
        CHECK(back.artifact == ArtifactKind::OffsetLimb);
        CHECK(dump_config(back) == dump_config(c));
    }
    SUBCASE("invalid values are schema errors") {
        CHECK_THROWS_AS(parse_config(R"({"optim": {"step_size": -1.0}})"), ConfigError);
        CHECK_THROWS_AS(parse_config(R"({"losses": {"tau0_rel": 0.5, "tau1_rel": 0.1}})"),
                        ConfigError);
    }
}
