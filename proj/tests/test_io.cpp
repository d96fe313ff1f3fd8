// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "pdegen/io/checkpoint.hpp"
#include "pdegen/io/config.hpp"
#include "pdegen/io/dataset_file.hpp"
#include "pdegen/io/ppm.hpp"
#include "support/geo_util.hpp"
#include "support/test_util.hpp"

using namespace pdegen;
using namespace pdegen::io;
using pdegen::core::ParamRegistry;
using pdegen::core::Rng;
using pdegen::geo::FieldSample;
using pdegen::test::make_grid_sample;

namespace {
std::string tmp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "pdegen_io_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}
}  // namespace

TEST_CASE("dataset files round-trip bitwise") {
    DatasetBundle bundle;
    for (int i = 0; i < 3; ++i)
        bundle.samples.push_back(make_grid_sample(4, 6, 6, 2, [&](double t, double x, double y, int c) {
            return std::sin(3 * x + i) + t * y + c;
        }));
    bundle.meta = {{"channel_names", {"vx", "vy"}},
                   {"captions", {"a", "b", "c"}},
                   {"split", {{"train", {0, 1}}, {"val", {2}}}},
                   {"stats", {{"mean", {0.0, 0.0}}, {"stddev", {1.0, 1.0}}}}};
    const auto path = tmp_path("round.lpde");
    write_dataset(path, bundle);
    auto loaded = read_dataset(path);
    REQUIRE(loaded.samples.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        REQUIRE(loaded.samples[i].values.size() == bundle.samples[i].values.size());
        for (size_t j = 0; j < loaded.samples[i].values.size(); ++j)
            CHECK(loaded.samples[i].values[j] == bundle.samples[i].values[j]);
    }
    CHECK(split_indices(loaded.meta, "train") == std::vector<int>({0, 1}));

    // write -> read -> write produces identical bytes
    const auto path2 = tmp_path("round2.lpde");
    write_dataset(path2, loaded);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("mesh-layout datasets preserve coordinates") {
    FieldSample mesh;
    mesh.time_count = 3;
    mesh.spatial_dim = 2;
    mesh.channels = 1;
    Rng rng(5);
    for (int p = 0; p < 70; ++p) {
        mesh.coords.push_back(float(rng.uniform()));
        mesh.coords.push_back(float(rng.uniform()));
    }
    mesh.values.resize(3 * 70);
    for (auto& v : mesh.values) v = float(rng.normal());
    DatasetBundle bundle;
    bundle.samples = {mesh};
    bundle.meta = {{"split", {{"train", {0}}, {"val", nlohmann::json::array()}}}};
    const auto path = tmp_path("mesh.lpde");
    write_dataset(path, bundle);
    auto loaded = read_dataset(path);
    REQUIRE_FALSE(loaded.samples[0].is_grid());
    CHECK(loaded.samples[0].coords == mesh.coords);
    CHECK(loaded.samples[0].values == mesh.values);
}

TEST_CASE("corrupted dataset headers are rejected with diagnostics") {
    DatasetBundle bundle;
    bundle.samples = {make_grid_sample(2, 4, 4, 1, [](double, double x, double, int) { return x; })};
    bundle.meta = {{"split", {{"train", {0}}, {"val", nlohmann::json::array()}}}};
    const auto path = tmp_path("corrupt.lpde");
    write_dataset(path, bundle);

    SECTION("bad magic names the file and offset") {
        auto bytes = slurp(path);
        bytes[0] = 'X';
        std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_WITH(read_dataset(path), Catch::Matchers::ContainsSubstring("offset 0"));
    }
    SECTION("unknown version is refused") {
        auto bytes = slurp(path);
        bytes[4] = 99;
        std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_WITH(read_dataset(path), Catch::Matchers::ContainsSubstring("version"));
    }
    SECTION("chunk length mismatch is detected before reading payloads") {
        auto bytes = slurp(path);
        bytes[bytes.size() - 4 * 2 * 4 * 4 - 9] += 4;  // bump the u64 chunk length
        std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_WITH(read_dataset(path), Catch::Matchers::ContainsSubstring("chunk length"));
    }
}

TEST_CASE("checkpoints restore bitwise and reject mismatches") {
    ParamRegistry<float> reg(7);
    auto a = reg.create("layer.w", {4, 3}, core::Init::Normal, 0.5);
    auto b = reg.create("layer.b", {3}, core::Init::Uniform, 0.2);
    auto ck = snapshot(reg, "train.lr = 0.001\n", 0.25, 42, 1000);
    const auto path = tmp_path("model.lpck");
    save_checkpoint(path, ck);
    auto loaded = load_checkpoint(path);
    CHECK(loaded.seed == 42);
    CHECK(loaded.step == 1000);
    CHECK(loaded.latent_scale == 0.25);
    CHECK(loaded.config_text == "train.lr = 0.001\n");

    // save(load(.)) is byte-identical
    const auto path2 = tmp_path("model2.lpck");
    save_checkpoint(path2, loaded);
    CHECK(slurp(path) == slurp(path2));

    // restoring into a matching registry reproduces tensors exactly
    ParamRegistry<float> reg2(99);
    auto a2 = reg2.create("layer.w", {4, 3}, core::Init::Zero);
    auto b2 = reg2.create("layer.b", {3}, core::Init::Zero);
    restore(loaded, reg2);
    for (size_t i = 0; i < a.data().size(); ++i) CHECK(a2.data()[i] == a.data()[i]);
    for (size_t i = 0; i < b.data().size(); ++i) CHECK(b2.data()[i] == b.data()[i]);

    ParamRegistry<float> reg3(1);
    reg3.create("other.w", {4, 3}, core::Init::Zero);
    reg3.create("layer.b", {3}, core::Init::Zero);
    CHECK_THROWS_AS(restore(loaded, reg3), DataError);
    ParamRegistry<float> reg4(1);
    reg4.create("layer.w", {3, 4}, core::Init::Zero);
    reg4.create("layer.b", {3}, core::Init::Zero);
    CHECK_THROWS_AS(restore(loaded, reg4), DataError);
}

TEST_CASE("run configuration parsing and overrides") {
    RunConfig cfg;
    CHECK(cfg.geti("diff.steps") == 1000);
    CHECK(cfg.get("diff.schedule") == "linear");

    const auto path = tmp_path("run.cfg");
    std::ofstream(path) << "# comment line\n"
                        << "train.lr = 5e-4\n"
                        << "dit.depth = 6   # inline comment\n"
                        << "sample.text = The buoyancy factor is 0.50.\n";
    cfg.load_file(path);
    CHECK(cfg.getd("train.lr") == Catch::Approx(5e-4));
    CHECK(cfg.geti("dit.depth") == 6);
    CHECK(cfg.get("sample.text") == "The buoyancy factor is 0.50.");

    // flag beats file
    cfg.apply_override("dit.depth=8");
    CHECK(cfg.geti("dit.depth") == 8);

    CHECK_THROWS_AS(cfg.set("no.such.key", "1"), UsageError);
    CHECK_THROWS_AS(cfg.apply_override("dit.depth"), UsageError);
    std::ofstream(path) << "typo.key = 3\n";
    RunConfig cfg2;
    CHECK_THROWS_AS(cfg2.load_file(path), UsageError);

    // every key appears in the echo
    const auto echo = cfg.echo();
    for (const auto& [k, v] : RunConfig::defaults()) CHECK(echo.find(k + " = ") != std::string::npos);
}

TEST_CASE("heatmap strips render to ppm") {
    auto s = make_grid_sample(4, 8, 8, 1, [](double t, double x, double y, int) {
        return std::sin(8 * x) * std::cos(8 * y) + t;
    });
    const auto path = tmp_path("strip.ppm");
    write_heatmap_strip(path, s, 0, 1);
    auto bytes = slurp(path);
    REQUIRE(bytes.size() > 16);
    CHECK(bytes[0] == 'P');
    CHECK(bytes[1] == '6');
    // 4 frames of 8x8 with 1px padding: 35x8 pixels
    const std::string header(bytes.begin(), bytes.begin() + 16);
    CHECK(header.find("35 8") != std::string::npos);
}
