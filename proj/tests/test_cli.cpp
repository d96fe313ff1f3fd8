// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pdegen/io/checkpoint.hpp"
#include "pdegen/io/dataset_file.hpp"

#ifndef PDEGEN_CLI_PATH
#define PDEGEN_CLI_PATH "pdegen"
#endif

namespace fs = std::filesystem;
using namespace pdegen;

namespace {

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run_cli(const std::string& args, const fs::path& cwd) {
    const auto log = cwd / "cli_output.log";
    const std::string cmd = "cd '" + cwd.string() + "' && '" + PDEGEN_CLI_PATH + "' " + args +
                            " > cli_output.log 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::string output((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return {WEXITSTATUS(status), output};
}

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "pdegen_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<char> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

const std::string kTinyData =
    "gen-data --seed 5 --set data.resolution=16 --set data.timesteps=8 "
    "--set data.train=3 --set data.val=1 --set data.path=tiny.lpde";

}  // namespace

TEST_CASE("gen-data is byte-deterministic under a fixed seed") {
    auto dir = fresh_dir("det");
    auto r1 = run_cli(kTinyData, dir);
    REQUIRE(r1.exit_code == 0);
    auto bytes1 = slurp(dir / "tiny.lpde");
    auto side1 = slurp(dir / "tiny.lpde.meta.json");
    fs::remove(dir / "tiny.lpde");
    auto r2 = run_cli(kTinyData, dir);
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(dir / "tiny.lpde") == bytes1);
    CHECK(slurp(dir / "tiny.lpde.meta.json") == side1);
    CHECK(r1.output.find("caption[0]") != std::string::npos);
}

TEST_CASE("mesh-layout datasets round-trip through the reader") {
    auto dir = fresh_dir("mesh");
    auto r = run_cli(kTinyData + " --set data.layout=mesh --set data.mesh_points=256", dir);
    REQUIRE(r.exit_code == 0);
    auto loaded = io::read_dataset((dir / "tiny.lpde").string());
    REQUIRE(loaded.samples.size() == 4);
    CHECK_FALSE(loaded.samples[0].is_grid());
    CHECK(loaded.samples[0].point_count() == 256);
    // write -> read -> write is bitwise stable
    io::write_dataset((dir / "again.lpde").string(), loaded);
    CHECK(slurp(dir / "again.lpde") == slurp(dir / "tiny.lpde"));
}

TEST_CASE("cli exit codes follow the error taxonomy") {
    auto dir = fresh_dir("codes");
    SECTION("usage errors exit 1") {
        CHECK(run_cli("", dir).exit_code == 1);
        CHECK(run_cli("gen-data --set no.such.key=1", dir).exit_code == 1);
        CHECK(run_cli("train-ldm --config missing.cfg", dir).exit_code == 1);
    }
    SECTION("data errors exit 2") {
        REQUIRE(run_cli(kTinyData, dir).exit_code == 0);
        auto bytes = slurp(dir / "tiny.lpde");
        bytes[0] = 'X';
        std::ofstream(dir / "tiny.lpde", std::ios::binary)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        auto r = run_cli(
            "train-ae --seed 5 --set data.path=tiny.lpde --set data.resolution=16 "
            "--set data.timesteps=8 --set train.steps=2",
            dir);
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("magic") != std::string::npos);
    }
    SECTION("numerical failures exit 3 and keep the last checkpoint") {
        REQUIRE(run_cli(kTinyData, dir).exit_code == 0);
        auto r = run_cli(
            "train-ae --seed 5 --set data.path=tiny.lpde --set data.resolution=16 "
            "--set data.timesteps=8 --set ae.width=8 --set ae.stages=2 --set kernel.hidden=8 "
            "--set ball.radius=0.08 --set train.steps=200 --set train.batch=2 "
            "--set train.lr=1e30 --set train.ckpt_every=1",
            dir);
        CHECK(r.exit_code == 3);
        CHECK(r.output.find("non-finite") != std::string::npos);
        // the periodic sink retained a loadable checkpoint
        REQUIRE(fs::exists(dir / "runs/ae.lpck"));
        CHECK_NOTHROW(io::load_checkpoint((dir / "runs/ae.lpck").string()));
    }
}

TEST_CASE("caption subcommand reproduces the template") {
    auto dir = fresh_dir("caption");
    auto r = run_cli("caption --radius-cm 3.5 --pos-x 0.4 --pos-y 0.2 --inlet 1.25 --re 850", dir);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("Fluid passes over a cylinder with a radius of 3.50 and position: 0.40, "
                        "0.20. Fluid enters with a velocity of 1.25. The Reynolds number is 850. "
                        "The flow is turbulent.") != std::string::npos);
}

TEST_CASE("flops subcommand reports per-layer lines and the ar total") {
    auto dir = fresh_dir("flops");
    auto r = run_cli("flops --set dit.depth=2", dir);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("block0.attn.qkv") != std::string::npos);
    CHECK(r.output.find("total_per_forward") != std::string::npos);
    CHECK(r.output.find("autoregressive_total") != std::string::npos);
}

TEST_CASE("every command echoes its resolved configuration") {
    auto dir = fresh_dir("echo");
    auto r = run_cli(kTinyData, dir);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("seed = 5") != std::string::npos);
    CHECK(r.output.find("data.resolution = 16") != std::string::npos);
}
