// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "pdegen/geo/transcoder.hpp"
#include "support/geo_util.hpp"
#include "support/test_util.hpp"

using namespace pdegen;
using namespace pdegen::geo;
using namespace pdegen::core;
using pdegen::test::make_grid_sample;
using pdegen::test::random_tensor;

namespace {
FieldSample random_mesh_sample(Rng& rng, int t, int m, int channels) {
    FieldSample s;
    s.time_count = t;
    s.spatial_dim = 2;
    s.channels = channels;
    s.coords.resize(static_cast<size_t>(m) * 2);
    for (auto& c : s.coords) c = float(rng.uniform());
    s.values.resize(static_cast<size_t>(t) * m * channels);
    for (auto& v : s.values) v = float(rng.normal());
    return s;
}
}  // namespace

TEST_CASE("normalized identity aggregation reproduces constant fields") {
    auto sample = make_grid_sample(4, 8, 8, 3, [](double, double, double, int c) { return 1.5 + c; });
    LatentGridSpec spec{4, {8, 8}, 0.2};
    ParamRegistry<float> reg(1);
    Transcoder<float> tc(reg, "tc", 3, 3, 8, 1, false);
    auto q = tc.aggregate(sample, spec, KernelMode::NormalizedIdentity);
    REQUIRE(q.shape() == Shape({4, 8, 8, 3}));
    for (int64_t i = 0; i < q.numel(); ++i) {
        const int c = static_cast<int>(i % 3);
        CHECK(std::abs(q.data()[static_cast<size_t>(i)] - (1.5f + c)) < 1e-5f);
    }
}

TEST_CASE("aggregation of a linear ramp is first-order accurate in r") {
    const double a = 2.0;  // Lipschitz constant of the ramp
    auto sample = make_grid_sample(2, 40, 40, 1, [&](double, double x, double, int) { return a * x; });
    const double r = 0.08;
    LatentGridSpec spec{2, {8, 8}, r};
    ParamRegistry<float> reg(1);
    Transcoder<float> tc(reg, "tc", 3, 1, 8, 1, false);
    auto q = tc.aggregate(sample, spec, KernelMode::NormalizedIdentity);
    auto coords = spec.spacetime_coords();
    double max_err = 0;
    for (int64_t i = 0; i < q.numel(); ++i) {
        const double x = coords[static_cast<size_t>(i * 3 + 1)];
        max_err = std::max(max_err, std::abs(double(q.data()[static_cast<size_t>(i)]) - a * x));
    }
    CHECK(max_err <= a * r + 1e-6);
}

TEST_CASE("interpolation at the latent grid points recovers grid values") {
    LatentGridSpec spec{3, {4, 4}, 0.1};  // r below every grid pitch
    ParamRegistry<float> reg(2);
    Transcoder<float> tc(reg, "tc", 3, 2, 8, 1, false);
    Rng rng(5);
    auto grid = random_tensor<float>({spec.cell_count(), 2}, rng);
    auto out = tc.interpolate(grid, spec, spec.spacetime_coords(), KernelMode::NormalizedIdentity);
    REQUIRE(out.shape() == grid.shape());
    for (size_t i = 0; i < grid.data().size(); ++i)
        CHECK(std::abs(out.data()[i] - grid.data()[i]) < 1e-6f);
}

TEST_CASE("aggregation is bitwise invariant to source ordering") {
    Rng rng(7);
    auto sample = random_mesh_sample(rng, 3, 150, 2);
    LatentGridSpec spec{3, {4, 4}, 0.3};
    ParamRegistry<float> reg(3);
    Transcoder<float> tc(reg, "tc", 3, 2, 8, 1, false);
    auto q1 = tc.aggregate(sample, spec, KernelMode::Learned);

    // reversed point order, same cloud
    FieldSample perm = sample;
    const int m = sample.point_count();
    for (int p = 0; p < m; ++p) {
        const int sp = m - 1 - p;
        for (int d = 0; d < 2; ++d) perm.coords[static_cast<size_t>(p * 2 + d)] = sample.coords[static_cast<size_t>(sp * 2 + d)];
        for (int t = 0; t < 3; ++t)
            for (int c = 0; c < 2; ++c)
                perm.values[static_cast<size_t>((t * m + p) * 2 + c)] =
                    sample.values[static_cast<size_t>((t * m + sp) * 2 + c)];
    }
    auto q2 = tc.aggregate(perm, spec, KernelMode::Learned);
    REQUIRE(q1.numel() == q2.numel());
    for (size_t i = 0; i < q1.data().size(); ++i) CHECK(q1.data()[i] == q2.data()[i]);
}

TEST_CASE("uncovered latent cells raise an error naming the cell") {
    FieldSample s;
    s.time_count = 2;
    s.spatial_dim = 2;
    s.channels = 1;
    s.coords = {0.05f, 0.05f, 0.1f, 0.05f};  // cluster in one corner
    s.values.assign(4, 1.0f);
    LatentGridSpec spec{2, {3, 3}, 0.05};
    ParamRegistry<float> reg(4);
    Transcoder<float> tc(reg, "tc", 3, 1, 8, 1, false);
    CHECK_THROWS_WITH(tc.aggregate(s, spec), Catch::Matchers::ContainsSubstring("latent cell"));
}

TEST_CASE("decode fallback substitutes the nearest latent cell") {
    LatentGridSpec spec{2, {3, 3}, 0.05};
    ParamRegistry<float> reg(5);
    Transcoder<float> tc(reg, "tc", 3, 1, 8, 1, false);
    Rng rng(11);
    auto grid = random_tensor<float>({spec.cell_count(), 1}, rng);
    std::vector<double> far_query{0.99, 0.99, 0.99};  // outside every ball
    CHECK_THROWS_AS(tc.interpolate(grid, spec, far_query, KernelMode::NormalizedIdentity, false),
                    DataError);
    auto out = tc.interpolate(grid, spec, far_query, KernelMode::NormalizedIdentity, true);
    // nearest cell is the last one (t=1, x,y max)
    CHECK(out.data()[0] == Catch::Approx(grid.data().back()));
}

TEST_CASE("gradients flow through aggregate and interpolate") {
    Rng rng(13);
    FieldSample sample = random_mesh_sample(rng, 2, 30, 2);
    LatentGridSpec spec{2, {3, 3}, 0.45};
    ParamRegistry<double> reg(6);
    Transcoder<double> tc(reg, "tc", 3, 2, 6, 1, false);
    std::vector<double> queries;
    for (int i = 0; i < 10; ++i) {
        queries.push_back(rng.uniform());
        queries.push_back(rng.uniform());
        queries.push_back(rng.uniform());
    }

    auto values = sample.values_tensor<double>().set_requires_grad(true);
    auto enc_plan = tc.encode_plan(sample, spec);
    auto dec_plan = tc.decode_plan(spec, queries, true);
    Tensor<double> probe;
    auto f = [&]() {
        auto ke = tc.kappa(enc_plan, KernelMode::Learned, false);
        auto grid = tc.apply(enc_plan, ke, values, KernelMode::Learned);
        auto kd = tc.kappa(dec_plan, KernelMode::Learned, true);
        auto out = tc.apply(dec_plan, kd, grid, KernelMode::Learned);
        if (!probe.defined()) probe = random_tensor<double>(out.shape(), rng);
        return sum(mul(out, probe));
    };

    SECTION("with respect to input values") { CHECK(grad_check<double>(f, values) < 1e-4); }
    SECTION("with respect to encoder kernel parameters") {
        auto w = reg.find("tc.enc.h0.w");
        CHECK(grad_check<double>(f, w) < 1e-4);
    }
    SECTION("with respect to decoder kernel parameters") {
        auto w = reg.find("tc.dec.out.w");
        CHECK(grad_check<double>(f, w) < 1e-4);
    }
}

TEST_CASE("full-matrix kernels mix channels") {
    Rng rng(15);
    FieldSample sample = random_mesh_sample(rng, 2, 40, 2);
    LatentGridSpec spec{2, {3, 3}, 0.45};
    ParamRegistry<double> reg(7);
    Transcoder<double> tc(reg, "tc", 3, 2, 6, 1, true);
    auto values = sample.values_tensor<double>().set_requires_grad(true);
    auto plan = tc.encode_plan(sample, spec);
    Tensor<double> probe;
    auto f = [&]() {
        auto k = tc.kappa(plan, KernelMode::Learned, false);
        auto grid = tc.apply(plan, k, values, KernelMode::Learned);
        if (!probe.defined()) probe = random_tensor<double>(grid.shape(), rng);
        return sum(mul(grid, probe));
    };
    CHECK(grad_check<double>(f, values) < 1e-4);
    auto w = reg.find("tc.enc.out.w");
    CHECK(grad_check<double>(f, w) < 1e-4);
}
