// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "pdegen/geo/ball_index.hpp"
#include "support/geo_util.hpp"
#include "support/test_util.hpp"

using namespace pdegen;
using namespace pdegen::geo;
using pdegen::core::Rng;
using pdegen::test::brute_force_radius;
using pdegen::test::loglog_slope;
using pdegen::test::same_neighbor_sets;

TEST_CASE("a source at the query location is its own neighbor") {
    std::vector<double> src{0.4, 0.6};
    std::vector<double> qry{0.4, 0.6};
    auto ix = build_ball_index(src, qry, 2, 0.01);
    REQUIRE(ix.query_count() == 1);
    REQUIRE(ix.count(0) == 1);
    CHECK(ix.indices[0] == 0);
}

TEST_CASE("grid sources around a center query match brute force") {
    std::vector<double> src;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            src.push_back(i / 9.0);
            src.push_back(j / 9.0);
        }
    std::vector<double> qry{0.5, 0.5};
    auto ix = build_ball_index(src, qry, 2, 0.15);
    auto ref = brute_force_radius(src, qry, 2, 0.15);
    CHECK(same_neighbor_sets(ix, ref));
    CHECK(ix.count(0) == ref.count(0));
}

TEST_CASE("radius below the minimum pairwise distance leaves lists empty") {
    Rng rng(3);
    std::vector<double> src;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            src.push_back(i / 7.0);
            src.push_back(j / 7.0);
        }
    std::vector<double> qry;  // off-lattice points
    for (int k = 0; k < 20; ++k) {
        qry.push_back(rng.uniform(0.03, 0.97) + 0.011);
        qry.push_back(rng.uniform(0.03, 0.97) + 0.013);
    }
    for (auto& v : qry) v = std::min(0.999, v);
    auto ix = build_ball_index(src, qry, 2, 1e-4);
    CHECK(ix.zero_neighbor_queries == ix.query_count());
    CHECK(ix.pair_count() == 0);
    auto mu = riemann_weights(ix, WeightMode::EqualShare);
    CHECK(mu.empty());  // zero-neighbor queries propagate empty weight lists
}

TEST_CASE("spatial hash equals brute force on random instances") {
    Rng rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        const int dim = 2 + trial % 2;
        const int64_t S = 30 + static_cast<int64_t>(rng.uniform_int(0, 200));
        const int64_t Q = 10 + static_cast<int64_t>(rng.uniform_int(0, 50));
        const double r = rng.uniform(0.02, 0.35);
        std::vector<double> src(static_cast<size_t>(S * dim)), qry(static_cast<size_t>(Q * dim));
        for (auto& v : src) v = rng.uniform();
        for (auto& v : qry) v = rng.uniform();
        auto ix = build_ball_index(src, qry, dim, r);
        auto ref = brute_force_radius(src, qry, dim, r);
        REQUIRE(same_neighbor_sets(ix, ref));
    }
}

TEST_CASE("ball index input validation") {
    std::vector<double> src{0.5, 0.5};
    CHECK_THROWS_AS(build_ball_index({}, src, 2, 0.1), DataError);
    CHECK_THROWS_AS(build_ball_index(src, src, 2, 0.0), UsageError);
    CHECK_THROWS_AS(build_ball_index(src, src, 2, -0.1), UsageError);
}

TEST_CASE("equal-share weights") {
    SECTION("single neighbor carries the whole ball volume") {
        std::vector<double> src{0.5, 0.5};
        auto ix = build_ball_index(src, src, 2, 0.2);
        auto mu = riemann_weights(ix, WeightMode::EqualShare);
        REQUIRE(mu.size() == 1);
        CHECK(mu[0] == Catch::Approx(ball_volume(2, 0.2)));
    }
    SECTION("coincident neighbors split the volume; constant field sums to vol*c") {
        const int mb = 5;
        std::vector<double> src;
        for (int i = 0; i < mb; ++i) {
            src.push_back(0.3);
            src.push_back(0.7);
        }
        std::vector<double> qry{0.3, 0.7};
        auto ix = build_ball_index(src, qry, 2, 0.1);
        auto mu = riemann_weights(ix, WeightMode::EqualShare);
        REQUIRE(mu.size() == mb);
        const double vol = ball_volume(2, 0.1);
        double sum = 0;
        for (double m : mu) {
            CHECK(m == Catch::Approx(vol / mb));
            sum += m * 4.2;  // u == 4.2
        }
        CHECK(sum == Catch::Approx(vol * 4.2));
    }
}

TEST_CASE("inverse-density quadrature on a uniform field converges like m^-1/2") {
    // identity kernel, u == 1: estimate integrates 1 over the ball; the noisy
    // per-source density estimate gives the Monte Carlo error trend
    Rng rng(29);
    const double r = 0.2;
    const double vol = ball_volume(2, r);
    std::vector<double> qry{0.5, 0.5};
    std::vector<double> ms{100, 1000, 10000};
    std::vector<double> errs;
    for (double m : ms) {
        double acc = 0;
        const int reps = 12;
        for (int rep = 0; rep < reps; ++rep) {
            std::vector<double> src(static_cast<size_t>(2 * m));
            for (auto& v : src) v = rng.uniform();
            auto ix = build_ball_index(src, qry, 2, r);
            auto mu = riemann_weights(ix, WeightMode::InverseDensity, src);
            double est = 0;
            for (double w : mu) est += w;  // sum kappa*u*mu with kappa=u=1
            acc += std::abs(est - vol) / vol;
        }
        errs.push_back(acc / reps);
    }
    const double slope = loglog_slope(ms, errs);
    INFO("errors: " << errs[0] << " " << errs[1] << " " << errs[2] << ", slope " << slope);
    CHECK(slope > -0.80);
    CHECK(slope < -0.25);
}
