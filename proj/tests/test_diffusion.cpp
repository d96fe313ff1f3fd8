// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "pdegen/diffusion/diffusion.hpp"
#include "support/test_util.hpp"

using namespace pdegen;
using namespace pdegen::core;
using namespace pdegen::diffusion;
using pdegen::test::random_tensor;

TEST_CASE("linear schedule reaches near-total noise at N=1000") {
    auto s = NoiseSchedule::make(ScheduleKind::Linear, 1000);
    // independent product from the linear beta definition
    double ab = 1.0;
    for (int n = 0; n < 1000; ++n) ab *= 1.0 - (1e-4 + (0.02 - 1e-4) * n / 999.0);
    CHECK(s.alpha_bar(1000) == Catch::Approx(ab).epsilon(1e-10));
    CHECK(s.alpha_bar(1000) < 1e-4);
    CHECK(s.terminal_snr() < 0.01);
}

TEST_CASE("single-step schedule is its own alpha") {
    auto s = NoiseSchedule::make(ScheduleKind::Linear, 1);
    CHECK(s.alpha_bar(1) == Catch::Approx(s.alpha(1)));
    CHECK(s.alpha(1) == Catch::Approx(1.0 - s.beta(1)));
}

TEST_CASE("schedule invariants hold for both kinds") {
    for (auto kind : {ScheduleKind::Linear, ScheduleKind::Cosine}) {
        auto s = NoiseSchedule::make(kind, 500);
        CHECK(s.beta(1) > 0.0);
        CHECK(s.beta(500) < 1.0);
        for (int n = 2; n <= 500; ++n) {
            CHECK(s.alpha_bar(n) < s.alpha_bar(n - 1));
            CHECK(s.posterior_var(n) <= s.beta(n) + 1e-15);
        }
    }
    CHECK_THROWS_AS(NoiseSchedule::make("triangular", 10), UsageError);
    CHECK_THROWS_AS(NoiseSchedule::make(ScheduleKind::Linear, 0), UsageError);
}

TEST_CASE("composed single-step noising matches the closed form") {
    auto s = NoiseSchedule::make(ScheduleKind::Linear, 1000);
    const int n = 400;
    Rng rng(99);
    const double x0 = 1.0;
    const int trials = 10000;
    double sum = 0, sum2 = 0;
    for (int t = 0; t < trials; ++t) {
        double x = x0;
        for (int k = 1; k <= n; ++k)
            x = std::sqrt(s.alpha(k)) * x + std::sqrt(s.beta(k)) * rng.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / trials;
    const double var = sum2 / trials - mean * mean;
    CHECK(mean == Catch::Approx(std::sqrt(s.alpha_bar(n)) * x0).margin(0.01));
    CHECK(var == Catch::Approx(1.0 - s.alpha_bar(n)).epsilon(0.03));
}

TEST_CASE("q_sample closed form") {
    auto s = NoiseSchedule::make(ScheduleKind::Linear, 100);
    Rng rng(5);
    SECTION("zero signal keeps only the noise term") {
        auto x0 = Tensor<float>::zeros({2, 3});
        auto eps = random_tensor<float>({2, 3}, rng);
        auto xn = q_sample(x0, {40, 70}, eps, s);
        for (int i = 0; i < 2; ++i) {
            const float c = float(std::sqrt(1.0 - s.alpha_bar(i == 0 ? 40 : 70)));
            for (int j = 0; j < 3; ++j)
                CHECK(xn.data()[static_cast<size_t>(i * 3 + j)] ==
                      Catch::Approx(c * eps.data()[static_cast<size_t>(i * 3 + j)]));
        }
    }
    SECTION("empirical mean and variance match within 1%") {
        const int n = 60, trials = 100000;
        double sum = 0, sum2 = 0;
        for (int t = 0; t < trials; ++t) {
            const double x = std::sqrt(s.alpha_bar(n)) * 2.0 +
                             std::sqrt(1.0 - s.alpha_bar(n)) * rng.normal();
            sum += x;
            sum2 += x * x;
        }
        const double mean = sum / trials, var = sum2 / trials - mean * mean;
        CHECK(mean == Catch::Approx(std::sqrt(s.alpha_bar(n)) * 2.0).epsilon(0.01));
        CHECK(var == Catch::Approx(1.0 - s.alpha_bar(n)).epsilon(0.01));
    }
    SECTION("step bounds are enforced") {
        auto x0 = Tensor<float>::zeros({1, 2});
        auto eps = Tensor<float>::zeros({1, 2});
        CHECK_THROWS_AS(q_sample(x0, {0}, eps, s), UsageError);
        CHECK_THROWS_AS(q_sample(x0, {101}, eps, s), UsageError);
    }
}

TEST_CASE("parameterization conversions round-trip") {
    auto s = NoiseSchedule::make(ScheduleKind::Linear, 1000);
    Rng rng(7);
    auto z0 = random_tensor<float>({4, 8}, rng);
    auto eps = random_tensor<float>({4, 8}, rng);
    std::vector<int> n{3, 250, 700, 1000};
    auto zn = q_sample(z0, n, eps, s);
    auto v = v_target(z0, eps, n, s);
    auto z0_hat = x0_from_v(zn, v, n, s);
    auto eps_hat = eps_from_v(zn, v, n, s);
    auto z0_hat2 = x0_from_eps(zn, eps, n, s);
    for (size_t i = 0; i < z0.data().size(); ++i) {
        CHECK(std::abs(z0_hat.data()[i] - z0.data()[i]) < 1e-5f);
        CHECK(std::abs(eps_hat.data()[i] - eps.data()[i]) < 1e-5f);
        CHECK(std::abs(z0_hat2.data()[i] - z0.data()[i]) < 1e-4f);
    }
}

TEST_CASE("loss_simple is zero for an oracle model and ~1 for a zero model") {
    auto s = NoiseSchedule::make(ScheduleKind::Linear, 50);
    Rng rng(11);
    auto z0 = random_tensor<float>({4, 64}, rng);

    SECTION("oracle eps") {
        Rng lr(21);
        DenoiseFn<float> oracle = [&](const Tensor<float>& zn, const std::vector<int>& n) {
            // recover the injected noise from the known clean latent
            std::vector<double> ia(n.size()), sa(n.size());
            for (size_t i = 0; i < n.size(); ++i) {
                const double ab = s.alpha_bar(n[i]);
                ia[i] = 1.0 / std::sqrt(1.0 - ab);
                sa[i] = std::sqrt(ab);
            }
            ModelOut<float> out;
            out.eps = mul(per_sample_const(ia, zn), sub(zn, mul(per_sample_const(sa, zn), z0)));
            return out;
        };
        auto loss = loss_simple(oracle, z0, s, Parameterization::Eps, lr);
        CHECK(loss.item() < 1e-9f);
    }
    SECTION("oracle velocity") {
        Rng lr(22);
        DenoiseFn<float> oracle = [&](const Tensor<float>& zn, const std::vector<int>& n) {
            std::vector<double> ia(n.size()), sa(n.size());
            for (size_t i = 0; i < n.size(); ++i) {
                const double ab = s.alpha_bar(n[i]);
                ia[i] = 1.0 / std::sqrt(1.0 - ab);
                sa[i] = std::sqrt(ab);
            }
            auto eps = mul(per_sample_const(ia, zn), sub(zn, mul(per_sample_const(sa, zn), z0)));
            ModelOut<float> out;
            out.eps = v_target(z0, eps, n, s);
            return out;
        };
        auto loss = loss_simple(oracle, z0, s, Parameterization::Velocity, lr);
        CHECK(loss.item() < 1e-8f);
    }
    SECTION("zero model gives expected unit loss") {
        Rng lr(23);
        DenoiseFn<float> zero = [&](const Tensor<float>& zn, const std::vector<int>&) {
            ModelOut<float> out;
            out.eps = Tensor<float>::zeros(zn.shape());
            return out;
        };
        double acc = 0;
        const int reps = 60;
        for (int i = 0; i < reps; ++i) acc += double(loss_simple(zero, z0, s, Parameterization::Eps, lr).item());
        CHECK(acc / reps == Catch::Approx(1.0).epsilon(0.02));
    }
}

TEST_CASE("ddpm step") {
    auto s = NoiseSchedule::make(ScheduleKind::Linear, 100);
    Rng rng(31);
    auto z0 = random_tensor<float>({2, 6}, rng);
    const int n = 40;
    auto eps = random_tensor<float>({2, 6}, rng);
    std::vector<int> ns{n, n};
    auto zn = q_sample(z0, ns, eps, s);

    SECTION("n=1 adds no noise") {
        ModelOut<float> out;
        out.eps = eps;
        Rng r1(1), r2(2);
        auto a = ddpm_step(out, zn, 1, s, VarianceMode::FixedPosterior, r1);
        auto b = ddpm_step(out, zn, 1, s, VarianceMode::FixedPosterior, r2);
        for (size_t i = 0; i < a.data().size(); ++i) CHECK(a.data()[i] == b.data()[i]);
    }
    SECTION("oracle noise recovers the closed-form posterior mean") {
        ModelOut<float> out;
        out.eps = eps;
        Rng r1(77), r2(77);
        auto stepped = ddpm_step(out, zn, n, s, VarianceMode::FixedPosterior, r1);
        auto xi = gaussian_like(zn, r2);  // same stream as inside the step
        const double sigma = std::sqrt(s.posterior_var(n));
        // direct q-posterior algebra from (z0, zn)
        const double ab = s.alpha_bar(n), abp = s.alpha_bar(n - 1);
        const double c0 = std::sqrt(abp) * s.beta(n) / (1.0 - ab);
        const double c1 = std::sqrt(s.alpha(n)) * (1.0 - abp) / (1.0 - ab);
        for (size_t i = 0; i < zn.data().size(); ++i) {
            const double mean_ref = c0 * z0.data()[i] + c1 * zn.data()[i];
            const double mean_step = double(stepped.data()[i]) - sigma * double(xi.data()[i]);
            CHECK(mean_step == Catch::Approx(mean_ref).margin(1e-5));
        }
    }
    SECTION("learned variance endpoints interpolate beta and beta-tilde") {
        ModelOut<float> out;
        out.eps = eps;
        // recover the shared posterior mean from the fixed-variance path
        Rng rf(55), rf2(55);
        auto fixed = ddpm_step(out, zn, n, s, VarianceMode::FixedPosterior, rf);
        auto xi = gaussian_like(zn, rf2);  // same stream as inside the step
        std::vector<double> mean(zn.data().size());
        const double sig_fixed = std::sqrt(s.posterior_var(n));
        for (size_t i = 0; i < mean.size(); ++i)
            mean[i] = double(fixed.data()[i]) - sig_fixed * double(xi.data()[i]);

        for (double vp : {1.0, 0.0}) {
            out.vprime = Tensor<float>::filled(zn.shape(), float(vp));
            Rng rl(55);
            auto stepped = ddpm_step(out, zn, n, s, VarianceMode::Learned, rl);
            const double expect = vp == 1.0 ? std::sqrt(s.beta(n)) : sig_fixed;
            for (size_t i = 0; i < mean.size(); ++i)
                CHECK(double(stepped.data()[i]) - mean[i] ==
                      Catch::Approx(expect * double(xi.data()[i])).margin(1e-5));
        }
    }
    SECTION("learned mode without a variance head is an error") {
        ModelOut<float> out;
        out.eps = eps;
        Rng r(1);
        CHECK_THROWS_AS(ddpm_step(out, zn, n, s, VarianceMode::Learned, r), UsageError);
    }
}

TEST_CASE("ddim sampler") {
    auto s = NoiseSchedule::make(ScheduleKind::Linear, 200);
    Rng rng(41);
    DenoiseFn<float> toy = [](const Tensor<float>& z, const std::vector<int>&) {
        ModelOut<float> out;
        out.eps = scale(z, 0.3f);
        return out;
    };
    SECTION("eta=0 is bitwise deterministic") {
        auto z = random_tensor<float>({2, 8}, rng);
        Rng r1(9), r2(9);
        auto a = ddim_sample(toy, z, s, 20, 0.0, r1);
        auto b = ddim_sample(toy, z, s, 20, 0.0, r2);
        for (size_t i = 0; i < a.data().size(); ++i) CHECK(a.data()[i] == b.data()[i]);
    }
    SECTION("S=N with eta=1 recovers the ancestral variance") {
        for (int n = 2; n <= 200; ++n)
            CHECK(std::abs(ddim_step_variance(s, n, 1.0) - s.posterior_var(n)) < 1e-6);
    }
    SECTION("S beyond N is rejected") {
        auto z = random_tensor<float>({1, 4}, rng);
        Rng r(1);
        CHECK_THROWS_AS(ddim_sample(toy, z, s, 201, 0.0, r), UsageError);
    }
}

TEST_CASE("classifier-free guidance combination") {
    Rng rng(51);
    GuidanceConfig g;
    SECTION("w=0 returns the conditional estimate exactly") {
        g.weight = 0.0;
        auto c = random_tensor<float>({2, 5}, rng);
        auto u = random_tensor<float>({2, 5}, rng);
        auto out = cfg_combine(c, u, g);
        for (size_t i = 0; i < c.data().size(); ++i) CHECK(out.data()[i] == c.data()[i]);
    }
    SECTION("agreeing estimates are unchanged for any w") {
        auto c = random_tensor<float>({2, 5}, rng);
        for (double w : {0.5, 2.0, 7.0}) {
            g.weight = w;
            g.rescale = 0.7;
            auto out = cfg_combine(c, c, g);
            for (size_t i = 0; i < c.data().size(); ++i)
                CHECK(out.data()[i] == Catch::Approx(c.data()[i]).margin(1e-6));
        }
    }
    SECTION("hand-evaluated scalar case") {
        g.weight = 2.0;
        g.rescale = 0.0;
        auto c = Tensor<float>::from_data({1, 1}, {1.f});
        auto u = Tensor<float>::from_data({1, 1}, {0.f});
        CHECK(cfg_combine(c, u, g).data()[0] == Catch::Approx(3.0f));
    }
    SECTION("invalid rescale is rejected") {
        g.rescale = 1.5;
        auto c = Tensor<float>::zeros({1, 2});
        CHECK_THROWS_AS(cfg_combine(c, c, g), UsageError);
    }
}

TEST_CASE("learned-variance hybrid loss is finite and differentiable") {
    auto s = NoiseSchedule::make(ScheduleKind::Linear, 20);
    Rng rng(61);
    auto z0 = random_tensor<float>({3, 10}, rng);
    auto w = Tensor<float>::filled({1}, 0.1f, true);
    DenoiseFn<float> model = [&](const Tensor<float>& zn, const std::vector<int>&) {
        ModelOut<float> out;
        out.eps = mul(w, zn);
        out.vprime = sigmoid(mul(w, zn));
        return out;
    };
    Rng lr(5);
    auto loss = loss_simple(model, z0, s, Parameterization::Eps, lr, nullptr, 0.001);
    CHECK(std::isfinite(loss.item()));
    loss.backward();
    CHECK(w.has_grad());
    CHECK(std::isfinite(w.grad()[0]));
}
