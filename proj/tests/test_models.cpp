// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "pdegen/models/dit.hpp"
#include "pdegen/models/flops.hpp"
#include "pdegen/models/unet3d.hpp"
#include "support/test_util.hpp"

using namespace pdegen;
using namespace pdegen::core;
using namespace pdegen::models;
using pdegen::cond::ConditionBatch;
using pdegen::cond::Modality;
using pdegen::cond::null_condition;
using pdegen::test::random_tensor;

namespace {
template <class T>
void randomize_all(ParamRegistry<T>& reg, uint64_t seed, double scale = 0.05) {
    Rng rng(seed);
    for (auto& [name, t] : reg.items()) {
        auto tt = t;
        for (auto& v : tt.mut_data()) v = T(rng.normal(0.0, scale));
    }
}

template <class T>
ConditionBatch<T> random_condition(int64_t n, int64_t len, int64_t dc, Rng& rng, Modality m) {
    ConditionBatch<T> c;
    c.tokens = random_tensor<T>({n, len, dc}, rng);
    c.mask = Tensor<T>::filled({n, len}, T(1));
    c.modality = m;
    return c;
}
}  // namespace

TEST_CASE("fresh DiT equals the blocks-removed forward pass") {
    DiTConfig cfg;
    cfg.channels = 3;
    cfg.t = 4;
    cfg.h = 8;
    cfg.w = 8;
    cfg.hidden = 64;
    cfg.depth = 3;
    cfg.heads = 4;
    cfg.cond_dim = 16;
    ParamRegistry<float> reg(11);
    DiT<float> dit(reg, "dit", cfg);
    // a random head keeps the comparison non-vacuous (both paths share it)
    {
        Rng rng(5);
        auto w = reg.find("dit.final.head.w");
        for (auto& v : w.mut_data()) v = float(rng.normal(0.0, 0.1));
    }
    Rng rng(7);
    auto z = random_tensor<float>({2, 3, 4, 8, 8}, rng);
    auto c = random_condition<float>(2, 5, 16, rng, Modality::Text);
    std::vector<int> steps{7, 300};
    auto full = dit.forward(z, steps, c);
    auto ref = dit.blocks_removed_forward(z, steps, c);
    REQUIRE(full.eps.shape() == z.shape());
    double max_diff = 0;
    for (size_t i = 0; i < full.eps.data().size(); ++i)
        max_diff = std::max(max_diff, std::abs(double(full.eps.data()[i]) - double(ref.eps.data()[i])));
    CHECK(max_diff < 1e-6);
}

TEST_CASE("DiT output is independent of conditioning at initialization") {
    DiTConfig cfg;
    cfg.channels = 2;
    cfg.t = 2;
    cfg.h = 4;
    cfg.w = 4;
    cfg.hidden = 32;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.cond_dim = 8;
    ParamRegistry<float> reg(13);
    DiT<float> dit(reg, "dit", cfg);
    Rng rng(3);
    auto z = random_tensor<float>({2, 2, 2, 4, 4}, rng);
    std::vector<int> steps{10, 20};
    auto with_cond = dit.forward(z, steps, random_condition<float>(2, 6, 8, rng, Modality::Text));
    auto with_null = dit.forward(z, steps, null_condition<float>(2, 8));
    for (size_t i = 0; i < with_cond.eps.data().size(); ++i)
        CHECK(with_cond.eps.data()[i] == Catch::Approx(with_null.eps.data()[i]).margin(1e-7));
}

TEST_CASE("DiT shape contract and variance head") {
    DiTConfig cfg;
    cfg.channels = 4;
    cfg.t = 6;
    cfg.h = 8;
    cfg.w = 8;
    cfg.hidden = 32;
    cfg.depth = 1;
    cfg.heads = 2;
    cfg.cond_dim = 8;
    cfg.learned_variance = true;
    ParamRegistry<float> reg(17);
    DiT<float> dit(reg, "dit", cfg);
    randomize_all(reg, 99);
    Rng rng(1);
    auto z = random_tensor<float>({3, 4, 6, 8, 8}, rng);
    auto out = dit.forward(z, {1, 2, 3}, null_condition<float>(3, 8));
    CHECK(out.eps.shape() == z.shape());
    REQUIRE(out.vprime.defined());
    CHECK(out.vprime.shape() == z.shape());
    for (float v : out.vprime.data()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    // bad extents are rejected
    auto zbad = random_tensor<float>({1, 4, 5, 8, 8}, rng);
    CHECK_THROWS_AS(dit.forward(zbad, {1}, null_condition<float>(1, 8)), UsageError);
}

TEST_CASE("permuting the batch permutes DiT outputs identically") {
    DiTConfig cfg;
    cfg.channels = 2;
    cfg.t = 2;
    cfg.h = 4;
    cfg.w = 4;
    cfg.hidden = 32;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.cond_dim = 8;
    ParamRegistry<float> reg(19);
    DiT<float> dit(reg, "dit", cfg);
    randomize_all(reg, 7);
    Rng rng(23);
    auto z0 = random_tensor<float>({1, 2, 2, 4, 4}, rng);
    auto z1 = random_tensor<float>({1, 2, 2, 4, 4}, rng);
    auto c0 = random_condition<float>(1, 4, 8, rng, Modality::Text);
    auto c1 = random_condition<float>(1, 4, 8, rng, Modality::Text);
    auto cat = [&](const Tensor<float>& a, const Tensor<float>& b) { return concat<float>({a, b}, 0); };
    ConditionBatch<float> c01{cat(c0.tokens, c1.tokens), cat(c0.mask, c1.mask), Modality::Text};
    ConditionBatch<float> c10{cat(c1.tokens, c0.tokens), cat(c1.mask, c0.mask), Modality::Text};
    auto ab = dit.forward(cat(z0, z1), {5, 9}, c01);
    auto ba = dit.forward(cat(z1, z0), {9, 5}, c10);
    const int64_t per = z0.numel();
    for (int64_t i = 0; i < per; ++i) {
        CHECK(ab.eps.data()[static_cast<size_t>(i)] == ba.eps.data()[static_cast<size_t>(per + i)]);
        CHECK(ab.eps.data()[static_cast<size_t>(per + i)] == ba.eps.data()[static_cast<size_t>(i)]);
    }
}

TEST_CASE("gradients flow through a DiT block") {
    DiTConfig cfg;
    cfg.channels = 2;
    cfg.t = 2;
    cfg.h = 4;
    cfg.w = 4;
    cfg.hidden = 16;
    cfg.depth = 1;
    cfg.heads = 2;
    cfg.cond_dim = 6;
    ParamRegistry<double> reg(29);
    DiT<double> dit(reg, "dit", cfg);
    randomize_all(reg, 31, 0.08);
    Rng rng(37);
    auto z = random_tensor<double>({1, 2, 2, 4, 4}, rng);
    auto c = random_condition<double>(1, 3, 6, rng, Modality::Text);
    Tensor<double> probe;
    auto f = [&]() {
        auto out = dit.forward(z, {12}, c);
        if (!probe.defined()) probe = random_tensor<double>(out.eps.shape(), rng);
        return sum(mul(out.eps, probe));
    };
    // eps=1e-4: deeper graphs leave tiny-gradient elements at the mercy of
    // finite-difference cancellation at the default step
    CHECK(grad_check<double>(f, z, 1e-4) < 1e-4);
    auto w = reg.find("dit.block0.attn.q.w");
    CHECK(grad_check<double>(f, w, 1e-4) < 1e-4);
    auto aw = reg.find("dit.block0.adaln.w");
    CHECK(grad_check<double>(f, aw, 1e-4) < 1e-4);
    auto cw = reg.find("dit.block0.cross.k.w");
    CHECK(grad_check<double>(f, cw, 1e-4) < 1e-4);
}

TEST_CASE("unet3d preserves shapes and decouples from the condition at init") {
    UnetConfig cfg;
    cfg.channels = 3;
    cfg.t = 4;
    cfg.h = 8;
    cfg.w = 8;
    cfg.base_width = 8;
    cfg.mults = {1, 2};
    cfg.heads = 2;
    cfg.cond_dim = 8;
    ParamRegistry<float> reg(41);
    Unet3d<float> unet(reg, "unet", cfg);
    randomize_all(reg, 43);
    // zero the cross-attention output projection again: the condition path
    // must vanish from the output
    for (const char* name : {"unet.cross.out.w", "unet.cross.out.b"}) {
        auto t = reg.find(name);
        std::fill(t.mut_data().begin(), t.mut_data().end(), 0.f);
    }
    Rng rng(47);
    auto z = random_tensor<float>({2, 3, 4, 8, 8}, rng);
    auto a = unet.forward(z, {3, 4}, random_condition<float>(2, 5, 8, rng, Modality::Text));
    auto b = unet.forward(z, {3, 4}, random_condition<float>(2, 7, 8, rng, Modality::Text));
    REQUIRE(a.eps.shape() == z.shape());
    for (size_t i = 0; i < a.eps.data().size(); ++i) CHECK(a.eps.data()[i] == b.eps.data()[i]);
    // divisibility is enforced
    UnetConfig bad = cfg;
    bad.t = 5;
    ParamRegistry<float> reg2(1);
    CHECK_THROWS_AS(Unet3d<float>(reg2, "u", bad), UsageError);
}

TEST_CASE("gradients flow through the unet bottleneck attention") {
    UnetConfig cfg;
    cfg.channels = 2;
    cfg.t = 2;
    cfg.h = 4;
    cfg.w = 4;
    cfg.base_width = 4;
    cfg.mults = {1, 2};
    cfg.heads = 2;
    cfg.cond_dim = 4;
    ParamRegistry<double> reg(53);
    Unet3d<double> unet(reg, "unet", cfg);
    randomize_all(reg, 59, 0.08);
    Rng rng(61);
    auto z = random_tensor<double>({1, 2, 2, 4, 4}, rng);
    auto c = random_condition<double>(1, 3, 4, rng, Modality::Text);
    Tensor<double> probe;
    auto f = [&]() {
        auto out = unet.forward(z, {6}, c);
        if (!probe.defined()) probe = random_tensor<double>(out.eps.shape(), rng);
        return sum(mul(out.eps, probe));
    };
    CHECK(grad_check<double>(f, z, 1e-4) < 1e-4);
    auto w = reg.find("unet.cross.q.w");
    CHECK(grad_check<double>(f, w, 1e-4) < 1e-4);
}

TEST_CASE("flop accounting") {
    SECTION("a 2x2 by 2x2 matmul is 16 flops") {
        FlopCounter fc;
        fc.matmul("m", 2, 2, 2);
        CHECK(fc.total() == 16);
    }
    SECTION("doubling depth doubles the block flops exactly") {
        DiTConfig a;
        a.depth = 4;
        DiTConfig b = a;
        b.depth = 8;
        auto fa = dit_flops(a, 64), fb = dit_flops(b, 64);
        auto block_sum = [](const FlopCounter& f) {
            int64_t s = 0;
            for (const auto& l : f.lines)
                if (l.label.rfind("block", 0) == 0) s += l.flops;
            return s;
        };
        CHECK(block_sum(fb) == 2 * block_sum(fa));
    }
    SECTION("autoregressive accounting multiplies by the horizon") {
        DiTConfig a;
        const int64_t per = dit_flops(a, 64).total();
        CHECK(autoregressive_total(per, 24) == per * 24);
    }
}
