// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "pdegen/core/optim.hpp"
#include "pdegen/core/ops_shape.hpp"
#include "support/test_util.hpp"

using namespace pdegen;
using namespace pdegen::core;
using pdegen::test::random_tensor;

TEST_CASE("adam leaves parameters unchanged under zero gradient") {
    auto p = Tensor<float>::from_data({3}, {1.f, -2.f, 0.5f}, true);
    Adam<float> opt({p}, 0.1);
    auto loss = sum(mul(p, Tensor<float>::zeros({3})));
    loss.backward();
    opt.step();
    CHECK(p.data()[0] == 1.f);
    CHECK(p.data()[1] == -2.f);
    CHECK(p.data()[2] == 0.5f);
}

TEST_CASE("first adam step with unit gradient moves by about -lr") {
    auto p = Tensor<float>::from_data({1}, {0.f}, true);
    Adam<float> opt({p}, 0.1);
    auto loss = sum(p);  // d/dp = 1
    loss.backward();
    opt.step();
    // bias-corrected mhat/sqrt(vhat) = 1 on the first step
    CHECK(p.data()[0] == Catch::Approx(-0.1).epsilon(1e-5));
}

TEST_CASE("identical parameter sets receive identical updates") {
    Rng rng(31);
    auto a = random_tensor<float>({4, 4}, rng, 1.0, true);
    auto b = a.detach().set_requires_grad(true);
    auto target = random_tensor<float>({4, 4}, rng, 1.0);
    Adam<float> oa({a}, 0.01), ob({b}, 0.01);
    for (int i = 0; i < 5; ++i) {
        auto la = sum(square(sub(a, target)));
        la.backward();
        oa.step();
        oa.zero_grad();
        auto lb = sum(square(sub(b, target)));
        lb.backward();
        ob.step();
        ob.zero_grad();
    }
    for (size_t i = 0; i < a.data().size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("adam rejects bad configurations") {
    auto p = Tensor<float>::from_data({1}, {0.f}, true);
    CHECK_THROWS_AS(Adam<float>({p}, 0.0), UsageError);
    CHECK_THROWS_AS(Adam<float>({p}, -0.1), UsageError);
    Adam<float> opt({p}, 0.1);
    CHECK_THROWS_AS(opt.step(), UsageError);  // no gradient populated
}
