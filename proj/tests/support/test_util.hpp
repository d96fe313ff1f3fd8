// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pdegen/core/dispatch.hpp"
#include "pdegen/core/gradcheck.hpp"
#include "pdegen/core/rng.hpp"

namespace pdegen::test {

using core::Attrs;
using core::OpKind;
using core::Rng;
using core::Shape;
using core::Tensor;

template <class T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = false) {
    auto t = Tensor<T>::zeros(std::move(shape), requires_grad);
    for (auto& v : t.mut_data()) v = T(rng.normal(0.0, scale));
    return t;
}

// One gradient-check instance for an op kind: inputs, attrs, and which input
// to differentiate. Shapes are randomized per trial.
struct OpCase {
    std::vector<Tensor<double>> inputs;
    Attrs attrs;
    size_t wrt;
};

// Builds a small random instance of every op kind in the dispatch table.
inline OpCase make_op_case(OpKind kind, Rng& rng, int trial) {
    using core::Tensor;
    OpCase c;
    c.wrt = 0;
    auto rt = [&](Shape s, double scale = 1.0) { return random_tensor<double>(std::move(s), rng, scale); };
    const int64_t a = 2 + (trial % 3);
    const int64_t b = 2 + ((trial + 1) % 3);
    switch (kind) {
        case OpKind::Add:
        case OpKind::Sub:
        case OpKind::Mul: {
            c.inputs = {rt({a, 1, b}), rt({a, 3, b})};  // exercises broadcast
            c.wrt = static_cast<size_t>(trial % 2);
            break;
        }
        case OpKind::Div: {
            auto num = rt({a, b});
            auto den = rt({a, b});
            for (auto& v : den.mut_data()) v = 1.5 + 0.3 * std::abs(v);  // keep away from 0
            c.inputs = {num, den};
            c.wrt = static_cast<size_t>(trial % 2);
            break;
        }
        case OpKind::Neg:
        case OpKind::Silu:
        case OpKind::Gelu:
        case OpKind::Sigmoid:
        case OpKind::Tanh:
        case OpKind::Square:
        case OpKind::Softmax:
            c.inputs = {rt({a, b})};
            break;
        case OpKind::Exp:
            c.inputs = {rt({a, b}, 0.5)};
            break;
        case OpKind::Log:
        case OpKind::Sqrt: {
            auto x = rt({a, b});
            for (auto& v : x.mut_data()) v = 0.5 + std::abs(v);
            c.inputs = {x};
            break;
        }
        case OpKind::Abs: {
            auto x = rt({a, b});
            for (auto& v : x.mut_data()) v += (v >= 0 ? 0.5 : -0.5);  // keep off the kink
            c.inputs = {x};
            break;
        }
        case OpKind::Clamp: {
            auto x = rt({a, b}, 2.0);
            for (auto& v : x.mut_data())
                if (std::abs(std::abs(v) - 1.0) < 0.05) v *= 1.2;  // keep off the clamp edges
            c.inputs = {x};
            c.attrs.set("lo", -1.0).set("hi", 1.0);
            break;
        }
        case OpKind::MatMul:
            c.inputs = {rt({a, 4}), rt({4, b})};
            c.wrt = static_cast<size_t>(trial % 2);
            break;
        case OpKind::Bmm:
            c.inputs = {rt({2, a, 3}), rt({2, 3, b})};
            c.wrt = static_cast<size_t>(trial % 2);
            break;
        case OpKind::Conv2d:
            c.inputs = {rt({1, 2, 4, 5}), rt({3, 2, 3, 3}), rt({3})};
            c.attrs.set("stride", int64_t(1 + trial % 2)).set("pad", int64_t(1));
            c.wrt = static_cast<size_t>(trial % 3);
            break;
        case OpKind::Conv3d:
            c.inputs = {rt({1, 2, 3, 4, 4}), rt({2, 2, 3, 3, 3}), rt({2})};
            c.attrs.set("stride", int64_t(1 + trial % 2)).set("pad", int64_t(1));
            c.wrt = static_cast<size_t>(trial % 3);
            break;
        case OpKind::ConvTranspose2d:
            c.inputs = {rt({1, 2, 3, 3}), rt({2, 3, 2, 2}), rt({3})};
            c.attrs.set("stride", int64_t(2)).set("pad", int64_t(0));
            c.wrt = static_cast<size_t>(trial % 3);
            break;
        case OpKind::ConvTranspose3d:
            c.inputs = {rt({1, 2, 2, 3, 3}), rt({2, 2, 2, 2, 2}), rt({2})};
            c.attrs.set("stride", int64_t(2)).set("pad", int64_t(0));
            c.wrt = static_cast<size_t>(trial % 3);
            break;
        case OpKind::Sum:
        case OpKind::Mean:
            c.inputs = {rt({a, b})};
            break;
        case OpKind::SumAxis:
        case OpKind::MeanAxis:
            c.inputs = {rt({a, 3, b})};
            c.attrs.set("axis", int64_t(trial % 3)).set("keepdim", int64_t(trial % 2));
            break;
        case OpKind::LayerNorm:
            c.inputs = {rt({a, 6}), rt({6}, 0.5), rt({6}, 0.5)};
            c.wrt = static_cast<size_t>(trial % 3);
            break;
        case OpKind::GroupNorm:
            c.inputs = {rt({2, 4, a, b}), rt({4}, 0.5), rt({4}, 0.5)};
            c.attrs.set("groups", int64_t(2));
            c.wrt = static_cast<size_t>(trial % 3);
            break;
        case OpKind::Embedding: {
            c.inputs = {rt({5, 3})};
            std::vector<int64_t> ids;
            for (int i = 0; i < 4; ++i) ids.push_back(rng.uniform_int(0, 4));
            c.attrs.set("ids", ids);
            break;
        }
        case OpKind::Reshape:
            c.inputs = {rt({a, 6})};
            c.attrs.set("shape", std::vector<int64_t>{a * 2, 3});
            break;
        case OpKind::Transpose:
            c.inputs = {rt({a, 3, b})};
            c.attrs.set("perm", std::vector<int64_t>{2, 0, 1});
            break;
        case OpKind::Concat: {
            c.inputs = {rt({a, 2}), rt({a, 3})};
            c.attrs.set("axis", int64_t(1));
            c.wrt = static_cast<size_t>(trial % 2);
            break;
        }
        case OpKind::Slice:
            c.inputs = {rt({a, 5})};
            c.attrs.set("axis", int64_t(1)).set("start", int64_t(1)).set("len", int64_t(3));
            break;
        case OpKind::Attention: {
            c.inputs = {rt({2, 3, 4}), rt({2, 5, 4}), rt({2, 5, 4})};
            c.wrt = static_cast<size_t>(trial % 3);
            break;
        }
    }
    return c;
}

// Max grad-check error for one op kind over `trials` random instances, using
// a fixed random weighting of the output as the scalar head.
inline double op_kind_grad_error(OpKind kind, int trials, uint64_t seed) {
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(seed, static_cast<uint64_t>(t) * 131 + static_cast<uint64_t>(kind));
        OpCase c = make_op_case(kind, rng, t);
        Tensor<double> probe;  // fixed weights decorrelate output entries
        auto f = [&]() {
            auto y = core::forward_op<double>(kind, c.inputs, c.attrs);
            if (!probe.defined()) {
                Rng wr(seed ^ 0xABCD, static_cast<uint64_t>(t));
                probe = random_tensor<double>(y.shape(), wr);
            }
            return core::sum(core::mul(y, probe));
        };
        double err = core::grad_check<double>(f, c.inputs[c.wrt], 1e-5);
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace pdegen::test
