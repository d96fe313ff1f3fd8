// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/cond/condition.hpp"
#include "pdegen/core/module.hpp"
#include "pdegen/core/ops_attention.hpp"

namespace pdegen::models {

using core::Linear;
using core::ParamRegistry;
using core::Shape;
using core::Tensor;

// [N, L, h] -> heads folded into the batch axis -> [N*heads, L, h/heads]
template <class T>
Tensor<T> split_heads(const Tensor<T>& x, int64_t heads) {
    const int64_t n = x.size(0), l = x.size(1), h = x.size(2);
    if (h % heads != 0) throw UsageError("attention: hidden size not divisible by head count");
    auto r = core::reshape(x, {n, l, heads, h / heads});
    auto t = core::transpose(r, {0, 2, 1, 3});
    return core::reshape(t, {n * heads, l, h / heads});
}

template <class T>
Tensor<T> merge_heads(const Tensor<T>& x, int64_t heads) {
    const int64_t nh = x.size(0), l = x.size(1), dh = x.size(2);
    auto r = core::reshape(x, {nh / heads, heads, l, dh});
    auto t = core::transpose(r, {0, 2, 1, 3});
    return core::reshape(t, {nh / heads, l, heads * dh});
}

// Additive attention bias [N*heads, Lq, Lk] from a key validity mask [N, Lk].
template <class T>
Tensor<T> additive_mask(const Tensor<T>& valid, int64_t lq, int64_t heads) {
    const int64_t n = valid.size(0), lk = valid.size(1);
    std::vector<T> d(static_cast<size_t>(n * heads * lq * lk));
    size_t o = 0;
    for (int64_t s = 0; s < n; ++s)
        for (int64_t h = 0; h < heads; ++h)
            for (int64_t q = 0; q < lq; ++q)
                for (int64_t k = 0; k < lk; ++k)
                    d[o++] = valid.data()[static_cast<size_t>(s * lk + k)] > T(0.5) ? T(0) : T(-1e9);
    return Tensor<T>::from_data({n * heads, lq, lk}, std::move(d));
}

// Multi-head self/cross attention.
template <class T>
struct Attention {
    Linear<T> q, k, v, out;
    int64_t heads = 1;

    Attention() = default;
    Attention(ParamRegistry<T>& reg, const std::string& prefix, int64_t hidden, int64_t kv_dim,
              int64_t heads_, bool zero_out = false)
        : q(reg, prefix + ".q", hidden, hidden),
          k(reg, prefix + ".k", kv_dim, hidden),
          v(reg, prefix + ".v", kv_dim, hidden),
          out(zero_out ? Linear<T>::zeros(reg, prefix + ".out", hidden, hidden)
                       : Linear<T>(reg, prefix + ".out", hidden, hidden)),
          heads(heads_) {}

    // x [N, Lq, h]; ctx [N, Lk, kv_dim] (x itself for self-attention)
    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& ctx, const Tensor<T>& mask = Tensor<T>()) const {
        auto qh = split_heads(q.forward(x), heads);
        auto kh = split_heads(k.forward(ctx), heads);
        auto vh = split_heads(v.forward(ctx), heads);
        Tensor<T> bias;
        if (mask.defined()) bias = additive_mask(mask, x.size(1), heads);
        auto attn = core::scaled_dot_product_attention(qh, kh, vh, bias);
        return out.forward(merge_heads(attn, heads));
    }
};

// Sinusoidal step embedding table row for n, plus the usual 2-layer projection.
template <class T>
struct TimestepEmbedding {
    static constexpr int64_t freq_dim = 128;
    Linear<T> fc1, fc2;

    TimestepEmbedding() = default;
    TimestepEmbedding(ParamRegistry<T>& reg, const std::string& prefix, int64_t hidden)
        : fc1(reg, prefix + ".fc1", freq_dim, hidden), fc2(reg, prefix + ".fc2", hidden, hidden) {}

    static Tensor<T> sinusoid(const std::vector<int>& steps) {
        const int64_t half = freq_dim / 2;
        std::vector<T> d(steps.size() * static_cast<size_t>(freq_dim));
        for (size_t i = 0; i < steps.size(); ++i)
            for (int64_t j = 0; j < half; ++j) {
                const double w = std::exp(-std::log(10000.0) * double(j) / double(half));
                d[i * freq_dim + static_cast<size_t>(j)] = T(std::cos(steps[i] * w));
                d[i * freq_dim + static_cast<size_t>(half + j)] = T(std::sin(steps[i] * w));
            }
        return Tensor<T>::from_data({static_cast<int64_t>(steps.size()), freq_dim}, std::move(d));
    }

    Tensor<T> forward(const std::vector<int>& steps) const {
        return fc2.forward(core::silu(fc1.forward(sinusoid(steps))));
    }
};

// Token-wise MLP with one hidden expansion.
template <class T>
struct Mlp {
    Linear<T> fc1, fc2;

    Mlp() = default;
    Mlp(ParamRegistry<T>& reg, const std::string& prefix, int64_t hidden, int64_t inner)
        : fc1(reg, prefix + ".fc1", hidden, inner), fc2(reg, prefix + ".fc2", inner, hidden) {}

    Tensor<T> forward(const Tensor<T>& x) const { return fc2.forward(core::gelu(fc1.forward(x))); }
};

}  // namespace pdegen::models
