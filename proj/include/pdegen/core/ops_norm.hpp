// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/core/ops_shape.hpp"

namespace pdegen::core {

namespace detail {

// Normalization backward over contiguous rows of length d:
// dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
template <class T>
void norm_row_backward(const T* xhat, const T* dxhat, T inv_std, int64_t d, T* dx) {
    T m1 = 0, m2 = 0;
    for (int64_t j = 0; j < d; ++j) {
        m1 += dxhat[j];
        m2 += dxhat[j] * xhat[j];
    }
    m1 /= T(d);
    m2 /= T(d);
    for (int64_t j = 0; j < d; ++j) dx[j] += inv_std * (dxhat[j] - m1 - xhat[j] * m2);
}

}  // namespace detail

// Layer normalization over the last axis; gamma/beta optional ([d]).
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
    const int64_t d = x.shape().back();
    const int64_t rows = x.numel() / d;
    const bool affine = gamma.defined();
    if (affine && (gamma.numel() != d || !beta.defined() || beta.numel() != d))
        throw UsageError("layer_norm: gamma/beta must both be length " + std::to_string(d));

    std::vector<T> v(x.data().size());
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(rows));
    auto xhat = std::make_shared<std::vector<T>>(x.data().size());
    const auto& xv = x.data();
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = xv.data() + r * d;
        T mu = 0;
        for (int64_t j = 0; j < d; ++j) mu += xr[j];
        mu /= T(d);
        T var = 0;
        for (int64_t j = 0; j < d; ++j) {
            const T c = xr[j] - mu;
            var += c * c;
        }
        var /= T(d);
        const T is = T(1) / std::sqrt(var + eps);
        (*inv_std)[static_cast<size_t>(r)] = is;
        T* hr = xhat->data() + r * d;
        T* vr = v.data() + r * d;
        for (int64_t j = 0; j < d; ++j) {
            hr[j] = (xr[j] - mu) * is;
            vr[j] = affine ? hr[j] * gamma.data()[static_cast<size_t>(j)] + beta.data()[static_cast<size_t>(j)]
                           : hr[j];
        }
    }

    auto bwd = [rows, d, affine, inv_std, xhat](Node<T>& n) {
        std::vector<T> dx(n.grad.size(), T(0));
        std::vector<T> dxhat(static_cast<size_t>(d));
        std::vector<T> dgamma, dbeta;
        const T* gm = affine ? n.inputs[1]->value.data() : nullptr;
        if (affine) {
            dgamma.assign(static_cast<size_t>(d), T(0));
            dbeta.assign(static_cast<size_t>(d), T(0));
        }
        for (int64_t r = 0; r < rows; ++r) {
            const T* go = n.grad.data() + r * d;
            const T* hr = xhat->data() + r * d;
            for (int64_t j = 0; j < d; ++j) {
                dxhat[static_cast<size_t>(j)] = affine ? go[j] * gm[j] : go[j];
                if (affine) {
                    dgamma[static_cast<size_t>(j)] += go[j] * hr[j];
                    dbeta[static_cast<size_t>(j)] += go[j];
                }
            }
            detail::norm_row_backward(hr, dxhat.data(), (*inv_std)[static_cast<size_t>(r)], d,
                                      dx.data() + r * d);
        }
        accumulate_grad(n, 0, dx);
        if (affine) {
            accumulate_grad(n, 1, dgamma);
            accumulate_grad(n, 2, dbeta);
        }
    };
    if (affine) return make_op<T>("layer_norm", x.shape(), std::move(v), {x, gamma, beta}, bwd);
    return make_op<T>("layer_norm", x.shape(), std::move(v), {x}, bwd);
}

template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, T eps = T(1e-5)) {
    return layer_norm(x, Tensor<T>(), Tensor<T>(), eps);
}

// Group normalization for [N,C,*spatial]; gamma/beta per channel.
template <class T>
Tensor<T> group_norm(const Tensor<T>& x, int64_t groups, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5)) {
    if (x.dim() < 2) throw UsageError("group_norm: input must be at least [N,C]");
    const int64_t N = x.size(0), C = x.size(1);
    if (groups <= 0 || C % groups != 0)
        throw UsageError("group_norm: channels " + std::to_string(C) + " not divisible by groups " +
                         std::to_string(groups));
    if (gamma.defined() && (gamma.numel() != C || beta.numel() != C))
        throw UsageError("group_norm: gamma/beta must be length C");
    int64_t spatial = 1;
    for (int64_t k = 2; k < x.dim(); ++k) spatial *= x.size(k);
    const int64_t cpg = C / groups;
    const int64_t glen = cpg * spatial;
    const bool affine = gamma.defined();

    std::vector<T> v(x.data().size());
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(N * groups));
    auto xhat = std::make_shared<std::vector<T>>(x.data().size());
    const auto& xv = x.data();
    for (int64_t s = 0; s < N; ++s)
        for (int64_t g = 0; g < groups; ++g) {
            const T* base = xv.data() + (s * C + g * cpg) * spatial;
            T mu = 0;
            for (int64_t j = 0; j < glen; ++j) mu += base[j];
            mu /= T(glen);
            T var = 0;
            for (int64_t j = 0; j < glen; ++j) {
                const T c = base[j] - mu;
                var += c * c;
            }
            var /= T(glen);
            const T is = T(1) / std::sqrt(var + eps);
            (*inv_std)[static_cast<size_t>(s * groups + g)] = is;
            T* hb = xhat->data() + (s * C + g * cpg) * spatial;
            T* vb = v.data() + (s * C + g * cpg) * spatial;
            for (int64_t cc = 0; cc < cpg; ++cc) {
                const int64_t ch = g * cpg + cc;
                const T ga = affine ? gamma.data()[static_cast<size_t>(ch)] : T(1);
                const T be = affine ? beta.data()[static_cast<size_t>(ch)] : T(0);
                for (int64_t j = 0; j < spatial; ++j) {
                    const int64_t o = cc * spatial + j;
                    hb[o] = (base[o] - mu) * is;
                    vb[o] = hb[o] * ga + be;
                }
            }
        }

    auto bwd = [N, C, groups, cpg, spatial, glen, affine, inv_std, xhat](Node<T>& n) {
        std::vector<T> dx(n.grad.size(), T(0));
        std::vector<T> dxhat(static_cast<size_t>(glen));
        std::vector<T> dgamma, dbeta;
        const T* gm = affine ? n.inputs[1]->value.data() : nullptr;
        if (affine) {
            dgamma.assign(static_cast<size_t>(C), T(0));
            dbeta.assign(static_cast<size_t>(C), T(0));
        }
        for (int64_t s = 0; s < N; ++s)
            for (int64_t g = 0; g < groups; ++g) {
                const int64_t off = (s * C + g * cpg) * spatial;
                const T* go = n.grad.data() + off;
                const T* hb = xhat->data() + off;
                for (int64_t cc = 0; cc < cpg; ++cc) {
                    const int64_t ch = g * cpg + cc;
                    const T ga = affine ? gm[ch] : T(1);
                    for (int64_t j = 0; j < spatial; ++j) {
                        const int64_t o = cc * spatial + j;
                        dxhat[static_cast<size_t>(o)] = go[o] * ga;
                        if (affine) {
                            dgamma[static_cast<size_t>(ch)] += go[o] * hb[o];
                            dbeta[static_cast<size_t>(ch)] += go[o];
                        }
                    }
                }
                detail::norm_row_backward(hb, dxhat.data(), (*inv_std)[static_cast<size_t>(s * groups + g)],
                                          glen, dx.data() + off);
            }
        accumulate_grad(n, 0, dx);
        if (affine) {
            accumulate_grad(n, 1, dgamma);
            accumulate_grad(n, 2, dbeta);
        }
    };
    if (affine) return make_op<T>("group_norm", x.shape(), std::move(v), {x, gamma, beta}, bwd);
    return make_op<T>("group_norm", x.shape(), std::move(v), {x}, bwd);
}

template <class T>
Tensor<T> group_norm(const Tensor<T>& x, int64_t groups, T eps = T(1e-5)) {
    return group_norm(x, groups, Tensor<T>(), Tensor<T>(), eps);
}

}  // namespace pdegen::core
