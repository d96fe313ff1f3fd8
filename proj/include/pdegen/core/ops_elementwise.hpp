// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "pdegen/core/tensor.hpp"

namespace pdegen::core {

// ---- broadcasting helpers (numpy rules) ----

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    const size_t nd = std::max(a.size(), b.size());
    Shape out(nd);
    for (size_t i = 0; i < nd; ++i) {
        const int64_t da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
        const int64_t db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
        if (da != db && da != 1 && db != 1)
            throw UsageError("shapes not broadcastable: " + shape_str(a) + " vs " + shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

// Row-major strides with 0 where the (right-aligned) input dim is 1.
inline std::vector<int64_t> broadcast_strides(const Shape& in, const Shape& out) {
    std::vector<int64_t> strides(out.size(), 0);
    int64_t s = 1;
    for (size_t k = 0; k < in.size(); ++k) {
        const size_t i = in.size() - 1 - k;          // input axis
        const size_t o = out.size() - 1 - k;         // matching output axis
        strides[o] = (in[i] == 1) ? 0 : s;
        s *= in[i];
    }
    return strides;
}

template <class T, class F>
void broadcast_apply(const Shape& out_shape, const std::vector<T>& a, const Shape& ashape,
                     const std::vector<T>& b, const Shape& bshape, std::vector<T>& out, F f) {
    const int64_t n = shape_numel(out_shape);
    out.resize(static_cast<size_t>(n));
    if (ashape == bshape) {
        for (int64_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
        return;
    }
    const auto sa = broadcast_strides(ashape, out_shape);
    const auto sb = broadcast_strides(bshape, out_shape);
    const size_t nd = out_shape.size();
    std::vector<int64_t> idx(nd, 0);
    int64_t ia = 0, ib = 0;
    for (int64_t lin = 0; lin < n; ++lin) {
        out[lin] = f(a[ia], b[ib]);
        for (size_t k = nd; k-- > 0;) {
            idx[k]++;
            ia += sa[k];
            ib += sb[k];
            if (idx[k] < out_shape[k]) break;
            ia -= sa[k] * out_shape[k];
            ib -= sb[k] * out_shape[k];
            idx[k] = 0;
        }
    }
}

// Sum-reduce `g` (shaped out_shape) down to in_shape for broadcast backward.
template <class T>
std::vector<T> reduce_to_shape(const std::vector<T>& g, const Shape& out_shape, const Shape& in_shape) {
    if (out_shape == in_shape) return g;
    std::vector<T> r(static_cast<size_t>(shape_numel(in_shape)), T(0));
    const auto si = broadcast_strides(in_shape, out_shape);
    const size_t nd = out_shape.size();
    std::vector<int64_t> idx(nd, 0);
    int64_t ii = 0;
    const int64_t n = shape_numel(out_shape);
    for (int64_t lin = 0; lin < n; ++lin) {
        r[ii] += g[lin];
        for (size_t k = nd; k-- > 0;) {
            idx[k]++;
            ii += si[k];
            if (idx[k] < out_shape[k]) break;
            ii -= si[k] * out_shape[k];
            idx[k] = 0;
        }
    }
    return r;
}

// ---- binary elementwise ops ----

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    Shape os = broadcast_shape(a.shape(), b.shape());
    std::vector<T> v;
    broadcast_apply(os, a.data(), a.shape(), b.data(), b.shape(), v, [](T x, T y) { return x + y; });
    Shape as = a.shape(), bs = b.shape();
    return make_op<T>("add", os, std::move(v), {a, b}, [os, as, bs](Node<T>& n) {
        accumulate_grad(n, 0, reduce_to_shape(n.grad, os, as));
        accumulate_grad(n, 1, reduce_to_shape(n.grad, os, bs));
    });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    Shape os = broadcast_shape(a.shape(), b.shape());
    std::vector<T> v;
    broadcast_apply(os, a.data(), a.shape(), b.data(), b.shape(), v, [](T x, T y) { return x - y; });
    Shape as = a.shape(), bs = b.shape();
    return make_op<T>("sub", os, std::move(v), {a, b}, [os, as, bs](Node<T>& n) {
        accumulate_grad(n, 0, reduce_to_shape(n.grad, os, as));
        std::vector<T> gb = n.grad;
        for (auto& x : gb) x = -x;
        accumulate_grad(n, 1, reduce_to_shape(gb, os, bs));
    });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    Shape os = broadcast_shape(a.shape(), b.shape());
    std::vector<T> v;
    broadcast_apply(os, a.data(), a.shape(), b.data(), b.shape(), v, [](T x, T y) { return x * y; });
    Shape as = a.shape(), bs = b.shape();
    return make_op<T>("mul", os, std::move(v), {a, b}, [os, as, bs](Node<T>& n) {
        const auto& av = n.inputs[0]->value;
        const auto& bv = n.inputs[1]->value;
        std::vector<T> ga, gb;
        broadcast_apply(os, n.grad, os, bv, bs, ga, [](T g, T y) { return g * y; });
        accumulate_grad(n, 0, reduce_to_shape(ga, os, as));
        broadcast_apply(os, n.grad, os, av, as, gb, [](T g, T x) { return g * x; });
        accumulate_grad(n, 1, reduce_to_shape(gb, os, bs));
    });
}

template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    Shape os = broadcast_shape(a.shape(), b.shape());
    std::vector<T> v;
    broadcast_apply(os, a.data(), a.shape(), b.data(), b.shape(), v, [](T x, T y) { return x / y; });
    Shape as = a.shape(), bs = b.shape();
    return make_op<T>("div", os, std::move(v), {a, b}, [os, as, bs](Node<T>& n) {
        const auto& av = n.inputs[0]->value;
        const auto& bv = n.inputs[1]->value;
        std::vector<T> ga, tmp, gb;
        broadcast_apply(os, n.grad, os, bv, bs, ga, [](T g, T y) { return g / y; });
        accumulate_grad(n, 0, reduce_to_shape(ga, os, as));
        broadcast_apply(os, av, as, bv, bs, tmp, [](T x, T y) { return -x / (y * y); });
        gb.resize(tmp.size());
        for (size_t i = 0; i < tmp.size(); ++i) gb[i] = tmp[i] * n.grad[i];
        accumulate_grad(n, 1, reduce_to_shape(gb, os, bs));
    });
}

// ---- scalar-constant ops ----

template <class T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    std::vector<T> v(a.data());
    for (auto& x : v) x *= c;
    return make_op<T>("scale", a.shape(), std::move(v), {a}, [c](Node<T>& n) {
        std::vector<T> g(n.grad);
        for (auto& x : g) x *= c;
        accumulate_grad(n, 0, g);
    });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
    std::vector<T> v(a.data());
    for (auto& x : v) x += c;
    return make_op<T>("add_scalar", a.shape(), std::move(v), {a},
                      [](Node<T>& n) { accumulate_grad(n, 0, n.grad); });
}

// ---- unary ops ----

template <class T, class F, class DF>
Tensor<T> unary_op(const char* name, const Tensor<T>& a, F f, DF dfda) {
    std::vector<T> v(a.data());
    for (auto& x : v) x = f(x);
    return make_op<T>(name, a.shape(), std::move(v), {a}, [dfda](Node<T>& n) {
        const auto& x = n.inputs[0]->value;
        const auto& y = n.value;
        std::vector<T> g(n.grad.size());
        for (size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] * dfda(x[i], y[i]);
        accumulate_grad(n, 0, g);
    });
}

template <class T>
Tensor<T> neg(const Tensor<T>& a) {
    return unary_op<T>("neg", a, [](T x) { return -x; }, [](T, T) { return T(-1); });
}

template <class T>
Tensor<T> exp(const Tensor<T>& a) {
    return unary_op<T>("exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> log(const Tensor<T>& a) {
    return unary_op<T>("log", a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <class T>
Tensor<T> sqrt(const Tensor<T>& a) {
    return unary_op<T>("sqrt", a, [](T x) { return std::sqrt(x); },
                       [](T, T y) { return T(0.5) / y; });
}

template <class T>
Tensor<T> abs(const Tensor<T>& a) {
    return unary_op<T>("abs", a, [](T x) { return std::abs(x); },
                       [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <class T>
Tensor<T> square(const Tensor<T>& a) {
    return unary_op<T>("square", a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <class T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi) {
    std::vector<T> v(a.data());
    for (auto& x : v) x = std::min(hi, std::max(lo, x));
    return make_op<T>("clamp", a.shape(), std::move(v), {a}, [lo, hi](Node<T>& n) {
        const auto& x = n.inputs[0]->value;
        std::vector<T> g(n.grad.size());
        for (size_t i = 0; i < g.size(); ++i) g[i] = (x[i] >= lo && x[i] <= hi) ? n.grad[i] : T(0);
        accumulate_grad(n, 0, g);
    });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    return unary_op<T>("sigmoid", a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
                       [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> tanh(const Tensor<T>& a) {
    return unary_op<T>("tanh", a, [](T x) { return std::tanh(x); },
                       [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> silu(const Tensor<T>& a) {
    return unary_op<T>("silu", a,
                       [](T x) { return x / (T(1) + std::exp(-x)); },
                       [](T x, T) {
                           const T s = T(1) / (T(1) + std::exp(-x));
                           return s * (T(1) + x * (T(1) - s));
                       });
}

template <class T>
Tensor<T> gelu(const Tensor<T>& a) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    return unary_op<T>("gelu", a,
                       [=](T x) { return T(0.5) * x * (T(1) + T(std::erf(double(x) * inv_sqrt2))); },
                       [=](T x, T) {
                           const double cdf = 0.5 * (1.0 + std::erf(double(x) * inv_sqrt2));
                           const double pdf = inv_sqrt2pi * std::exp(-0.5 * double(x) * double(x));
                           return T(cdf + double(x) * pdf);
                       });
}

template <class T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <class T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <class T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <class T>
Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }
template <class T>
Tensor<T> operator*(T c, const Tensor<T>& a) { return scale(a, c); }
template <class T>
Tensor<T> operator-(const Tensor<T>& a) { return neg(a); }

}  // namespace pdegen::core
