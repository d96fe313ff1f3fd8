// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "pdegen/core/ops_elementwise.hpp"
#include "pdegen/core/tensor.hpp"

namespace pdegen::core {

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape) {
    // one -1 extent is inferred
    int64_t known = 1, infer = -1;
    for (size_t i = 0; i < new_shape.size(); ++i) {
        if (new_shape[i] == -1) {
            if (infer >= 0) throw UsageError("reshape: more than one -1 extent");
            infer = static_cast<int64_t>(i);
        } else {
            known *= new_shape[i];
        }
    }
    if (infer >= 0) new_shape[static_cast<size_t>(infer)] = a.numel() / known;
    if (shape_numel(new_shape) != a.numel())
        throw UsageError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(new_shape));
    std::vector<T> v(a.data());
    return make_op<T>("reshape", std::move(new_shape), std::move(v), {a},
                      [](Node<T>& n) { accumulate_grad(n, 0, n.grad); });
}

namespace detail {
inline std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size(), 1);
    for (size_t k = s.size() - 1; k-- > 0;) st[k] = st[k + 1] * s[k + 1];
    return st;
}

template <class T>
void permute_copy(const std::vector<T>& src, const Shape& in_shape,
                  const std::vector<int64_t>& perm, std::vector<T>& dst, Shape& out_shape) {
    const size_t nd = in_shape.size();
    out_shape.resize(nd);
    for (size_t i = 0; i < nd; ++i) out_shape[i] = in_shape[static_cast<size_t>(perm[i])];
    const auto in_st = row_major_strides(in_shape);
    std::vector<int64_t> st(nd);  // stride in src for each output axis
    for (size_t i = 0; i < nd; ++i) st[i] = in_st[static_cast<size_t>(perm[i])];
    const int64_t n = shape_numel(in_shape);
    dst.resize(static_cast<size_t>(n));
    std::vector<int64_t> idx(nd, 0);
    int64_t off = 0;
    for (int64_t lin = 0; lin < n; ++lin) {
        dst[lin] = src[off];
        for (size_t k = nd; k-- > 0;) {
            idx[k]++;
            off += st[k];
            if (idx[k] < out_shape[k]) break;
            off -= st[k] * out_shape[k];
            idx[k] = 0;
        }
    }
}
}  // namespace detail

// General axis permutation (materialized copy).
template <class T>
Tensor<T> transpose(const Tensor<T>& a, std::vector<int64_t> perm) {
    const size_t nd = a.shape().size();
    if (perm.size() != nd) throw UsageError("transpose: perm rank mismatch");
    std::vector<bool> seen(nd, false);
    for (int64_t p : perm) {
        if (p < 0 || p >= static_cast<int64_t>(nd) || seen[static_cast<size_t>(p)])
            throw UsageError("transpose: invalid permutation");
        seen[static_cast<size_t>(p)] = true;
    }
    Shape out_shape;
    std::vector<T> v;
    detail::permute_copy(a.data(), a.shape(), perm, v, out_shape);
    Shape in_shape = a.shape();
    return make_op<T>("transpose", out_shape, std::move(v), {a}, [in_shape, perm](Node<T>& n) {
        // inverse permutation maps output grad back to input layout
        std::vector<int64_t> inv(perm.size());
        for (size_t i = 0; i < perm.size(); ++i) inv[static_cast<size_t>(perm[i])] = static_cast<int64_t>(i);
        Shape tmp_shape;
        std::vector<T> g;
        Shape out_shape2(perm.size());
        for (size_t i = 0; i < perm.size(); ++i) out_shape2[i] = in_shape[static_cast<size_t>(perm[i])];
        detail::permute_copy(n.grad, out_shape2, inv, g, tmp_shape);
        accumulate_grad(n, 0, g);
    });
}

// Swap last two axes (attention helper).
template <class T>
Tensor<T> transpose_last2(const Tensor<T>& a) {
    std::vector<int64_t> perm(a.shape().size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int64_t>(i);
    std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
    return transpose(a, perm);
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int64_t axis) {
    if (parts.empty()) throw UsageError("concat: no inputs");
    Shape base = parts[0].shape();
    if (axis < 0) axis += static_cast<int64_t>(base.size());
    if (axis < 0 || axis >= static_cast<int64_t>(base.size())) throw UsageError("concat: bad axis");
    int64_t cat = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != base.size()) throw UsageError("concat: rank mismatch");
        for (size_t k = 0; k < s.size(); ++k)
            if (static_cast<int64_t>(k) != axis && s[k] != base[k])
                throw UsageError("concat: extent mismatch at axis " + std::to_string(k));
        cat += s[static_cast<size_t>(axis)];
    }
    Shape out = base;
    out[static_cast<size_t>(axis)] = cat;

    int64_t outer = 1, inner = 1;
    for (int64_t k = 0; k < axis; ++k) outer *= base[static_cast<size_t>(k)];
    for (size_t k = static_cast<size_t>(axis) + 1; k < base.size(); ++k) inner *= base[k];

    std::vector<T> v(static_cast<size_t>(shape_numel(out)));
    std::vector<int64_t> extents;
    for (const auto& p : parts) extents.push_back(p.shape()[static_cast<size_t>(axis)]);
    int64_t off = 0;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
        const auto& src = parts[pi].data();
        const int64_t block = extents[pi] * inner;
        for (int64_t o = 0; o < outer; ++o)
            std::copy_n(src.begin() + o * block, block, v.begin() + o * cat * inner + off * inner);
        off += extents[pi];
    }

    // make_op takes an initializer_list; build the node manually for N inputs
    auto n = std::make_shared<Node<T>>();
    n->shape = out;
    n->value = std::move(v);
    n->op = "concat";
    n->leaf = false;
    bool rg = false;
    for (const auto& p : parts) rg = rg || p.requires_grad();
    if (rg && grad_mode()) {
        n->requires_grad = true;
        for (const auto& p : parts) n->inputs.push_back(p.node());
        n->backward_fn = [outer, inner, cat, extents](Node<T>& nd) {
            int64_t off2 = 0;
            for (size_t pi = 0; pi < nd.inputs.size(); ++pi) {
                const int64_t block = extents[pi] * inner;
                std::vector<T> g(static_cast<size_t>(outer * block));
                for (int64_t o = 0; o < outer; ++o)
                    std::copy_n(nd.grad.begin() + o * cat * inner + off2 * inner, block,
                                g.begin() + o * block);
                accumulate_grad(nd, pi, g);
                off2 += extents[pi];
            }
        };
    }
    return Tensor<T>(std::move(n));
}

// Contiguous range [start, start+len) along one axis.
template <class T>
Tensor<T> slice(const Tensor<T>& a, int64_t axis, int64_t start, int64_t len) {
    Shape in = a.shape();
    if (axis < 0) axis += static_cast<int64_t>(in.size());
    if (axis < 0 || axis >= static_cast<int64_t>(in.size())) throw UsageError("slice: bad axis");
    const int64_t extent = in[static_cast<size_t>(axis)];
    if (start < 0 || len <= 0 || start + len > extent)
        throw UsageError("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                         ") out of bounds for extent " + std::to_string(extent));
    Shape out = in;
    out[static_cast<size_t>(axis)] = len;
    int64_t outer = 1, inner = 1;
    for (int64_t k = 0; k < axis; ++k) outer *= in[static_cast<size_t>(k)];
    for (size_t k = static_cast<size_t>(axis) + 1; k < in.size(); ++k) inner *= in[k];
    std::vector<T> v(static_cast<size_t>(outer * len * inner));
    const auto& src = a.data();
    for (int64_t o = 0; o < outer; ++o)
        std::copy_n(src.begin() + (o * extent + start) * inner, len * inner, v.begin() + o * len * inner);
    return make_op<T>("slice", out, std::move(v), {a}, [outer, inner, extent, start, len](Node<T>& n) {
        std::vector<T> g(static_cast<size_t>(outer * extent * inner), T(0));
        for (int64_t o = 0; o < outer; ++o)
            std::copy_n(n.grad.begin() + o * len * inner, len * inner,
                        g.begin() + (o * extent + start) * inner);
        accumulate_grad(n, 0, g);
    });
}

// Row lookup: out[i, :] = table[ids[i], :].
template <class T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<int64_t>& ids) {
    if (table.dim() != 2) throw UsageError("embedding: table must be 2-d");
    const int64_t v = table.size(0), d = table.size(1);
    for (int64_t id : ids)
        if (id < 0 || id >= v)
            throw UsageError("embedding: id " + std::to_string(id) + " out of range [0," + std::to_string(v) + ")");
    std::vector<T> out(ids.size() * static_cast<size_t>(d));
    const auto& tv = table.data();
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy_n(tv.begin() + ids[i] * d, d, out.begin() + static_cast<int64_t>(i) * d);
    return make_op<T>("embedding", {static_cast<int64_t>(ids.size()), d}, std::move(out), {table},
                      [ids, d, v](Node<T>& n) {
                          std::vector<T> g(static_cast<size_t>(v * d), T(0));
                          for (size_t i = 0; i < ids.size(); ++i)
                              for (int64_t j = 0; j < d; ++j)
                                  g[static_cast<size_t>(ids[i] * d + j)] += n.grad[i * static_cast<size_t>(d) + static_cast<size_t>(j)];
                          accumulate_grad(n, 0, g);
                      });
}

// ---- reductions ----

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
    T s = 0;
    for (T x : a.data()) s += x;
    return make_op<T>("sum", {1}, {s}, {a}, [](Node<T>& n) {
        std::vector<T> g(n.inputs[0]->value.size(), n.grad[0]);
        accumulate_grad(n, 0, g);
    });
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
    const T inv = T(1) / T(a.numel());
    T s = 0;
    for (T x : a.data()) s += x;
    return make_op<T>("mean", {1}, {s * inv}, {a}, [inv](Node<T>& n) {
        std::vector<T> g(n.inputs[0]->value.size(), n.grad[0] * inv);
        accumulate_grad(n, 0, g);
    });
}

namespace detail {
// Collapses shape into [outer, red, inner] around one axis.
struct AxisSplit {
    int64_t outer, red, inner;
};
inline AxisSplit axis_split(const Shape& s, int64_t axis) {
    AxisSplit a{1, s[static_cast<size_t>(axis)], 1};
    for (int64_t k = 0; k < axis; ++k) a.outer *= s[static_cast<size_t>(k)];
    for (size_t k = static_cast<size_t>(axis) + 1; k < s.size(); ++k) a.inner *= s[k];
    return a;
}
}  // namespace detail

template <class T>
Tensor<T> sum_axis(const Tensor<T>& a, int64_t axis, bool keepdim = false) {
    Shape in = a.shape();
    if (axis < 0) axis += static_cast<int64_t>(in.size());
    if (axis < 0 || axis >= static_cast<int64_t>(in.size())) throw UsageError("sum_axis: bad axis");
    const auto sp = detail::axis_split(in, axis);
    Shape out = in;
    if (keepdim)
        out[static_cast<size_t>(axis)] = 1;
    else
        out.erase(out.begin() + axis);
    if (out.empty()) out = {1};
    std::vector<T> v(static_cast<size_t>(sp.outer * sp.inner), T(0));
    const auto& src = a.data();
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t r = 0; r < sp.red; ++r) {
            const T* s = src.data() + (o * sp.red + r) * sp.inner;
            T* d = v.data() + o * sp.inner;
            for (int64_t i = 0; i < sp.inner; ++i) d[i] += s[i];
        }
    return make_op<T>("sum_axis", out, std::move(v), {a}, [sp](Node<T>& n) {
        std::vector<T> g(static_cast<size_t>(sp.outer * sp.red * sp.inner));
        for (int64_t o = 0; o < sp.outer; ++o)
            for (int64_t r = 0; r < sp.red; ++r)
                std::copy_n(n.grad.begin() + o * sp.inner, sp.inner,
                            g.begin() + (o * sp.red + r) * sp.inner);
        accumulate_grad(n, 0, g);
    });
}

template <class T>
Tensor<T> mean_axis(const Tensor<T>& a, int64_t axis, bool keepdim = false) {
    int64_t ax = axis < 0 ? axis + a.dim() : axis;
    const T inv = T(1) / T(a.shape()[static_cast<size_t>(ax)]);
    return scale(sum_axis(a, axis, keepdim), inv);
}

// Softmax over the last axis.
template <class T>
Tensor<T> softmax(const Tensor<T>& a) {
    const Shape& s = a.shape();
    const int64_t d = s.back();
    const int64_t rows = a.numel() / d;
    std::vector<T> v(a.data().size());
    const auto& x = a.data();
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = x.data() + r * d;
        T* vr = v.data() + r * d;
        T m = xr[0];
        for (int64_t j = 1; j < d; ++j) m = std::max(m, xr[j]);
        T z = 0;
        for (int64_t j = 0; j < d; ++j) {
            vr[j] = std::exp(xr[j] - m);
            z += vr[j];
        }
        const T inv = T(1) / z;
        for (int64_t j = 0; j < d; ++j) vr[j] *= inv;
    }
    return make_op<T>("softmax", s, std::move(v), {a}, [rows, d](Node<T>& n) {
        std::vector<T> g(n.grad.size());
        for (int64_t r = 0; r < rows; ++r) {
            const T* y = n.value.data() + r * d;
            const T* go = n.grad.data() + r * d;
            T dot = 0;
            for (int64_t j = 0; j < d; ++j) dot += go[j] * y[j];
            T* gi = g.data() + r * d;
            for (int64_t j = 0; j < d; ++j) gi[j] = y[j] * (go[j] - dot);
        }
        accumulate_grad(n, 0, g);
    });
}

}  // namespace pdegen::core
