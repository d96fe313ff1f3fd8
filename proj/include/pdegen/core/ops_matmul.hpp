// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/core/ops_shape.hpp"
#include "pdegen/core/tensor.hpp"

namespace pdegen::core {

namespace detail {

// C[m,n] += A[m,k] * B[k,n], row-major. The k-inner/j-vectorized form keeps
// B and C rows streaming, which the compiler turns into FMA loops.
template <class T>
void gemm_acc(const T* __restrict a, const T* __restrict b, T* __restrict c,
              int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        int64_t p = 0;
        for (; p + 4 <= k; p += 4) {
            const T a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
            const T* b0 = b + p * n;
            const T* b1 = b0 + n;
            const T* b2 = b1 + n;
            const T* b3 = b2 + n;
            for (int64_t j = 0; j < n; ++j)
                crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; p < k; ++p) {
            const T ap = arow[p];
            const T* brow = b + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += ap * brow[j];
        }
    }
}

// C[m,n] += A[m,k] * B^T where B is [n,k] (dot-product form, both rows contiguous).
template <class T>
void gemm_bt_acc(const T* __restrict a, const T* __restrict b, T* __restrict c,
                 int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = 0;
            for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C[k,n] += A^T * B where A is [m,k], B is [m,n].
template <class T>
void gemm_at_acc(const T* __restrict a, const T* __restrict b, T* __restrict c,
                 int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        const T* brow = b + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const T ap = arow[p];
            T* crow = c + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += ap * brow[j];
        }
    }
}

}  // namespace detail

// [m,k] x [k,n] -> [m,n]
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.dim() != 2 || b.dim() != 2)
        throw UsageError("matmul: expects 2-d tensors, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const int64_t m = a.size(0), k = a.size(1), k2 = b.size(0), n = b.size(1);
    if (k != k2)
        throw UsageError("matmul: inner extents differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    std::vector<T> v(static_cast<size_t>(m * n), T(0));
    detail::gemm_acc(a.data().data(), b.data().data(), v.data(), m, k, n);
    return make_op<T>("matmul", {m, n}, std::move(v), {a, b}, [m, k, n](Node<T>& nd) {
        const auto& av = nd.inputs[0]->value;
        const auto& bv = nd.inputs[1]->value;
        if (nd.inputs[0]->requires_grad) {
            std::vector<T> ga(static_cast<size_t>(m * k), T(0));
            detail::gemm_bt_acc(nd.grad.data(), bv.data(), ga.data(), m, n, k);
            accumulate_grad(nd, 0, ga);
        }
        if (nd.inputs[1]->requires_grad) {
            std::vector<T> gb(static_cast<size_t>(k * n), T(0));
            detail::gemm_at_acc(av.data(), nd.grad.data(), gb.data(), m, k, n);
            accumulate_grad(nd, 1, gb);
        }
    });
}

// [B,m,k] x [B,k,n] -> [B,m,n]
template <class T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.dim() != 3 || b.dim() != 3) throw UsageError("bmm: expects 3-d tensors");
    const int64_t bs = a.size(0), m = a.size(1), k = a.size(2), n = b.size(2);
    if (b.size(0) != bs || b.size(1) != k)
        throw UsageError("bmm: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<T> v(static_cast<size_t>(bs * m * n), T(0));
    for (int64_t i = 0; i < bs; ++i)
        detail::gemm_acc(a.data().data() + i * m * k, b.data().data() + i * k * n,
                         v.data() + i * m * n, m, k, n);
    return make_op<T>("bmm", {bs, m, n}, std::move(v), {a, b}, [bs, m, k, n](Node<T>& nd) {
        const auto& av = nd.inputs[0]->value;
        const auto& bv = nd.inputs[1]->value;
        if (nd.inputs[0]->requires_grad) {
            std::vector<T> ga(static_cast<size_t>(bs * m * k), T(0));
            for (int64_t i = 0; i < bs; ++i)
                detail::gemm_bt_acc(nd.grad.data() + i * m * n, bv.data() + i * k * n,
                                    ga.data() + i * m * k, m, n, k);
            accumulate_grad(nd, 0, ga);
        }
        if (nd.inputs[1]->requires_grad) {
            std::vector<T> gb(static_cast<size_t>(bs * k * n), T(0));
            for (int64_t i = 0; i < bs; ++i)
                detail::gemm_at_acc(av.data() + i * m * k, nd.grad.data() + i * m * n,
                                    gb.data() + i * k * n, m, k, n);
            accumulate_grad(nd, 1, gb);
        }
    });
}

// x[..., k] x w[k, n] + b[n]; the leading axes are flattened through matmul.
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b = Tensor<T>()) {
    const int64_t k = x.shape().back();
    Shape out_shape = x.shape();
    out_shape.back() = w.size(1);
    Tensor<T> flat = reshape(x, {-1, k});
    Tensor<T> y = matmul(flat, w);
    if (b.defined()) y = add(y, b);
    return reshape(y, out_shape);
}

}  // namespace pdegen::core
