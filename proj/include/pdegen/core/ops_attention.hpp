// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/core/ops_matmul.hpp"
#include "pdegen/core/ops_norm.hpp"

namespace pdegen::core {

// Scaled dot-product attention over [B, L, d] tensors (B usually batch*heads).
// `mask` is an optional additive bias broadcastable to [B, Lq, Lk]; masked-out
// positions carry a large negative value.
template <class T>
Tensor<T> scaled_dot_product_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                       const Tensor<T>& mask = Tensor<T>()) {
    if (q.dim() != 3 || k.dim() != 3 || v.dim() != 3)
        throw UsageError("attention: q/k/v must be [B,L,d]");
    if (q.size(0) != k.size(0) || k.size(0) != v.size(0) || q.size(2) != k.size(2) ||
        k.size(1) != v.size(1))
        throw UsageError("attention: incompatible shapes q" + shape_str(q.shape()) + " k" +
                         shape_str(k.shape()) + " v" + shape_str(v.shape()));
    const T inv_sqrt_d = T(1) / std::sqrt(T(q.size(2)));
    Tensor<T> scores = scale(bmm(q, transpose_last2(k)), inv_sqrt_d);
    if (mask.defined()) scores = add(scores, mask);
    Tensor<T> attn = softmax(scores);
    return bmm(attn, v);
}

}  // namespace pdegen::core
