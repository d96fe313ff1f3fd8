// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/core/ops_shape.hpp"

namespace pdegen::cond {

using core::Tensor;

enum class Modality { FirstFrame, Text, Null, Mixed };

inline const char* modality_name(Modality m) {
    switch (m) {
        case Modality::FirstFrame: return "first_frame";
        case Modality::Text: return "text";
        case Modality::Null: return "null";
        case Modality::Mixed: return "mixed";
    }
    return "?";
}

// Conditioning sequence c: [N, N_c, d_c] tokens with a validity mask.
// The pooled mean is recomputed from tokens on every call.
template <class T>
struct ConditionBatch {
    Tensor<T> tokens;  // [N, Nc, dc]
    Tensor<T> mask;    // [N, Nc], 1 = attendable, 0 = padding (constant)
    Modality modality = Modality::Null;

    int64_t batch() const { return tokens.size(0); }
    int64_t length() const { return tokens.size(1); }
    int64_t dim() const { return tokens.size(2); }

    // Masked arithmetic mean over valid tokens, [N, dc].
    Tensor<T> pooled() const {
        auto m3 = core::reshape(mask, {batch(), length(), 1});
        auto weighted = core::sum_axis(core::mul(tokens, m3), 1, false);  // [N, dc]
        auto counts = core::sum_axis(mask, 1, true);                      // [N, 1]
        auto safe = core::clamp(counts, T(1), T(1e30));
        return core::div(weighted, safe);
    }
};

// Zero token sequence of length 1 (the padded "unused modality" and the CFG
// unconditional branch).
template <class T>
ConditionBatch<T> null_condition(int64_t batch, int64_t dc) {
    ConditionBatch<T> c;
    c.tokens = Tensor<T>::zeros({batch, 1, dc});
    c.mask = Tensor<T>::filled({batch, 1}, T(1));
    c.modality = Modality::Null;
    return c;
}

// Concatenates condition blocks along the token axis (modality-slot layout
// for models that can switch conditioning modality).
template <class T>
ConditionBatch<T> concat_conditions(const std::vector<ConditionBatch<T>>& parts, Modality tag) {
    std::vector<Tensor<T>> toks, masks;
    for (const auto& p : parts) {
        toks.push_back(p.tokens);
        masks.push_back(p.mask);
    }
    ConditionBatch<T> out;
    out.tokens = core::concat(toks, 1);
    out.mask = core::concat(masks, 1);
    out.modality = tag;
    return out;
}

}  // namespace pdegen::cond
