// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/core/module.hpp"
#include "pdegen/core/ops_elementwise.hpp"
#include "pdegen/core/ops_matmul.hpp"

namespace pdegen::geo {

// Small MLP kappa(y_query, y_source): [P, 2*dim] -> per-channel gate [P, d_p]
// or full mixing matrix [P, d_p*d_p]. The final bias starts at the identity
// gate so the initial aggregation is close to a local average.
template <class T>
class KernelNet {
public:
    KernelNet() = default;

    KernelNet(core::ParamRegistry<T>& reg, const std::string& prefix, int coord_dim, int channels,
              int hidden, int depth, bool full_matrix)
        : coord_dim_(coord_dim), channels_(channels), full_matrix_(full_matrix) {
        const int64_t in = 2 * coord_dim;
        const int64_t out = full_matrix ? int64_t(channels) * channels : channels;
        int64_t prev = in;
        for (int l = 0; l < depth; ++l) {
            layers_.emplace_back(reg, prefix + ".h" + std::to_string(l), prev, hidden);
            prev = hidden;
        }
        head_.w = reg.create(prefix + ".out.w", {prev, out}, core::Init::Uniform, 0.05);
        head_.b = reg.create(prefix + ".out.b", {out}, core::Init::Zero);
        auto& b = head_.b.mut_data();
        if (full_matrix) {
            for (int i = 0; i < channels; ++i) b[static_cast<size_t>(i * channels + i)] = T(1);
        } else {
            std::fill(b.begin(), b.end(), T(1));
        }
    }

    // pair_features: [P, 2*dim] -> [P, channels] or [P, channels*channels]
    core::Tensor<T> forward(const core::Tensor<T>& pair_features) const {
        core::Tensor<T> h = pair_features;
        for (const auto& l : layers_) h = core::silu(l.forward(h));
        return head_.forward(h);
    }

    int coord_dim() const { return coord_dim_; }
    int channels() const { return channels_; }
    bool full_matrix() const { return full_matrix_; }

private:
    int coord_dim_ = 0;
    int channels_ = 0;
    bool full_matrix_ = false;
    std::vector<core::Linear<T>> layers_;
    core::Linear<T> head_;
};

}  // namespace pdegen::geo
