// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/cond/condition.hpp"
#include "pdegen/cond/vocab.hpp"
#include "pdegen/models/layers.hpp"

namespace pdegen::cond {

// Small from-scratch transformer encoder over template captions: token +
// learned position embeddings, pre-LN blocks with padding-masked attention,
// final layer norm. Padding positions never influence valid tokens.
template <class T>
class TextEncoder {
public:
    TextEncoder() = default;

    TextEncoder(core::ParamRegistry<T>& reg, const std::string& prefix, int64_t vocab_size,
                int64_t dim, int64_t max_len, int64_t layers = 2, int64_t heads = 4)
        : dim_(dim), max_len_(max_len) {
        embed_ = reg.create(prefix + ".embed", {vocab_size, dim}, core::Init::Normal, 0.02);
        pos_ = reg.create(prefix + ".pos", {max_len, dim}, core::Init::Normal, 0.02);
        for (int64_t l = 0; l < layers; ++l) {
            Layer lay;
            const std::string lp = prefix + ".layer" + std::to_string(l);
            lay.attn = models::Attention<T>(reg, lp + ".attn", dim, dim, heads);
            lay.mlp = models::Mlp<T>(reg, lp + ".mlp", dim, 4 * dim);
            layers_.push_back(std::move(lay));
        }
        final_g_ = reg.create(prefix + ".final.g", {dim}, core::Init::One);
        final_b_ = reg.create(prefix + ".final.b", {dim}, core::Init::Zero);
    }

    int64_t dim() const { return dim_; }
    int64_t max_len() const { return max_len_; }

    // Encodes right-padded id sequences (shared length) to a condition batch.
    ConditionBatch<T> forward(const std::vector<std::vector<int64_t>>& ids) const {
        if (ids.empty()) throw UsageError("text encoder: empty batch");
        const int64_t n = static_cast<int64_t>(ids.size());
        int64_t len = 0;
        for (const auto& row : ids) len = std::max<int64_t>(len, static_cast<int64_t>(row.size()));
        if (len == 0) throw UsageError("text encoder: empty caption");
        if (len > max_len_) throw UsageError("text encoder: sequence longer than the position table");

        std::vector<int64_t> flat(static_cast<size_t>(n * len), Vocabulary::pad_id);
        std::vector<T> mask(static_cast<size_t>(n * len), T(0));
        for (int64_t i = 0; i < n; ++i)
            for (size_t j = 0; j < ids[static_cast<size_t>(i)].size(); ++j) {
                flat[static_cast<size_t>(i * len) + j] = ids[static_cast<size_t>(i)][j];
                mask[static_cast<size_t>(i * len) + j] = T(1);
            }

        auto x = core::reshape(core::embedding(embed_, flat), {n, len, dim_});
        std::vector<int64_t> pos_ids(static_cast<size_t>(len));
        for (int64_t j = 0; j < len; ++j) pos_ids[static_cast<size_t>(j)] = j;
        auto pos = core::reshape(core::embedding(pos_, pos_ids), {1, len, dim_});
        x = core::add(x, pos);

        ConditionBatch<T> out;
        out.mask = core::Tensor<T>::from_data({n, len}, std::move(mask));
        for (const auto& lay : layers_) {
            auto h = core::layer_norm(x);
            x = core::add(x, lay.attn.forward(h, h, out.mask));
            x = core::add(x, lay.mlp.forward(core::layer_norm(x)));
        }
        out.tokens = core::layer_norm(x, final_g_, final_b_);
        out.modality = Modality::Text;
        return out;
    }

private:
    struct Layer {
        models::Attention<T> attn;
        models::Mlp<T> mlp;
    };

    int64_t dim_ = 0, max_len_ = 0;
    core::Tensor<T> embed_, pos_;
    std::vector<Layer> layers_;
    core::Tensor<T> final_g_, final_b_;
};

}  // namespace pdegen::cond
