// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/diffusion/diffusion.hpp"
#include "pdegen/models/layers.hpp"

namespace pdegen::models {

using cond::ConditionBatch;
using cond::Modality;

struct DiTConfig {
    int64_t channels = 4;       // latent channels
    int64_t t = 6, h = 8, w = 8;  // latent extents
    int64_t patch_t = 1, patch_s = 2;
    int64_t hidden = 128;
    int64_t depth = 4;
    int64_t heads = 4;
    int64_t cond_dim = 64;
    int64_t mlp_ratio = 4;
    int64_t cross_every = 1;  // cross-attention in every k-th block
    bool learned_variance = false;

    int64_t tokens_t() const { return t / patch_t; }
    int64_t tokens_s() const { return (h / patch_s) * (w / patch_s); }
    int64_t token_count() const { return tokens_t() * tokens_s(); }
    int64_t patch_dim() const { return channels * patch_t * patch_s * patch_s; }

    void validate() const {
        if (t % patch_t != 0 || h % patch_s != 0 || w % patch_s != 0)
            throw UsageError("dit: latent extents must be divisible by the patch sizes");
        if (hidden % heads != 0) throw UsageError("dit: hidden size not divisible by heads");
        if (depth < 1 || cross_every < 1) throw UsageError("dit: bad depth or cross-attention stride");
    }
};

// Spatio-temporal diffusion transformer with adaLN-Zero modulation and
// cross-attention over the conditioning sequence. All modulation projections
// and the output head start at zero, so a fresh model is the identity on its
// residual stream.
template <class T>
class DiT {
public:
    DiT() = default;

    DiT(core::ParamRegistry<T>& reg, const std::string& prefix, const DiTConfig& cfg)
        : cfg_(cfg) {
        cfg_.validate();
        patch_in_ = core::Linear<T>(reg, prefix + ".patch", cfg_.patch_dim(), cfg_.hidden);
        pos_ = reg.create(prefix + ".pos", {cfg_.token_count(), cfg_.hidden}, core::Init::Normal, 0.02);
        temb_ = TimestepEmbedding<T>(reg, prefix + ".temb", cfg_.hidden);
        cond_proj_ = core::Linear<T>(reg, prefix + ".cond_proj", cfg_.cond_dim, cfg_.hidden);
        null_token_ = reg.create(prefix + ".null_token", {1, 1, cfg_.cond_dim}, core::Init::Zero);
        for (int64_t b = 0; b < cfg_.depth; ++b) {
            Block blk;
            const std::string bp = prefix + ".block" + std::to_string(b);
            blk.use_cross = (b % cfg_.cross_every) == 0;
            blk.adaln = core::Linear<T>::zeros(reg, bp + ".adaln", cfg_.hidden, 9 * cfg_.hidden);
            blk.attn = Attention<T>(reg, bp + ".attn", cfg_.hidden, cfg_.hidden, cfg_.heads);
            if (blk.use_cross)
                blk.cross = Attention<T>(reg, bp + ".cross", cfg_.hidden, cfg_.cond_dim, cfg_.heads);
            blk.mlp = Mlp<T>(reg, bp + ".mlp", cfg_.hidden, cfg_.hidden * cfg_.mlp_ratio);
            blocks_.push_back(std::move(blk));
        }
        final_adaln_ = core::Linear<T>::zeros(reg, prefix + ".final.adaln", cfg_.hidden, 2 * cfg_.hidden);
        head_ = core::Linear<T>::zeros(reg, prefix + ".final.head", cfg_.hidden, cfg_.patch_dim());
        if (cfg_.learned_variance)
            vhead_ = core::Linear<T>::zeros(reg, prefix + ".final.vhead", cfg_.hidden, cfg_.patch_dim());
    }

    const DiTConfig& config() const { return cfg_; }

    diffusion::ModelOut<T> forward(const Tensor<T>& z, const std::vector<int>& steps,
                                   const ConditionBatch<T>& c) const {
        return run(z, steps, c, false);
    }

    // Identity-check reference: patchify + positions + final layer only.
    diffusion::ModelOut<T> blocks_removed_forward(const Tensor<T>& z, const std::vector<int>& steps,
                                                  const ConditionBatch<T>& c) const {
        return run(z, steps, c, true);
    }

private:
    struct Block {
        bool use_cross = true;
        core::Linear<T> adaln;
        Attention<T> attn;
        Attention<T> cross;
        Mlp<T> mlp;
    };

    static Tensor<T> modulate(const Tensor<T>& x, const Tensor<T>& shift, const Tensor<T>& scl) {
        return core::add(core::mul(x, core::add_scalar(scl, T(1))), shift);
    }

    diffusion::ModelOut<T> run(const Tensor<T>& z, const std::vector<int>& steps,
                               const ConditionBatch<T>& c_in, bool skip_blocks) const {
        if (z.dim() != 5 || z.size(1) != cfg_.channels || z.size(2) != cfg_.t ||
            z.size(3) != cfg_.h || z.size(4) != cfg_.w)
            throw UsageError("dit: latent shape " + core::shape_str(z.shape()) +
                             " does not match the configured extents");
        const int64_t n = z.size(0);
        if (static_cast<int64_t>(steps.size()) != n)
            throw UsageError("dit: one diffusion step per batch element required");

        // null modality swaps in the learned null token
        ConditionBatch<T> c = c_in;
        if (!c.tokens.defined() || c.modality == Modality::Null) {
            std::vector<Tensor<T>> rows(static_cast<size_t>(n), null_token_);
            c.tokens = core::concat(rows, 0);
            c.mask = Tensor<T>::filled({n, 1}, T(1));
        }
        if (c.dim() != cfg_.cond_dim)
            throw UsageError("dit: conditioning dim mismatch");

        // patchify
        auto xr = core::reshape(z, {n, cfg_.channels, cfg_.tokens_t(), cfg_.patch_t, cfg_.h / cfg_.patch_s,
                                    cfg_.patch_s, cfg_.w / cfg_.patch_s, cfg_.patch_s});
        auto xp = core::transpose(xr, {0, 2, 4, 6, 3, 5, 7, 1});
        auto tokens = core::reshape(xp, {n, cfg_.token_count(), cfg_.patch_dim()});
        auto x = core::add(patch_in_.forward(tokens), core::reshape(pos_, {1, cfg_.token_count(), cfg_.hidden}));

        // conditioning vector for adaLN: timestep embedding + pooled tokens
        auto cvec = core::add(temb_.forward(steps), cond_proj_.forward(c.pooled()));

        if (!skip_blocks) {
            for (const auto& blk : blocks_) {
                auto mods = blk.adaln.forward(core::silu(cvec));  // [N, 9h]
                auto m = [&](int i) {
                    return core::reshape(core::slice(mods, 1, i * cfg_.hidden, cfg_.hidden),
                                         {n, 1, cfg_.hidden});
                };
                auto h1 = modulate(core::layer_norm(x), m(0), m(1));
                x = core::add(x, core::mul(m(2), blk.attn.forward(h1, h1)));
                if (blk.use_cross) {
                    auto hc = modulate(core::layer_norm(x), m(3), m(4));
                    x = core::add(x, core::mul(m(5), blk.cross.forward(hc, c.tokens, c.mask)));
                }
                auto h2 = modulate(core::layer_norm(x), m(6), m(7));
                x = core::add(x, core::mul(m(8), blk.mlp.forward(h2)));
            }
        }

        auto fmods = final_adaln_.forward(core::silu(cvec));
        auto fm = [&](int i) {
            return core::reshape(core::slice(fmods, 1, i * cfg_.hidden, cfg_.hidden), {n, 1, cfg_.hidden});
        };
        auto xf = modulate(core::layer_norm(x), fm(0), fm(1));

        diffusion::ModelOut<T> out;
        out.eps = unpatchify(head_.forward(xf), n);
        if (cfg_.learned_variance) out.vprime = core::sigmoid(unpatchify(vhead_.forward(xf), n));
        return out;
    }

    Tensor<T> unpatchify(const Tensor<T>& tokens, int64_t n) const {
        auto xr = core::reshape(tokens, {n, cfg_.tokens_t(), cfg_.h / cfg_.patch_s, cfg_.w / cfg_.patch_s,
                                         cfg_.patch_t, cfg_.patch_s, cfg_.patch_s, cfg_.channels});
        auto xp = core::transpose(xr, {0, 7, 1, 4, 2, 5, 3, 6});
        return core::reshape(xp, {n, cfg_.channels, cfg_.t, cfg_.h, cfg_.w});
    }

    DiTConfig cfg_;
    core::Linear<T> patch_in_;
    Tensor<T> pos_;
    TimestepEmbedding<T> temb_;
    core::Linear<T> cond_proj_;
    Tensor<T> null_token_;
    std::vector<Block> blocks_;
    core::Linear<T> final_adaln_;
    core::Linear<T> head_;
    core::Linear<T> vhead_;
};

}  // namespace pdegen::models
