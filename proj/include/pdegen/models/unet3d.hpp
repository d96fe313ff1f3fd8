// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/core/ops_conv.hpp"
#include "pdegen/diffusion/diffusion.hpp"
#include "pdegen/models/layers.hpp"

namespace pdegen::models {

struct UnetConfig {
    int64_t channels = 4;
    int64_t t = 6, h = 8, w = 8;
    int64_t base_width = 16;
    std::vector<int64_t> mults{1, 2};
    int64_t heads = 4;
    int64_t cond_dim = 64;

    int64_t downs() const { return static_cast<int64_t>(mults.size()) - 1; }

    void validate() const {
        if (mults.empty()) throw UsageError("unet: need at least one stage");
        const int64_t f = int64_t(1) << downs();
        if (t % f != 0 || h % f != 0 || w % f != 0)
            throw UsageError("unet: extents must be divisible by 2^" + std::to_string(downs()));
    }
};

namespace detail {

inline int64_t norm_groups(int64_t channels) {
    for (int64_t g : {8, 4, 2})
        if (channels % g == 0 && channels >= g) return g;
    return 1;
}

template <class T>
struct ResBlock3d {
    Tensor<T> g1w, g1b, g2w, g2b;
    Tensor<T> c1w, c1b, c2w, c2b;
    core::Linear<T> emb;
    Tensor<T> skip_w;  // 1x1x1 when channels change
    int64_t cin = 0, cout = 0;

    ResBlock3d() = default;
    ResBlock3d(core::ParamRegistry<T>& reg, const std::string& p, int64_t cin_, int64_t cout_,
               int64_t emb_dim)
        : cin(cin_), cout(cout_) {
        g1w = reg.create(p + ".g1.w", {cin}, core::Init::One);
        g1b = reg.create(p + ".g1.b", {cin}, core::Init::Zero);
        c1w = reg.create(p + ".c1.w", {cout, cin, 3, 3, 3}, core::Init::LecunUniform);
        c1b = reg.create(p + ".c1.b", {cout}, core::Init::Zero);
        emb = core::Linear<T>(reg, p + ".emb", emb_dim, cout);
        g2w = reg.create(p + ".g2.w", {cout}, core::Init::One);
        g2b = reg.create(p + ".g2.b", {cout}, core::Init::Zero);
        c2w = reg.create(p + ".c2.w", {cout, cout, 3, 3, 3}, core::Init::LecunUniform);
        c2b = reg.create(p + ".c2.b", {cout}, core::Init::Zero);
        if (cin != cout) skip_w = reg.create(p + ".skip.w", {cout, cin, 1, 1, 1}, core::Init::LecunUniform);
    }

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& temb) const {
        auto h = core::conv3d(core::silu(core::group_norm(x, norm_groups(cin), g1w, g1b)), c1w, c1b, 1, 1);
        // timestep embedding enters as a per-channel bias
        auto e = emb.forward(core::silu(temb));  // [N, cout]
        h = core::add(h, core::reshape(e, {x.size(0), cout, 1, 1, 1}));
        h = core::conv3d(core::silu(core::group_norm(h, norm_groups(cout), g2w, g2b)), c2w, c2b, 1, 1);
        auto s = skip_w.defined() ? core::conv3d(x, skip_w, Tensor<T>(), 1, 0) : x;
        return core::add(s, h);
    }
};

}  // namespace detail

// 3-d convolutional encoder/decoder with skip connections; the conditioning
// sequence enters through a bottleneck cross-attention layer whose output
// projection starts at zero.
template <class T>
class Unet3d {
public:
    Unet3d() = default;

    Unet3d(core::ParamRegistry<T>& reg, const std::string& prefix, const UnetConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        const int64_t emb_dim = cfg_.base_width * 4;
        temb_ = TimestepEmbedding<T>(reg, prefix + ".temb", emb_dim);
        stem_w_ = reg.create(prefix + ".stem.w", {cfg_.base_width, cfg_.channels, 3, 3, 3},
                             core::Init::LecunUniform);
        stem_b_ = reg.create(prefix + ".stem.b", {cfg_.base_width}, core::Init::Zero);
        int64_t ch = cfg_.base_width;
        for (size_t s = 0; s < cfg_.mults.size(); ++s) {
            const int64_t out = cfg_.base_width * cfg_.mults[s];
            enc_.emplace_back(reg, prefix + ".enc" + std::to_string(s), ch, out, emb_dim);
            ch = out;
            if (s + 1 < cfg_.mults.size()) {
                down_w_.push_back(reg.create(prefix + ".down" + std::to_string(s) + ".w",
                                             {ch, ch, 3, 3, 3}, core::Init::LecunUniform));
                down_b_.push_back(reg.create(prefix + ".down" + std::to_string(s) + ".b", {ch},
                                             core::Init::Zero));
            }
        }
        mid1_ = detail::ResBlock3d<T>(reg, prefix + ".mid1", ch, ch, emb_dim);
        cross_ = Attention<T>(reg, prefix + ".cross", ch, cfg_.cond_dim, cfg_.heads, /*zero_out=*/true);
        mid2_ = detail::ResBlock3d<T>(reg, prefix + ".mid2", ch, ch, emb_dim);
        for (size_t s = cfg_.mults.size(); s-- > 0;) {
            const int64_t out = cfg_.base_width * cfg_.mults[s];
            // decoder blocks consume the skip concatenation
            dec_.emplace_back(reg, prefix + ".dec" + std::to_string(s), ch + out, out, emb_dim);
            ch = out;
            if (s > 0) {
                const int64_t nxt = cfg_.base_width * cfg_.mults[s - 1];
                up_w_.push_back(reg.create(prefix + ".up" + std::to_string(s) + ".w",
                                           {ch, nxt, 2, 2, 2}, core::Init::LecunUniform));
                up_b_.push_back(
                    reg.create(prefix + ".up" + std::to_string(s) + ".b", {nxt}, core::Init::Zero));
                ch = nxt;
            }
        }
        out_gw_ = reg.create(prefix + ".out.gw", {ch}, core::Init::One);
        out_gb_ = reg.create(prefix + ".out.gb", {ch}, core::Init::Zero);
        out_w_ = reg.create(prefix + ".out.w", {cfg_.channels, ch, 3, 3, 3}, core::Init::Zero);
        out_b_ = reg.create(prefix + ".out.b", {cfg_.channels}, core::Init::Zero);
    }

    const UnetConfig& config() const { return cfg_; }

    diffusion::ModelOut<T> forward(const Tensor<T>& z, const std::vector<int>& steps,
                                   const cond::ConditionBatch<T>& c_in) const {
        if (z.dim() != 5 || z.size(1) != cfg_.channels || z.size(2) != cfg_.t || z.size(3) != cfg_.h ||
            z.size(4) != cfg_.w)
            throw UsageError("unet: latent shape " + core::shape_str(z.shape()) + " mismatch");
        const int64_t n = z.size(0);
        cond::ConditionBatch<T> c = c_in;
        if (!c.tokens.defined()) c = cond::null_condition<T>(n, cfg_.cond_dim);

        auto temb = temb_.forward(steps);
        auto x = core::conv3d(z, stem_w_, stem_b_, 1, 1);
        std::vector<Tensor<T>> skips;
        for (size_t s = 0; s < enc_.size(); ++s) {
            x = enc_[s].forward(x, temb);
            skips.push_back(x);
            if (s < down_w_.size())
                x = core::conv3d(x, down_w_[s], down_b_[s], 2, 1);
        }

        x = mid1_.forward(x, temb);
        {
            // flatten the hidden grid into tokens and attend to the condition
            const int64_t ch = x.size(1), tt = x.size(2), hh = x.size(3), ww = x.size(4);
            auto tokens = core::reshape(core::transpose(core::reshape(x, {n, ch, tt * hh * ww}), {0, 2, 1}),
                                        {n, tt * hh * ww, ch});
            tokens = core::add(tokens, cross_.forward(core::layer_norm(tokens), c.tokens, c.mask));
            x = core::reshape(core::transpose(tokens, {0, 2, 1}), {n, ch, tt, hh, ww});
        }
        x = mid2_.forward(x, temb);

        size_t up_i = 0;
        for (size_t i = 0; i < dec_.size(); ++i) {
            x = dec_[i].forward(core::concat<T>({x, skips[skips.size() - 1 - i]}, 1), temb);
            if (up_i < up_w_.size()) {
                x = core::conv_transpose3d(x, up_w_[up_i], up_b_[up_i], 2, 0);
                ++up_i;
            }
        }

        diffusion::ModelOut<T> out;
        out.eps = core::conv3d(core::silu(core::group_norm(x, detail::norm_groups(x.size(1)), out_gw_, out_gb_)),
                               out_w_, out_b_, 1, 1);
        return out;
    }

private:
    UnetConfig cfg_;
    TimestepEmbedding<T> temb_;
    Tensor<T> stem_w_, stem_b_;
    std::vector<detail::ResBlock3d<T>> enc_, dec_;
    std::vector<Tensor<T>> down_w_, down_b_, up_w_, up_b_;
    detail::ResBlock3d<T> mid1_, mid2_;
    Attention<T> cross_;
    Tensor<T> out_gw_, out_gb_, out_w_, out_b_;
};

}  // namespace pdegen::models
