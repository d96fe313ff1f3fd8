// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/core/ops_conv.hpp"
#include "pdegen/core/ops_norm.hpp"
#include "pdegen/models/layers.hpp"

namespace pdegen::ae {

using core::Tensor;

struct AutoencoderConfig {
    int64_t channels = 3;          // physical channels d_p
    int64_t t = 24, h = 32, w = 32;  // latent grid extents entering the CNN
    int64_t width = 12;
    int64_t stages = 3;            // downsamples between stages: stages-1
    int64_t factor = 2;
    int64_t latent_channels = 4;
    double kl_weight = 2e-7;
    bool attn = true;
    bool kl_mean_reduction = false;  // default: sum over latent entries
    bool recon_l2 = false;           // default: L1

    int64_t f_total() const {
        int64_t f = 1;
        for (int64_t s = 1; s < stages; ++s) f *= factor;
        return f;
    }
    int64_t lt() const { return t / f_total(); }
    int64_t lh() const { return h / f_total(); }
    int64_t lw() const { return w / f_total(); }

    // input scalars per latent scalar
    double compression_ratio() const {
        return double(t * h * w * channels) / double(lt() * lh() * lw() * latent_channels);
    }

    void validate() const {
        if (stages < 2) throw UsageError("autoencoder: need at least 2 stages");
        if (factor != 2) throw UsageError("autoencoder: only factor 2 is supported");
        const int64_t f = f_total();
        if (t % f || h % f || w % f)
            throw UsageError("autoencoder: grid extents " + std::to_string(t) + "x" +
                             std::to_string(h) + "x" + std::to_string(w) +
                             " are not divisible by the total downsample factor " + std::to_string(f));
        if (width % 4 != 0 && width % 2 != 0) throw UsageError("autoencoder: width must be even");
    }
};

template <class T>
struct Latent {
    Tensor<T> mean;    // [N, d_l, t', h', w']
    Tensor<T> logvar;  // clamped to [-30, 20]
};

// z = mean + exp(logvar/2) * xi, xi ~ N(0, I)
template <class T>
Tensor<T> reparameterize(const Latent<T>& lat, core::Rng& rng) {
    auto xi = Tensor<T>::zeros(lat.mean.shape());
    for (auto& v : xi.mut_data()) v = T(rng.normal());
    return core::add(lat.mean, core::mul(core::exp(core::scale(lat.logvar, T(0.5))), xi));
}

// 0.5 * (mean^2 + var - 1 - logvar), summed over latent entries (or averaged
// with mean reduction), then averaged over the batch.
template <class T>
Tensor<T> kl_loss(const Latent<T>& lat, bool mean_reduction = false) {
    auto var = core::exp(lat.logvar);
    auto elem = core::scale(
        core::sub(core::add(core::square(lat.mean), var),
                  core::add_scalar(lat.logvar, T(1))),
        T(0.5));
    const int64_t batch = lat.mean.size(0);
    const int64_t per = lat.mean.numel() / batch;
    Tensor<T> total = core::sum(elem);
    if (mean_reduction) return core::scale(total, T(1.0 / double(lat.mean.numel())));
    return core::scale(total, T(1.0 / double(batch)));
    (void)per;
}

namespace detail {

inline int64_t norm_groups(int64_t channels) {
    for (int64_t g : {8, 4, 2})
        if (channels % g == 0 && channels >= g) return g;
    return 1;
}

template <class T>
struct ResBlock {
    Tensor<T> g1w, g1b, g2w, g2b, c1w, c1b, c2w, c2b, skip_w;
    int64_t cin = 0, cout = 0;

    ResBlock() = default;
    ResBlock(core::ParamRegistry<T>& reg, const std::string& p, int64_t cin_, int64_t cout_)
        : cin(cin_), cout(cout_) {
        g1w = reg.create(p + ".g1.w", {cin}, core::Init::One);
        g1b = reg.create(p + ".g1.b", {cin}, core::Init::Zero);
        c1w = reg.create(p + ".c1.w", {cout, cin, 3, 3, 3}, core::Init::LecunUniform);
        c1b = reg.create(p + ".c1.b", {cout}, core::Init::Zero);
        g2w = reg.create(p + ".g2.w", {cout}, core::Init::One);
        g2b = reg.create(p + ".g2.b", {cout}, core::Init::Zero);
        c2w = reg.create(p + ".c2.w", {cout, cout, 3, 3, 3}, core::Init::LecunUniform);
        c2b = reg.create(p + ".c2.b", {cout}, core::Init::Zero);
        if (cin != cout)
            skip_w = reg.create(p + ".skip.w", {cout, cin, 1, 1, 1}, core::Init::LecunUniform);
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        auto h = core::conv3d(core::silu(core::group_norm(x, norm_groups(cin), g1w, g1b)), c1w, c1b, 1, 1);
        h = core::conv3d(core::silu(core::group_norm(h, norm_groups(cout), g2w, g2b)), c2w, c2b, 1, 1);
        auto s = skip_w.defined() ? core::conv3d(x, skip_w, Tensor<T>(), 1, 0) : x;
        return core::add(s, h);
    }
};

// Single-head self-attention over the flattened grid at the bottleneck.
template <class T>
struct AttnBlock {
    Tensor<T> gw, gb;
    models::Attention<T> attn;

    AttnBlock() = default;
    AttnBlock(core::ParamRegistry<T>& reg, const std::string& p, int64_t channels)
        : gw(reg.create(p + ".g.w", {channels}, core::Init::One)),
          gb(reg.create(p + ".g.b", {channels}, core::Init::Zero)),
          attn(reg, p + ".attn", channels, channels, 1, /*zero_out=*/true) {}

    Tensor<T> forward(const Tensor<T>& x) const {
        const int64_t n = x.size(0), c = x.size(1);
        const int64_t l = x.numel() / (n * c);
        auto norm = core::group_norm(x, norm_groups(c), gw, gb);
        auto tokens = core::transpose(core::reshape(norm, {n, c, l}), {0, 2, 1});
        auto out = attn.forward(tokens, tokens);
        auto back = core::reshape(core::transpose(out, {0, 2, 1}), x.shape());
        return core::add(x, back);
    }
};

}  // namespace detail

// Convolutional VAE over the uniform latent grid: stride-f stem, residual
// stages with channel doubling, optional bottleneck attention, and zero-init
// mean/logvar heads.
template <class T>
class ConvVae {
public:
    ConvVae() = default;

    ConvVae(core::ParamRegistry<T>& reg, const std::string& prefix, const AutoencoderConfig& cfg)
        : cfg_(cfg) {
        cfg_.validate();
        const int64_t downs = cfg_.stages - 1;
        int64_t ch = cfg_.width;
        enc_stem_w_ = reg.create(prefix + ".enc.stem.w", {ch, cfg_.channels, 3, 3, 3}, core::Init::LecunUniform);
        enc_stem_b_ = reg.create(prefix + ".enc.stem.b", {ch}, core::Init::Zero);
        for (int64_t d = 1; d < downs; ++d) {
            enc_res_.emplace_back(reg, prefix + ".enc.res" + std::to_string(d), ch, ch);
            enc_down_w_.push_back(reg.create(prefix + ".enc.down" + std::to_string(d) + ".w",
                                             {ch * 2, ch, 3, 3, 3}, core::Init::LecunUniform));
            enc_down_b_.push_back(
                reg.create(prefix + ".enc.down" + std::to_string(d) + ".b", {ch * 2}, core::Init::Zero));
            ch *= 2;
        }
        enc_mid_ = detail::ResBlock<T>(reg, prefix + ".enc.mid", ch, ch);
        if (cfg_.attn) enc_attn_ = detail::AttnBlock<T>(reg, prefix + ".enc.attn", ch);
        enc_out_g_ = reg.create(prefix + ".enc.out.g", {ch}, core::Init::One);
        enc_out_b_ = reg.create(prefix + ".enc.out.gb", {ch}, core::Init::Zero);
        enc_head_w_ = reg.create(prefix + ".enc.head.w", {2 * cfg_.latent_channels, ch, 3, 3, 3},
                                 core::Init::Zero);
        enc_head_b_ = reg.create(prefix + ".enc.head.b", {2 * cfg_.latent_channels}, core::Init::Zero);
        bottleneck_ch_ = ch;

        dec_stem_w_ = reg.create(prefix + ".dec.stem.w", {ch, cfg_.latent_channels, 3, 3, 3},
                                 core::Init::LecunUniform);
        dec_stem_b_ = reg.create(prefix + ".dec.stem.b", {ch}, core::Init::Zero);
        dec_mid_ = detail::ResBlock<T>(reg, prefix + ".dec.mid", ch, ch);
        if (cfg_.attn) dec_attn_ = detail::AttnBlock<T>(reg, prefix + ".dec.attn", ch);
        for (int64_t d = downs; d-- > 0;) {
            const int64_t next = d == 0 ? cfg_.width : std::max(cfg_.width, ch / 2);
            dec_up_w_.push_back(reg.create(prefix + ".dec.up" + std::to_string(d) + ".w",
                                           {ch, next, 2, 2, 2}, core::Init::LecunUniform));
            dec_up_b_.push_back(reg.create(prefix + ".dec.up" + std::to_string(d) + ".b", {next},
                                           core::Init::Zero));
            dec_res_.emplace_back(reg, prefix + ".dec.res" + std::to_string(d), next, next);
            ch = next;
        }
        dec_out_g_ = reg.create(prefix + ".dec.out.g", {ch}, core::Init::One);
        dec_out_b_ = reg.create(prefix + ".dec.out.gb", {ch}, core::Init::Zero);
        dec_head_w_ = reg.create(prefix + ".dec.head.w", {cfg_.channels, ch, 3, 3, 3},
                                 core::Init::LecunUniform);
        dec_head_b_ = reg.create(prefix + ".dec.head.b", {cfg_.channels}, core::Init::Zero);
    }

    const AutoencoderConfig& config() const { return cfg_; }

    // grid [N, d_p, T, H, W] -> latent mean/logvar [N, d_l, t', h', w']
    Latent<T> encode(const Tensor<T>& grid) const {
        check_input(grid, cfg_.channels, cfg_.t, cfg_.h, cfg_.w, "encode");
        auto x = core::conv3d(grid, enc_stem_w_, enc_stem_b_, cfg_.factor, 1);
        for (size_t d = 0; d < enc_res_.size(); ++d) {
            x = enc_res_[d].forward(x);
            x = core::conv3d(x, enc_down_w_[d], enc_down_b_[d], cfg_.factor, 1);
        }
        x = enc_mid_.forward(x);
        if (cfg_.attn) x = enc_attn_.forward(x);
        x = core::silu(core::group_norm(x, detail::norm_groups(bottleneck_ch_), enc_out_g_, enc_out_b_));
        auto heads = core::conv3d(x, enc_head_w_, enc_head_b_, 1, 1);
        Latent<T> lat;
        lat.mean = core::slice(heads, 1, 0, cfg_.latent_channels);
        lat.logvar = core::clamp(core::slice(heads, 1, cfg_.latent_channels, cfg_.latent_channels),
                                 T(-30), T(20));
        return lat;
    }

    // z [N, d_l, t', h', w'] -> grid [N, d_p, T, H, W]
    Tensor<T> decode(const Tensor<T>& z) const {
        check_input(z, cfg_.latent_channels, cfg_.lt(), cfg_.lh(), cfg_.lw(), "decode");
        auto x = core::conv3d(z, dec_stem_w_, dec_stem_b_, 1, 1);
        x = dec_mid_.forward(x);
        if (cfg_.attn) x = dec_attn_.forward(x);
        for (size_t d = 0; d < dec_up_w_.size(); ++d) {
            x = core::conv_transpose3d(x, dec_up_w_[d], dec_up_b_[d], 2, 0);
            x = dec_res_[d].forward(x);
        }
        x = core::silu(core::group_norm(x, detail::norm_groups(x.size(1)), dec_out_g_, dec_out_b_));
        return core::conv3d(x, dec_head_w_, dec_head_b_, 1, 1);
    }

private:
    static void check_input(const Tensor<T>& x, int64_t c, int64_t t, int64_t h, int64_t w,
                            const char* what) {
        if (x.dim() != 5 || x.size(1) != c || x.size(2) != t || x.size(3) != h || x.size(4) != w)
            throw UsageError(std::string("autoencoder ") + what + ": got " + core::shape_str(x.shape()) +
                             ", want [N," + std::to_string(c) + "," + std::to_string(t) + "," +
                             std::to_string(h) + "," + std::to_string(w) + "]");
    }

    AutoencoderConfig cfg_;
    int64_t bottleneck_ch_ = 0;
    Tensor<T> enc_stem_w_, enc_stem_b_;
    std::vector<detail::ResBlock<T>> enc_res_;
    std::vector<Tensor<T>> enc_down_w_, enc_down_b_;
    detail::ResBlock<T> enc_mid_;
    detail::AttnBlock<T> enc_attn_;
    Tensor<T> enc_out_g_, enc_out_b_, enc_head_w_, enc_head_b_;
    Tensor<T> dec_stem_w_, dec_stem_b_;
    detail::ResBlock<T> dec_mid_;
    detail::AttnBlock<T> dec_attn_;
    std::vector<Tensor<T>> dec_up_w_, dec_up_b_;
    std::vector<detail::ResBlock<T>> dec_res_;
    Tensor<T> dec_out_g_, dec_out_b_, dec_head_w_, dec_head_b_;
};

// s = 1/std over all entries of the given z draws (a single global scalar).
template <class T>
double estimate_latent_scale(const std::vector<Tensor<T>>& z_draws) {
    int64_t count = 0;
    double mean = 0;
    for (const auto& z : z_draws) {
        for (T v : z.data()) mean += double(v);
        count += z.numel();
    }
    if (count < 16) throw UsageError("latent scale: need at least 16 latent entries");
    mean /= double(count);
    double var = 0;
    for (const auto& z : z_draws)
        for (T v : z.data()) {
            const double d = double(v) - mean;
            var += d * d;
        }
    var /= double(count);
    const double std = std::sqrt(var);
    if (std < 1e-9) throw NumericalError("latent scale: degenerate zero-variance latents");
    return 1.0 / std;
}

}  // namespace pdegen::ae
