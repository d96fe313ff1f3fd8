// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "pdegen/models/dit.hpp"
#include "pdegen/models/unet3d.hpp"

namespace pdegen::models {

// Analytic flop accounting for a single forward pass at batch size 1.
// Conventions: matmul [m,k]x[k,n] = 2mkn; convolution = 2*k_elems*C_in*C_out*
// output positions; attention = 2*Lq*Lk*d for the score matrix and the same
// again for applying it; projections are counted separately as matmuls.
struct FlopCounter {
    struct Line {
        std::string label;
        int64_t flops;
    };
    std::vector<Line> lines;

    void matmul(const std::string& label, int64_t m, int64_t k, int64_t n, int64_t count = 1) {
        lines.push_back({label, 2 * m * k * n * count});
    }
    void conv(const std::string& label, int64_t kelems, int64_t cin, int64_t cout, int64_t positions) {
        lines.push_back({label, 2 * kelems * cin * cout * positions});
    }
    void attention(const std::string& label, int64_t lq, int64_t lk, int64_t d) {
        lines.push_back({label, 2 * lq * lk * d * 2});
    }
    void raw(const std::string& label, int64_t flops) { lines.push_back({label, flops}); }

    int64_t total() const {
        int64_t t = 0;
        for (const auto& l : lines) t += l.flops;
        return t;
    }
};

inline FlopCounter dit_flops(const DiTConfig& cfg, int64_t cond_len) {
    FlopCounter fc;
    const int64_t L = cfg.token_count(), h = cfg.hidden;
    fc.matmul("patch_in", L, cfg.patch_dim(), h);
    fc.matmul("timestep_mlp", 1, 128, h);
    fc.matmul("timestep_mlp2", 1, h, h);
    fc.matmul("cond_proj", 1, cfg.cond_dim, h);
    for (int64_t b = 0; b < cfg.depth; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        fc.matmul(p + "adaln", 1, h, 9 * h);
        fc.matmul(p + "attn.qkv", L, h, 3 * h);
        fc.attention(p + "attn.core", L, L, h);
        fc.matmul(p + "attn.out", L, h, h);
        if (b % cfg.cross_every == 0) {
            fc.matmul(p + "cross.q", L, h, h);
            fc.matmul(p + "cross.kv", cond_len, cfg.cond_dim, 2 * h);
            fc.attention(p + "cross.core", L, cond_len, h);
            fc.matmul(p + "cross.out", L, h, h);
        }
        fc.matmul(p + "mlp.fc1", L, h, h * cfg.mlp_ratio);
        fc.matmul(p + "mlp.fc2", L, h * cfg.mlp_ratio, h);
    }
    fc.matmul("final.adaln", 1, h, 2 * h);
    fc.matmul("final.head", L, h, cfg.patch_dim());
    if (cfg.learned_variance) fc.matmul("final.vhead", L, h, cfg.patch_dim());
    return fc;
}

inline FlopCounter unet_flops(const UnetConfig& cfg, int64_t cond_len) {
    FlopCounter fc;
    const int64_t emb = cfg.base_width * 4;
    fc.matmul("timestep_mlp", 1, 128, emb);
    fc.matmul("timestep_mlp2", 1, emb, emb);
    int64_t tt = cfg.t, hh = cfg.h, ww = cfg.w;
    auto res = [&](const std::string& label, int64_t cin, int64_t cout, int64_t pos) {
        fc.conv(label + ".c1", 27, cin, cout, pos);
        fc.matmul(label + ".emb", 1, emb, cout);
        fc.conv(label + ".c2", 27, cout, cout, pos);
        if (cin != cout) fc.conv(label + ".skip", 1, cin, cout, pos);
    };
    fc.conv("stem", 27, cfg.channels, cfg.base_width, tt * hh * ww);
    int64_t ch = cfg.base_width;
    std::vector<std::array<int64_t, 4>> stage_geom;  // ch, t, h, w entering each stage
    for (size_t s = 0; s < cfg.mults.size(); ++s) {
        const int64_t out = cfg.base_width * cfg.mults[s];
        res("enc" + std::to_string(s), ch, out, tt * hh * ww);
        ch = out;
        stage_geom.push_back({ch, tt, hh, ww});
        if (s + 1 < cfg.mults.size()) {
            fc.conv("down" + std::to_string(s), 27, ch, ch, (tt / 2) * (hh / 2) * (ww / 2));
            tt /= 2;
            hh /= 2;
            ww /= 2;
        }
    }
    const int64_t L = tt * hh * ww;
    res("mid1", ch, ch, L);
    fc.matmul("cross.q", L, ch, ch);
    fc.matmul("cross.kv", cond_len, cfg.cond_dim, 2 * ch);
    fc.attention("cross.core", L, cond_len, ch);
    fc.matmul("cross.out", L, ch, ch);
    res("mid2", ch, ch, L);
    for (size_t i = 0; i < cfg.mults.size(); ++i) {
        const auto g = stage_geom[stage_geom.size() - 1 - i];
        res("dec" + std::to_string(cfg.mults.size() - 1 - i), ch + g[0], g[0], g[1] * g[2] * g[3]);
        ch = g[0];
        if (i + 1 < cfg.mults.size()) {
            const int64_t nxt = cfg.base_width * cfg.mults[cfg.mults.size() - 2 - i];
            fc.conv("up" + std::to_string(cfg.mults.size() - 1 - i), 8, ch, nxt,
                    g[1] * 2 * g[2] * 2 * g[3] * 2);
            ch = nxt;
        }
    }
    fc.conv("out", 27, ch, cfg.channels, cfg.t * cfg.h * cfg.w);
    return fc;
}

// Autoregressive baselines pay the per-step cost once per predicted frame.
inline int64_t autoregressive_total(int64_t per_step_flops, int64_t timesteps) {
    return per_step_flops * timesteps;
}

}  // namespace pdegen::models
