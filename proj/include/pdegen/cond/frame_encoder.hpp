// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/cond/condition.hpp"
#include "pdegen/core/ops_conv.hpp"
#include "pdegen/core/ops_norm.hpp"
#include "pdegen/geo/transcoder.hpp"

namespace pdegen::cond {

struct FrameEncoderConfig {
    int grid = 32;          // spatial aggregation grid per axis
    int channels = 3;       // physical channels d_p
    int cond_dim = 64;      // d_c
    int width = 16;         // conv width
    double radius = 0.0425; // spatial ball radius
    int kernel_hidden = 16;

    int64_t token_count() const { return int64_t(grid / 4) * (grid / 4); }
};

// First-frame condition encoder tau: aggregates u(0, x_m) onto a spatial
// grid with a learned kernel, then downsamples by 4 with a small conv net
// and flattens the result into the conditioning sequence.
template <class T>
class FrameEncoder {
public:
    FrameEncoder() = default;

    FrameEncoder(core::ParamRegistry<T>& reg, const std::string& prefix, const FrameEncoderConfig& cfg)
        : cfg_(cfg), kernel_(reg, prefix + ".kernel", 2, cfg.channels, cfg.kernel_hidden, 1, false) {
        const int64_t w = cfg.width;
        stem_w_ = reg.create(prefix + ".stem.w", {w, cfg.channels, 3, 3}, core::Init::LecunUniform);
        stem_b_ = reg.create(prefix + ".stem.b", {w}, core::Init::Zero);
        g1_ = reg.create(prefix + ".g1", {w}, core::Init::One);
        b1_ = reg.create(prefix + ".b1", {w}, core::Init::Zero);
        mid_w_ = reg.create(prefix + ".mid.w", {w, w, 3, 3}, core::Init::LecunUniform);
        mid_b_ = reg.create(prefix + ".mid.b", {w}, core::Init::Zero);
        g2_ = reg.create(prefix + ".g2", {w}, core::Init::One);
        b2_ = reg.create(prefix + ".b2", {w}, core::Init::Zero);
        head_w_ = reg.create(prefix + ".head.w", {cfg.cond_dim, w, 3, 3}, core::Init::LecunUniform);
        head_b_ = reg.create(prefix + ".head.b", {cfg.cond_dim}, core::Init::Zero);
    }

    const FrameEncoderConfig& config() const { return cfg_; }

    // Spatial aggregation plan for a frame geometry; reusable across steps.
    geo::BallPlan<T> plan_for(const geo::FieldSample& frame) const {
        if (frame.spatial_dim != 2)
            throw UsageError("frame encoder: expects 2-d spatial samples");
        std::vector<double> src;
        const int m = frame.point_count();
        src.reserve(static_cast<size_t>(m) * 2);
        for (int p = 0; p < m; ++p) {
            src.push_back(frame.coord_at(p, 0));
            src.push_back(frame.coord_at(p, 1));
        }
        geo::LatentGridSpec spatial;
        spatial.time_count = 2;  // unused; validate() wants >=2
        spatial.extents = {cfg_.grid, cfg_.grid};
        spatial.radius = cfg_.radius;
        auto plan = geo::build_ball_plan<T>(src, spatial.spatial_coords(), 2, cfg_.radius,
                                            geo::WeightMode::EqualShare, false);
        if (plan.zero_neighbor_queries > 0)
            throw DataError("frame encoder: " + std::to_string(plan.zero_neighbor_queries) +
                            " grid cell(s) not covered by the frame; increase the radius");
        return plan;
    }

    // values [M, d_p] for one frame -> tokens [1, N_c, d_c]
    core::Tensor<T> encode_one(const geo::BallPlan<T>& plan, const core::Tensor<T>& values) const {
        auto kap = core::scale(kernel_.forward(plan.pair_features), T(1.0 / plan.vol));
        auto grid = geo::ball_apply(kap, values, plan, false);  // [G*G, C]
        auto img = core::transpose(core::reshape(grid, {1, cfg_.grid, cfg_.grid, cfg_.channels}),
                                   {0, 3, 1, 2});               // [1, C, G, G]
        auto x = core::conv2d(img, stem_w_, stem_b_, 2, 1);     // G/2
        x = core::silu(core::group_norm(x, groups(), g1_, b1_));
        x = core::conv2d(x, mid_w_, mid_b_, 2, 1);              // G/4
        x = core::silu(core::group_norm(x, groups(), g2_, b2_));
        x = core::conv2d(x, head_w_, head_b_, 1, 1);            // [1, d_c, G/4, G/4]
        auto tokens = core::transpose(core::reshape(x, {1, cfg_.cond_dim, cfg_.token_count()}), {0, 2, 1});
        return tokens;  // [1, N_c, d_c]
    }

    // Batch convenience over frames sharing one plan.
    ConditionBatch<T> forward(const geo::BallPlan<T>& plan,
                              const std::vector<core::Tensor<T>>& frame_values) const {
        std::vector<core::Tensor<T>> rows;
        rows.reserve(frame_values.size());
        for (const auto& v : frame_values) rows.push_back(encode_one(plan, v));
        ConditionBatch<T> out;
        out.tokens = rows.size() == 1 ? rows[0] : core::concat(rows, 0);
        out.mask = core::Tensor<T>::filled({static_cast<int64_t>(rows.size()), cfg_.token_count()}, T(1));
        out.modality = Modality::FirstFrame;
        return out;
    }

private:
    int64_t groups() const { return cfg_.width % 4 == 0 ? 4 : 1; }

    FrameEncoderConfig cfg_;
    geo::KernelNet<T> kernel_;
    core::Tensor<T> stem_w_, stem_b_, g1_, b1_, mid_w_, mid_b_, g2_, b2_, head_w_, head_b_;
};

}  // namespace pdegen::cond
