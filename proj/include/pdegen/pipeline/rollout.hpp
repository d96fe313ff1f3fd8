// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/pipeline/ldm_pipeline.hpp"

namespace pdegen::pipeline {

struct RolloutResult {
    geo::FieldSample trajectory;
    std::vector<Modality> window_modalities;  // conditioning used per window
};

// Autoregressive long-horizon generation: window 1 takes the requested
// condition; later windows condition on the final frame of the previous
// window, whose duplicate leading frame is dropped on concatenation.
template <class T>
RolloutResult rollout_autoregressive(const LdmBundle<T>& b, const CondSource<T>& initial,
                                     int windows, const SamplerOptions& opts, core::Rng& rng) {
    if (windows < 1) throw UsageError("rollout: need at least one window");
    if (initial.choice == Modality::Text && b.cfg.get("cond.modality") == "text" && windows > 1)
        throw UsageError(
            "text-initiated rollouts need a modality-switching model (cond.modality = both)");
    if (windows > 1 && !b.ff)
        throw UsageError("rollout beyond one window needs the first-frame encoder");

    RolloutResult result;
    geo::FieldSample full;
    CondSource<T> cond = initial;
    geo::BallPlan<T> frame_plan;  // lazily built once from the grid geometry
    core::Tensor<T> carried_frame;

    for (int w = 0; w < windows; ++w) {
        result.window_modalities.push_back(cond.choice);
        auto out = sample_trajectories(b, {cond}, opts, rng);
        geo::FieldSample& traj = out.grids[0];
        if (w == 0) {
            full = traj;
        } else {
            // drop the conditioning frame duplicated at the window head
            const size_t stride = traj.values.size() / static_cast<size_t>(traj.time_count);
            full.values.insert(full.values.end(), traj.values.begin() + static_cast<int64_t>(stride),
                               traj.values.end());
            full.time_count += traj.time_count - 1;
        }
        if (w + 1 < windows) {
            // condition the next window on this window's final frame
            geo::FieldSample last = traj;
            const size_t stride = traj.values.size() / static_cast<size_t>(traj.time_count);
            last.time_count = 1;
            last.values.assign(traj.values.end() - static_cast<int64_t>(stride), traj.values.end());
            auto norm = normalize_sample(last, b.ae.stats);
            if (w == 0 || frame_plan.table == nullptr) frame_plan = b.ff->plan_for(last);
            carried_frame = norm.template values_tensor<T>();
            cond = CondSource<T>{};
            cond.choice = Modality::FirstFrame;
            cond.ff_plan = &frame_plan;
            cond.frame_values = carried_frame;
        }
    }
    result.trajectory = std::move(full);
    return result;
}

}  // namespace pdegen::pipeline
