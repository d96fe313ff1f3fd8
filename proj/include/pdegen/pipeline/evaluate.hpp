// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>

#include "pdegen/pipeline/ldm_pipeline.hpp"
#include "pdegen/sim/dataset_gen.hpp"

namespace pdegen::pipeline {

enum class EvalMode { Direct, Resolve };

// Condition sources for a set of stored samples under the requested modality
// (Mixed is not a valid evaluation request).
template <class T>
std::vector<CondSource<T>> condition_sources(const LdmBundle<T>& b, const io::DatasetBundle& data,
                                             const std::vector<int>& idx, Modality modality,
                                             const LdmTrainingSet<T>& set) {
    std::vector<CondSource<T>> out;
    for (size_t k = 0; k < idx.size(); ++k) {
        CondSource<T> src;
        src.choice = modality;
        if (modality == Modality::FirstFrame) {
            src.ff_plan = &set.ff_plan_for(k);
            src.frame_values = set.frame_values[k];
        } else if (modality == Modality::Text) {
            src.text_ids = set.text_ids[k];
        }
        out.push_back(std::move(src));
    }
    return out;
}

// Direct mode scores generated trajectories against the stored ones; resolve
// mode re-runs the solver from each generated first frame and scores against
// that re-solved reference instead.
template <class T>
metrics::EvalReport evaluate(LdmBundle<T>& b, const io::DatasetBundle& data,
                             const std::vector<int>& idx, Modality modality, EvalMode mode,
                             const SamplerOptions& opts, core::Rng& rng, int chunk = 8) {
    if (idx.empty()) throw DataError("evaluate: empty index set");
    auto set = prepare_training_set(b, data, idx);
    metrics::EvalReport report;
    report.flops_per_forward = b.flops_per_forward();
    std::vector<double> curve_acc;

    const auto t0 = std::chrono::steady_clock::now();
    for (size_t base = 0; base < idx.size(); base += static_cast<size_t>(chunk)) {
        std::vector<int> part(idx.begin() + static_cast<int64_t>(base),
                              idx.begin() + static_cast<int64_t>(std::min(idx.size(), base + static_cast<size_t>(chunk))));
        std::vector<CondSource<T>> sources;
        for (size_t k = 0; k < part.size(); ++k) {
            CondSource<T> src;
            src.choice = modality;
            if (modality == Modality::FirstFrame) {
                src.ff_plan = &set.ff_plan_for(base + k);
                src.frame_values = set.frame_values[base + k];
            } else {
                src.text_ids = set.text_ids[base + k];
            }
            sources.push_back(std::move(src));
        }
        auto out = sample_trajectories(b, sources, opts, rng);
        for (size_t k = 0; k < part.size(); ++k) {
            const auto& generated = out.grids[k];
            const auto& stored = data.samples[static_cast<size_t>(part[k])];
            geo::FieldSample reference = stored;
            if (mode == EvalMode::Resolve) {
                sim::SmokeSpec spec;
                spec.resolution = stored.grid_extents[0];
                spec.frames = stored.time_count;
                if (data.meta.contains("solver")) {
                    spec.dt = data.meta["solver"]["dt"].get<double>();
                    spec.viscosity = data.meta["solver"]["viscosity"].get<double>();
                }
                spec.buoyancy = data.meta.at("params")[static_cast<size_t>(part[k])]["buoyancy"].get<double>();
                try {
                    reference = sim::resolve_trajectory(generated.first_frame(), spec);
                } catch (const NumericalError& e) {
                    std::cerr << "[warn] re-solve failed for sample " << part[k] << ": " << e.what()
                              << " (excluded from aggregate)\n";
                    report.skipped++;
                    continue;
                }
            }
            report.sample_names.push_back("sample" + std::to_string(part[k]));
            report.sample_rel_l2.push_back(metrics::rel_l2(generated, reference));
            report.per_channel.push_back(metrics::rel_l2_per_channel(generated, reference));
            auto curve = metrics::per_timestep_loss(generated, reference);
            if (curve_acc.empty()) curve_acc.assign(curve.size(), 0.0);
            for (size_t t = 0; t < curve.size(); ++t) curve_acc[t] += curve[t];
        }
    }
    const auto t1 = std::chrono::steady_clock::now();
    report.sampling_seconds = std::chrono::duration<double>(t1 - t0).count();
    if (report.sample_rel_l2.empty()) throw NumericalError("evaluate: every sample failed to re-solve");
    for (auto& v : curve_acc) v /= double(report.sample_rel_l2.size());
    report.per_timestep_mean = curve_acc;
    return report;
}

struct SweepRow {
    int steps;
    double seconds;
    double rel_l2;
};

// DDIM step sweep over the same conditions and seed.
template <class T>
std::vector<SweepRow> ddim_sweep(LdmBundle<T>& b, const io::DatasetBundle& data,
                                 const std::vector<int>& idx, Modality modality,
                                 const std::vector<int>& step_counts, uint64_t seed) {
    std::vector<SweepRow> rows;
    for (int s : step_counts) {
        SamplerOptions opts;
        opts.kind = "ddim";
        opts.steps = s;
        opts.eta = 0.0;
        core::Rng rng(seed, 0xdd1 + static_cast<uint64_t>(s));
        auto report = evaluate(b, data, idx, modality, EvalMode::Direct, opts, rng);
        rows.push_back({s, report.sampling_seconds, report.aggregate_rel_l2()});
    }
    return rows;
}

inline std::string sweep_table(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%8s %12s %12s\n", "S", "time_s", "rel_l2");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%8d %12.3f %12.6f\n", r.steps, r.seconds, r.rel_l2);
        os << buf;
    }
    return os.str();
}

// Single-step convolutional predictor; the autoregressive baseline whose
// rollout errors accumulate over the horizon.
template <class T>
class ConvArBaseline {
public:
    ConvArBaseline(uint64_t seed, int width = 24)
        : reg_(std::make_shared<core::ParamRegistry<T>>(seed ^ 0xa7)), width_(width) {
        c1w_ = reg_->create("ar.c1.w", {width_, 3, 3, 3}, core::Init::LecunUniform);
        c1b_ = reg_->create("ar.c1.b", {width_}, core::Init::Zero);
        c2w_ = reg_->create("ar.c2.w", {width_, width_, 3, 3}, core::Init::LecunUniform);
        c2b_ = reg_->create("ar.c2.b", {width_}, core::Init::Zero);
        c3w_ = reg_->create("ar.c3.w", {3, width_, 3, 3}, core::Init::Zero);
        c3b_ = reg_->create("ar.c3.b", {3}, core::Init::Zero);
    }

    // frame [N, 3, H, W] -> next frame (residual prediction)
    core::Tensor<T> forward(const core::Tensor<T>& frame) const {
        auto h = core::silu(core::conv2d(frame, c1w_, c1b_, 1, 1));
        h = core::silu(core::conv2d(h, c2w_, c2b_, 1, 1));
        return core::add(frame, core::conv2d(h, c3w_, c3b_, 1, 1));
    }

    // trains on consecutive normalized frame pairs
    void train(const io::DatasetBundle& data, const std::vector<int>& idx,
               const geo::ChannelStats& stats, int64_t steps, double lr, uint64_t seed) {
        std::vector<core::Tensor<T>> frames;  // [T, 3, H, W] per sample
        for (int i : idx) {
            auto norm = normalize_sample(data.samples[static_cast<size_t>(i)], stats);
            const int res = norm.grid_extents[0];
            auto vals = norm.template values_tensor<T>();  // [T*M, 3]
            auto grid = core::transpose(
                core::reshape(vals, {norm.time_count, res, res, 3}), {0, 3, 1, 2});
            frames.push_back(grid);
        }
        core::Adam<T> opt(reg_->trainable(), lr);
        core::Rng rng(seed, 0xa7ba);
        const int t = static_cast<int>(frames[0].size(0));
        for (int64_t step = 0; step < steps; ++step) {
            std::vector<core::Tensor<T>> in_rows, out_rows;
            for (int k = 0; k < 8; ++k) {
                const int si = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(frames.size()) - 1));
                const int ti = static_cast<int>(rng.uniform_int(0, t - 2));
                in_rows.push_back(core::slice(frames[static_cast<size_t>(si)], 0, ti, 1));
                out_rows.push_back(core::slice(frames[static_cast<size_t>(si)], 0, ti + 1, 1));
            }
            auto x = core::concat(in_rows, 0);
            auto y = core::concat(out_rows, 0);
            auto loss = core::mean(core::square(core::sub(forward(x), y)));
            if (!std::isfinite(double(loss.item())))
                throw NumericalError("ar baseline: non-finite loss");
            loss.backward();
            opt.step();
            opt.zero_grad();
        }
    }

    // rolls out from a stored first frame; returns a physical-unit trajectory
    geo::FieldSample rollout(const geo::FieldSample& raw, const geo::ChannelStats& stats) const {
        core::NoGradGuard ng;
        auto norm = normalize_sample(raw, stats);
        const int res = norm.grid_extents[0];
        auto frame0 = norm.first_frame().template values_tensor<T>();
        auto x = core::transpose(core::reshape(frame0, {1, res, res, 3}), {0, 3, 1, 2});
        geo::FieldSample out = raw;
        auto write_frame = [&](const core::Tensor<T>& f, int t) {
            auto back = core::transpose(f, {0, 2, 3, 1});  // [1, H, W, 3]
            for (int64_t i = 0; i < back.numel(); ++i)
                out.values[static_cast<size_t>(t) * back.numel() + static_cast<size_t>(i)] =
                    float(back.data()[static_cast<size_t>(i)]);
        };
        write_frame(x, 0);
        for (int t = 1; t < raw.time_count; ++t) {
            x = forward(x);
            write_frame(x, t);
        }
        return denormalize_sample(out, stats);
    }

private:
    std::shared_ptr<core::ParamRegistry<T>> reg_;
    int64_t width_;
    core::Tensor<T> c1w_, c1b_, c2w_, c2b_, c3w_, c3b_;
};

}  // namespace pdegen::pipeline
