// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <iostream>
#include <memory>

#include "pdegen/ae/autoencoder.hpp"
#include "pdegen/core/optim.hpp"
#include "pdegen/geo/transcoder.hpp"
#include "pdegen/io/checkpoint.hpp"
#include "pdegen/io/config.hpp"
#include "pdegen/io/dataset_file.hpp"
#include "pdegen/metrics/metrics.hpp"
#include "pdegen/pipeline/normalize.hpp"

#include <json.hpp>

namespace pdegen::pipeline {

using core::Rng;
using core::Tensor;

// The full mesh autoencoder: transcoder kernels around the convolutional VAE,
// plus everything needed to run it (grid spec, channel stats, latent scale).
template <class T>
struct AeBundle {
    std::shared_ptr<core::ParamRegistry<T>> reg;
    geo::Transcoder<T> transcoder;
    ae::ConvVae<T> vae;
    geo::LatentGridSpec grid;
    geo::ChannelStats stats;
    double latent_scale = 1.0;
    io::RunConfig cfg;

    geo::KernelMode kernel_mode() const { return geo::KernelMode::Learned; }
};

template <class T>
AeBundle<T> build_ae_bundle(const io::RunConfig& cfg) {
    AeBundle<T> b;
    b.cfg = cfg;
    b.reg = std::make_shared<core::ParamRegistry<T>>(static_cast<uint64_t>(cfg.geti("seed")));

    const int res = static_cast<int>(cfg.geti("data.resolution"));
    const int frames = static_cast<int>(cfg.geti("data.timesteps"));
    b.grid.time_count = frames;
    b.grid.extents = {res, res};
    b.grid.radius = cfg.getd("ball.radius");

    const auto wmode = cfg.get("ball.weights") == "inverse_density" ? geo::WeightMode::InverseDensity
                                                                    : geo::WeightMode::EqualShare;
    b.transcoder = geo::Transcoder<T>(*b.reg, "tc", 3, 3, static_cast<int>(cfg.geti("kernel.hidden")),
                                      static_cast<int>(cfg.geti("kernel.depth")),
                                      cfg.getb("kernel.full_matrix"), wmode);

    ae::AutoencoderConfig ac;
    ac.channels = 3;
    ac.t = frames;
    ac.h = res;
    ac.w = res;
    ac.width = cfg.geti("ae.width");
    ac.stages = cfg.geti("ae.stages");
    ac.factor = cfg.geti("ae.factor");
    ac.latent_channels = cfg.geti("ae.latent_channels");
    ac.kl_weight = cfg.getd("ae.kl_weight");
    ac.attn = cfg.getb("ae.attn");
    ac.kl_mean_reduction = cfg.get("ae.kl_reduction") == "mean";
    ac.recon_l2 = cfg.get("ae.recon") == "l2";
    b.vae = ae::ConvVae<T>(*b.reg, "vae", ac);
    return b;
}

// Geometry plans for one sample layout (shared across samples on identical
// layouts, which is always the case for grid datasets).
template <class T>
struct SamplePlans {
    geo::BallPlan<T> encode;  // sample points -> latent grid cells
    geo::BallPlan<T> decode;  // latent grid cells -> sample points
};

template <class T>
SamplePlans<T> make_plans(const AeBundle<T>& b, const geo::FieldSample& sample) {
    SamplePlans<T> p;
    p.encode = b.transcoder.encode_plan(sample, b.grid);
    p.decode = b.transcoder.decode_plan(b.grid, sample.spacetime_coords(), false);
    return p;
}

// Aggregate a normalized sample onto the latent grid: [1, d_p, T, H, W].
template <class T>
Tensor<T> aggregate_to_grid(const AeBundle<T>& b, const geo::BallPlan<T>& plan,
                            const Tensor<T>& values, int channels) {
    auto kap = b.transcoder.kappa(plan, geo::KernelMode::Learned, false);
    auto grid = b.transcoder.apply(plan, kap, values, geo::KernelMode::Learned);  // [Q, C]
    auto shaped = core::reshape(grid, {1, b.grid.time_count, b.grid.extents[0], b.grid.extents[1], channels});
    return core::transpose(shaped, {0, 4, 1, 2, 3});
}

// Interpolate a decoded latent grid [N, d_p, T, H, W] back to sample points
// for one batch row: [S, d_p].
template <class T>
Tensor<T> interpolate_row(const AeBundle<T>& b, const geo::BallPlan<T>& plan, const Tensor<T>& grid,
                          int64_t row, const Tensor<T>& kappa_dec) {
    auto one = core::slice(grid, 0, row, 1);  // [1, C, T, H, W]
    auto flat = core::reshape(core::transpose(one, {0, 2, 3, 4, 1}),
                              {b.grid.cell_count(), one.size(1)});
    return b.transcoder.apply(plan, kappa_dec, flat, geo::KernelMode::Learned);
}

struct TrainLogRow {
    int64_t step;
    double loss;
    double recon;
    double kl;
};

struct AeTrainResult {
    std::vector<TrainLogRow> log;
    double final_recon_rel_l2 = 0;  // physical units, over the training set
    double final_kl = 0;
};

// Full-pipeline reconstruction of one stored sample (normalized in, physical out).
template <class T>
geo::FieldSample reconstruct_sample(const AeBundle<T>& b, const geo::FieldSample& raw,
                                    const SamplePlans<T>& plans, Rng& rng, bool use_mean = true) {
    core::NoGradGuard ng;
    auto norm = normalize_sample(raw, b.stats);
    auto grid = aggregate_to_grid(b, plans.encode, norm.template values_tensor<T>(), raw.channels);
    auto lat = b.vae.encode(grid);
    Tensor<T> z = use_mean ? lat.mean : ae::reparameterize(lat, rng);
    auto dec = b.vae.decode(z);
    auto kd = b.transcoder.kappa(plans.decode, geo::KernelMode::Learned, true);
    auto vals = interpolate_row(b, plans.decode, dec, 0, kd);
    geo::FieldSample out = raw;
    for (size_t i = 0; i < out.values.size(); ++i) out.values[i] = float(vals.data()[i]);
    return denormalize_sample(out, b.stats);
}

// Trains kernels + VAE end to end on the train split with the configured
// reconstruction loss plus the KL penalty; estimates the latent scale at the
// end. Aborts on non-finite losses.
template <class T>
AeTrainResult train_autoencoder(AeBundle<T>& b, const io::DatasetBundle& data,
                                const std::vector<int>& train_idx,
                                const std::function<void(const io::Checkpoint&)>& checkpoint_sink = {}) {
    if (train_idx.empty()) throw DataError("autoencoder training: empty train split");
    const auto& cfg = b.cfg;
    const int64_t steps = cfg.geti("train.steps");
    const int64_t batch = std::max<int64_t>(1, cfg.geti("train.batch"));
    const double lr = cfg.getd("train.lr");
    const int64_t log_every = std::max<int64_t>(1, cfg.geti("train.log_every"));
    const int64_t ckpt_every = std::max<int64_t>(1, cfg.geti("train.ckpt_every"));
    const uint64_t seed = static_cast<uint64_t>(cfg.geti("seed"));
    const auto& ac = b.vae.config();

    // dataset-level stats come from the sidecar when present
    if (data.meta.contains("stats")) {
        b.stats.mean = data.meta["stats"]["mean"].get<std::vector<double>>();
        b.stats.stddev = data.meta["stats"]["stddev"].get<std::vector<double>>();
    } else {
        std::vector<geo::FieldSample> train;
        for (int i : train_idx) train.push_back(data.samples[static_cast<size_t>(i)]);
        b.stats = geo::compute_channel_stats(train);
    }

    // normalized training values + shared plans (grid datasets share geometry)
    std::vector<Tensor<T>> values;
    values.reserve(train_idx.size());
    for (int i : train_idx)
        values.push_back(normalize_sample(data.samples[static_cast<size_t>(i)], b.stats).template values_tensor<T>());
    const bool shared_geometry = data.samples[static_cast<size_t>(train_idx[0])].is_grid();
    std::vector<SamplePlans<T>> plans;
    plans.push_back(make_plans(b, data.samples[static_cast<size_t>(train_idx[0])]));
    if (!shared_geometry)
        for (size_t i = 1; i < train_idx.size(); ++i)
            plans.push_back(make_plans(b, data.samples[static_cast<size_t>(train_idx[static_cast<size_t>(i)])]));

    core::Adam<T> opt(b.reg->trainable(), lr);
    Rng order_rng(seed, 0x0ade);
    AeTrainResult result;

    std::vector<int64_t> order(train_idx.size());
    std::iota(order.begin(), order.end(), 0);
    size_t cursor = order.size();  // trigger shuffle on first use
    Rng noise_rng(seed, 0x7e9a);

    for (int64_t step = 1; step <= steps; ++step) {
        // draw a batch from a reshuffled-each-epoch order
        std::vector<int64_t> chosen;
        for (int64_t k = 0; k < batch; ++k) {
            if (cursor >= order.size()) {
                for (size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[static_cast<size_t>(order_rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
                cursor = 0;
            }
            chosen.push_back(order[cursor++]);
        }

        // kernels evaluated once per step, reused across the batch
        const auto& plan0 = plans[0];
        auto ke = b.transcoder.kappa(plan0.encode, geo::KernelMode::Learned, false);
        auto kd = b.transcoder.kappa(plan0.decode, geo::KernelMode::Learned, true);

        std::vector<Tensor<T>> grids;
        for (int64_t c : chosen) {
            const auto& pl = shared_geometry ? plans[0] : plans[static_cast<size_t>(c)];
            auto kap = shared_geometry ? ke : b.transcoder.kappa(pl.encode, geo::KernelMode::Learned, false);
            auto g = b.transcoder.apply(pl.encode, kap, values[static_cast<size_t>(c)],
                                        geo::KernelMode::Learned);
            grids.push_back(core::transpose(
                core::reshape(g, {1, b.grid.time_count, b.grid.extents[0], b.grid.extents[1], 3}),
                {0, 4, 1, 2, 3}));
        }
        auto grid_batch = grids.size() == 1 ? grids[0] : core::concat(grids, 0);
        auto lat = b.vae.encode(grid_batch);
        auto z = ae::reparameterize(lat, noise_rng);
        auto dec = b.vae.decode(z);

        Tensor<T> recon_loss;
        for (size_t k = 0; k < chosen.size(); ++k) {
            const auto& pl = shared_geometry ? plans[0] : plans[static_cast<size_t>(chosen[k])];
            auto kap = shared_geometry ? kd : b.transcoder.kappa(pl.decode, geo::KernelMode::Learned, true);
            auto pred = interpolate_row(b, pl.decode, dec, static_cast<int64_t>(k), kap);
            auto diff = core::sub(pred, values[static_cast<size_t>(chosen[k])]);
            auto term = ac.recon_l2 ? core::mean(core::square(diff)) : core::mean(core::abs(diff));
            recon_loss = recon_loss.defined() ? core::add(recon_loss, term) : term;
        }
        recon_loss = core::scale(recon_loss, T(1.0 / double(chosen.size())));
        auto kl = ae::kl_loss(lat, ac.kl_mean_reduction);
        auto loss = core::add(recon_loss, core::scale(kl, T(ac.kl_weight)));

        const double loss_v = double(loss.item());
        if (!std::isfinite(loss_v))
            throw NumericalError("autoencoder training: non-finite loss at step " +
                                 std::to_string(step) + " (last checkpoint retained)");
        loss.backward();
        opt.step();
        opt.zero_grad();

        if (step % log_every == 0 || step == steps) {
            result.log.push_back({step, loss_v, double(recon_loss.item()), double(kl.item())});
            result.final_kl = double(kl.item());
        }
        if (checkpoint_sink && (step % ckpt_every == 0 || step == steps))
            checkpoint_sink(make_ae_checkpoint(b, static_cast<uint64_t>(step)));
    }

    // latent scale from at least 16 posterior draws over the training set
    {
        core::NoGradGuard ng;
        std::vector<Tensor<T>> draws;
        Rng srng(seed, 0x5ca1e);
        const int repeats = std::max<int>(1, static_cast<int>((16 + train_idx.size() - 1) / train_idx.size()));
        for (int r = 0; r < repeats; ++r)
            for (size_t i = 0; i < train_idx.size(); ++i) {
                const auto& pl = shared_geometry ? plans[0] : plans[i];
                auto kap = b.transcoder.kappa(pl.encode, geo::KernelMode::Learned, false);
                auto g = b.transcoder.apply(pl.encode, kap, values[i], geo::KernelMode::Learned);
                auto lat = b.vae.encode(core::transpose(
                    core::reshape(g, {1, b.grid.time_count, b.grid.extents[0], b.grid.extents[1], 3}),
                    {0, 4, 1, 2, 3}));
                draws.push_back(ae::reparameterize(lat, srng));
            }
        b.latent_scale = ae::estimate_latent_scale(draws);
    }

    // training-set reconstruction error in physical units
    {
        Rng r(seed, 0xe7a1);
        double acc = 0;
        for (size_t i = 0; i < train_idx.size(); ++i) {
            const auto& raw = data.samples[static_cast<size_t>(train_idx[i])];
            const auto& pl = shared_geometry ? plans[0] : plans[i];
            acc += metrics::rel_l2(reconstruct_sample(b, raw, pl, r), raw);
        }
        result.final_recon_rel_l2 = acc / double(train_idx.size());
    }
    return result;
}

// Snapshot carrying the flat config plus channel stats as a JSON envelope.
template <class T>
io::Checkpoint make_ae_checkpoint(const AeBundle<T>& b, uint64_t step) {
    nlohmann::json env{{"config", b.cfg.echo()},
                       {"stats", {{"mean", b.stats.mean}, {"stddev", b.stats.stddev}}}};
    return io::snapshot(*b.reg, env.dump(), b.latent_scale,
                        static_cast<uint64_t>(b.cfg.geti("seed")), step);
}

inline io::RunConfig config_from_snapshot(const nlohmann::json& env) {
    io::RunConfig cfg;
    std::istringstream is(env.at("config").get<std::string>());
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        cfg.set(line.substr(0, eq), line.substr(eq + 3));
    }
    return cfg;
}

// Restores a trained bundle from a checkpoint (configuration and stats travel
// in the JSON config snapshot).
template <class T>
AeBundle<T> load_ae_bundle(const io::Checkpoint& ck) {
    nlohmann::json env;
    try {
        env = nlohmann::json::parse(ck.config_text);
    } catch (const std::exception& e) {
        throw DataError(std::string("checkpoint: unreadable config snapshot: ") + e.what());
    }
    AeBundle<T> b = build_ae_bundle<T>(config_from_snapshot(env));
    io::restore(ck, *b.reg);
    b.latent_scale = ck.latent_scale;
    if (env.contains("stats")) {
        b.stats.mean = env["stats"]["mean"].get<std::vector<double>>();
        b.stats.stddev = env["stats"]["stddev"].get<std::vector<double>>();
    }
    return b;
}

}  // namespace pdegen::pipeline
