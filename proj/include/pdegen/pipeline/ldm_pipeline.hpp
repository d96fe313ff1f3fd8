// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/cond/frame_encoder.hpp"
#include "pdegen/cond/text_encoder.hpp"
#include "pdegen/models/dit.hpp"
#include "pdegen/models/flops.hpp"
#include "pdegen/models/unet3d.hpp"
#include "pdegen/pipeline/ae_pipeline.hpp"

namespace pdegen::pipeline {

using cond::ConditionBatch;
using cond::Modality;

// Latent diffusion model over the frozen autoencoder: denoiser backbone plus
// the trainable conditioning encoders, with the noise schedule and scaled
// latent geometry.
template <class T>
struct LdmBundle {
    AeBundle<T> ae;
    std::shared_ptr<core::ParamRegistry<T>> reg;
    std::shared_ptr<models::DiT<T>> dit;
    std::shared_ptr<models::Unet3d<T>> unet;
    std::shared_ptr<cond::FrameEncoder<T>> ff;
    std::shared_ptr<cond::TextEncoder<T>> text;
    cond::Vocabulary vocab;
    diffusion::NoiseSchedule sched = diffusion::NoiseSchedule::make(diffusion::ScheduleKind::Linear, 10);
    diffusion::Parameterization param = diffusion::Parameterization::Eps;
    diffusion::VarianceMode vmode = diffusion::VarianceMode::FixedPosterior;
    diffusion::GuidanceConfig guidance;
    io::RunConfig cfg;

    core::Shape latent_shape(int64_t batch) const {
        const auto& ac = ae.vae.config();
        return {batch, ac.latent_channels, ac.lt(), ac.lh(), ac.lw()};
    }

    int64_t cond_dim() const { return cfg.geti("cond.dim"); }

    diffusion::ModelOut<T> denoise(const core::Tensor<T>& z, const std::vector<int>& steps,
                                   const ConditionBatch<T>& c) const {
        if (dit) return dit->forward(z, steps, c);
        return unet->forward(z, steps, c);
    }

    int64_t flops_per_forward() const {
        const int64_t cond_len = cond_token_length();
        if (dit) return models::dit_flops(dit->config(), cond_len).total();
        return models::unet_flops(unet->config(), cond_len).total();
    }

    int64_t cond_token_length() const {
        const std::string m = cfg.get("cond.modality");
        int64_t n = 0;
        if (m == "first_frame" || m == "both") n += ff ? ff->config().token_count() : 0;
        if (m == "text" || m == "both") n += cfg.geti("text.max_len");
        return std::max<int64_t>(n, 1);
    }
};

// Builds a fresh LDM over a trained autoencoder; the caption corpus seeds the
// vocabulary when text conditioning is enabled.
template <class T>
LdmBundle<T> build_ldm_bundle(const io::RunConfig& cfg, AeBundle<T> ae,
                              const std::vector<std::string>& caption_corpus) {
    LdmBundle<T> b;
    b.ae = std::move(ae);
    b.ae.reg->freeze_all();
    b.cfg = cfg;
    b.reg = std::make_shared<core::ParamRegistry<T>>(static_cast<uint64_t>(cfg.geti("seed")) ^ 0x1d);

    b.sched = diffusion::NoiseSchedule::make(cfg.get("diff.schedule"),
                                             static_cast<int>(cfg.geti("diff.steps")));
    b.param = diffusion::parameterization_from_string(cfg.get("diff.param"));
    b.vmode = cfg.get("diff.variance") == "learned" ? diffusion::VarianceMode::Learned
                                                    : diffusion::VarianceMode::FixedPosterior;
    b.guidance.enabled = cfg.getb("cfg.enabled");
    b.guidance.weight = cfg.getd("cfg.weight");
    b.guidance.rescale = cfg.getd("cfg.rescale");
    b.guidance.dropout = cfg.getd("cfg.dropout");
    b.guidance.validate();

    const auto& ac = b.ae.vae.config();
    const std::string kind = cfg.get("model.kind");
    if (kind == "dit") {
        models::DiTConfig dc;
        dc.channels = ac.latent_channels;
        dc.t = ac.lt();
        dc.h = ac.lh();
        dc.w = ac.lw();
        dc.patch_t = cfg.geti("dit.patch_t");
        dc.patch_s = cfg.geti("dit.patch_s");
        dc.hidden = cfg.geti("dit.hidden");
        dc.depth = cfg.geti("dit.depth");
        dc.heads = cfg.geti("dit.heads");
        dc.cond_dim = cfg.geti("cond.dim");
        dc.mlp_ratio = cfg.geti("dit.mlp_ratio");
        dc.cross_every = cfg.geti("dit.cross_every");
        dc.learned_variance = b.vmode == diffusion::VarianceMode::Learned;
        b.dit = std::make_shared<models::DiT<T>>(*b.reg, "dit", dc);
    } else if (kind == "unet") {
        models::UnetConfig uc;
        uc.channels = ac.latent_channels;
        uc.t = ac.lt();
        uc.h = ac.lh();
        uc.w = ac.lw();
        uc.base_width = cfg.geti("unet.width");
        uc.mults = cfg.get_int_list("unet.mults");
        uc.heads = cfg.geti("dit.heads");
        uc.cond_dim = cfg.geti("cond.dim");
        if (b.vmode == diffusion::VarianceMode::Learned)
            throw UsageError("learned variance requires the dit backbone (single-head unet)");
        b.unet = std::make_shared<models::Unet3d<T>>(*b.reg, "unet", uc);
    } else {
        throw UsageError("unknown model.kind '" + kind + "' (dit|unet)");
    }

    const std::string modality = cfg.get("cond.modality");
    if (modality != "first_frame" && modality != "text" && modality != "both")
        throw UsageError("unknown cond.modality '" + modality + "'");
    if (modality == "first_frame" || modality == "both") {
        cond::FrameEncoderConfig fc;
        fc.grid = static_cast<int>(cfg.geti("ff.grid"));
        if (fc.grid == 0) fc.grid = static_cast<int>(cfg.geti("data.resolution"));
        fc.channels = 3;
        fc.cond_dim = static_cast<int>(cfg.geti("cond.dim"));
        fc.width = static_cast<int>(cfg.geti("ff.width"));
        fc.radius = cfg.getd("ff.radius");
        fc.kernel_hidden = static_cast<int>(cfg.geti("kernel.hidden"));
        b.ff = std::make_shared<cond::FrameEncoder<T>>(*b.reg, "ff", fc);
    }
    if (modality == "text" || modality == "both") {
        if (caption_corpus.empty()) throw DataError("text conditioning needs a caption corpus");
        b.vocab = cond::Vocabulary::build(caption_corpus);
        b.text = std::make_shared<cond::TextEncoder<T>>(
            *b.reg, "txt", b.vocab.size(), cfg.geti("cond.dim"), cfg.geti("text.max_len"),
            cfg.geti("text.layers"), cfg.geti("text.heads"));
    }
    return b;
}

// Per-sample conditioning source.
template <class T>
struct CondSource {
    Modality choice = Modality::Null;
    const geo::BallPlan<T>* ff_plan = nullptr;  // FirstFrame
    core::Tensor<T> frame_values;               // [M, d_p], normalized
    std::vector<int64_t> text_ids;              // Text
};

// Assembles the condition batch under the configured modality layout. In
// "both" mode every sample occupies fixed slots [ff | text] with the unused
// modality zero-padded and masked, which lets one model switch modalities.
template <class T>
ConditionBatch<T> build_condition(const LdmBundle<T>& b, const std::vector<CondSource<T>>& sources) {
    const std::string modality = b.cfg.get("cond.modality");
    const int64_t dc = b.cond_dim();
    const int64_t n = static_cast<int64_t>(sources.size());
    const int64_t ff_len = b.ff ? b.ff->config().token_count() : 0;
    const int64_t text_len = b.text ? b.cfg.geti("text.max_len") : 0;

    // per-sample token rows at a common width
    int64_t width = 0;
    if (modality == "first_frame") width = ff_len;
    else if (modality == "text") width = text_len;
    else width = ff_len + text_len;
    if (width == 0) throw UsageError("condition assembly: no encoder for modality " + modality);

    std::vector<core::Tensor<T>> rows, masks;
    bool all_null = true;
    for (const auto& src : sources) {
        core::Tensor<T> tokens, mask;
        if (src.choice == Modality::Null) {
            tokens = core::Tensor<T>::zeros({1, width, dc});
            std::vector<T> m(static_cast<size_t>(width), T(0));
            m[0] = T(1);  // one attendable zero token
            mask = core::Tensor<T>::from_data({1, width}, std::move(m));
        } else if (src.choice == Modality::FirstFrame) {
            if (!b.ff) throw UsageError("first-frame condition requested without an ff encoder");
            all_null = false;
            auto ff_tokens = b.ff->encode_one(*src.ff_plan, src.frame_values);  // [1, ff_len, dc]
            if (modality == "both") {
                auto pad = core::Tensor<T>::zeros({1, text_len, dc});
                tokens = core::concat<T>({ff_tokens, pad}, 1);
                std::vector<T> m(static_cast<size_t>(width), T(0));
                for (int64_t i = 0; i < ff_len; ++i) m[static_cast<size_t>(i)] = T(1);
                mask = core::Tensor<T>::from_data({1, width}, std::move(m));
            } else {
                tokens = ff_tokens;
                mask = core::Tensor<T>::filled({1, ff_len}, T(1));
            }
        } else {
            if (!b.text) throw UsageError("text condition requested without a text encoder");
            all_null = false;
            auto enc = b.text->forward({src.text_ids});  // [1, L, dc]
            const int64_t l = enc.tokens.size(1);
            auto padded = enc.tokens;
            if (l < text_len)
                padded = core::concat<T>({padded, core::Tensor<T>::zeros({1, text_len - l, dc})}, 1);
            std::vector<T> m(static_cast<size_t>(width), T(0));
            if (modality == "both") {
                tokens = core::concat<T>({core::Tensor<T>::zeros({1, ff_len, dc}), padded}, 1);
                for (size_t i = 0; i < src.text_ids.size(); ++i) m[static_cast<size_t>(ff_len) + i] = T(1);
            } else {
                tokens = padded;
                for (size_t i = 0; i < src.text_ids.size(); ++i) m[i] = T(1);
            }
            mask = core::Tensor<T>::from_data({1, width}, std::move(m));
        }
        rows.push_back(tokens);
        masks.push_back(mask);
    }

    ConditionBatch<T> out;
    out.tokens = n == 1 ? rows[0] : core::concat(rows, 0);
    out.mask = n == 1 ? masks[0] : core::concat(masks, 0);
    out.modality = all_null ? Modality::Null
                            : (modality == "both" ? Modality::Mixed
                                                  : (modality == "text" ? Modality::Text : Modality::FirstFrame));
    return out;
}

// Latent posterior of one stored sample through the frozen encoder path.
template <class T>
ae::Latent<T> encode_posterior(const AeBundle<T>& b, const geo::BallPlan<T>& encode_plan,
                               const core::Tensor<T>& norm_values) {
    core::NoGradGuard ng;
    auto grid = aggregate_to_grid(b, encode_plan, norm_values, 3);
    auto lat = b.vae.encode(grid);
    return {lat.mean.detach(), lat.logvar.detach()};
}

struct LdmTrainResult {
    std::vector<TrainLogRow> log;
};

template <class T>
io::Checkpoint make_ldm_checkpoint(const LdmBundle<T>& b, uint64_t step) {
    nlohmann::json env{{"kind", "ldm"},
                       {"config", b.cfg.echo()},
                       {"stats", {{"mean", b.ae.stats.mean}, {"stddev", b.ae.stats.stddev}}},
                       {"vocab", b.vocab.tokens()}};
    io::Checkpoint ck;
    ck.seed = static_cast<uint64_t>(b.cfg.geti("seed"));
    ck.step = step;
    ck.latent_scale = b.ae.latent_scale;
    ck.config_text = env.dump();
    for (const auto& [name, t] : b.ae.reg->items()) {
        std::vector<float> data(t.data().size());
        for (size_t i = 0; i < data.size(); ++i) data[i] = float(t.data()[i]);
        ck.tensors.emplace_back("ae." + name, std::make_pair(t.shape(), std::move(data)));
    }
    for (const auto& [name, t] : b.reg->items()) {
        std::vector<float> data(t.data().size());
        for (size_t i = 0; i < data.size(); ++i) data[i] = float(t.data()[i]);
        ck.tensors.emplace_back("ldm." + name, std::make_pair(t.shape(), std::move(data)));
    }
    return ck;
}

template <class T>
LdmBundle<T> load_ldm_bundle(const io::Checkpoint& ck) {
    nlohmann::json env;
    try {
        env = nlohmann::json::parse(ck.config_text);
    } catch (const std::exception& e) {
        throw DataError(std::string("checkpoint: unreadable config snapshot: ") + e.what());
    }
    if (!env.contains("kind") || env["kind"] != "ldm")
        throw DataError("checkpoint is not an ldm checkpoint");
    io::RunConfig cfg = config_from_snapshot(env);

    AeBundle<T> ae = build_ae_bundle<T>(cfg);
    ae.latent_scale = ck.latent_scale;
    if (env.contains("stats")) {
        ae.stats.mean = env["stats"]["mean"].get<std::vector<double>>();
        ae.stats.stddev = env["stats"]["stddev"].get<std::vector<double>>();
    }
    std::vector<std::string> corpus;
    if (env.contains("vocab")) {
        // rebuild the exact vocabulary: stored in id order, specials first
        const auto stored = env["vocab"].get<std::vector<std::string>>();
        corpus.assign(stored.begin() + std::min<size_t>(4, stored.size()), stored.end());
    }
    LdmBundle<T> b = build_ldm_bundle<T>(cfg, std::move(ae), corpus);
    if (b.text) {
        // rebuilding from the stored token list must reproduce ids exactly
        const auto stored = env["vocab"].get<std::vector<std::string>>();
        if (stored != b.vocab.tokens())
            throw DataError("checkpoint: vocabulary mismatch after rebuild");
    }

    // split the named tensors back into the two registries
    size_t matched = 0;
    for (const auto& [name, t] : b.ae.reg->items()) {
        const auto& stored = ck.find("ae." + name);
        if (stored.first != t.shape())
            throw DataError("checkpoint restore: shape mismatch for 'ae." + name + "'");
        auto tt = t;
        for (size_t i = 0; i < tt.mut_data().size(); ++i) tt.mut_data()[i] = T(stored.second[i]);
        ++matched;
    }
    for (const auto& [name, t] : b.reg->items()) {
        const auto& stored = ck.find("ldm." + name);
        if (stored.first != t.shape())
            throw DataError("checkpoint restore: shape mismatch for 'ldm." + name + "'");
        auto tt = t;
        for (size_t i = 0; i < tt.mut_data().size(); ++i) tt.mut_data()[i] = T(stored.second[i]);
        ++matched;
    }
    if (matched != ck.tensors.size())
        throw DataError("checkpoint restore: tensor count mismatch");
    b.ae.reg->freeze_all();
    return b;
}

// Rebuilds the exact vocabulary from its stored token list.
inline cond::Vocabulary vocab_from_tokens(const std::vector<std::string>& tokens) {
    // the first four are the specials; building from the rest reproduces ids
    std::vector<std::string> corpus(tokens.begin() + 4, tokens.end());
    return cond::Vocabulary::build(corpus);
}

// Prepared per-sample training inputs.
template <class T>
struct LdmTrainingSet {
    std::vector<ae::Latent<T>> posteriors;
    std::vector<core::Tensor<T>> frame_values;   // normalized first frames
    std::vector<std::vector<int64_t>> text_ids;
    std::vector<geo::BallPlan<T>> ff_plans;      // one entry when geometry is shared
    bool shared_geometry = true;

    const geo::BallPlan<T>& ff_plan_for(size_t i) const {
        return shared_geometry ? ff_plans[0] : ff_plans[i];
    }
};

template <class T>
LdmTrainingSet<T> prepare_training_set(LdmBundle<T>& b, const io::DatasetBundle& data,
                                       const std::vector<int>& idx) {
    LdmTrainingSet<T> set;
    set.shared_geometry = data.samples[static_cast<size_t>(idx[0])].is_grid();
    geo::BallPlan<T> enc0;
    for (size_t k = 0; k < idx.size(); ++k) {
        const auto& raw = data.samples[static_cast<size_t>(idx[k])];
        auto norm = normalize_sample(raw, b.ae.stats);
        if (k == 0 || !set.shared_geometry) enc0 = b.ae.transcoder.encode_plan(raw, b.ae.grid);
        set.posteriors.push_back(encode_posterior(b.ae, enc0, norm.template values_tensor<T>()));
        if (b.ff) {
            auto frame = norm.first_frame();
            set.frame_values.push_back(frame.template values_tensor<T>());
            if (k == 0 || !set.shared_geometry)
                set.ff_plans.push_back(b.ff->plan_for(raw.first_frame()));
        }
        if (b.text) {
            const std::string caption = data.meta.at("captions")[static_cast<size_t>(idx[k])].get<std::string>();
            set.text_ids.push_back(b.vocab.encode(caption, b.cfg.geti("text.max_len")));
        }
    }
    return set;
}

// Scaled posterior draw for one sample (pure vector math, no graph).
template <class T>
core::Tensor<T> draw_scaled_latent(const LdmBundle<T>& b, const ae::Latent<T>& post, core::Rng& rng) {
    auto z = core::Tensor<T>::zeros(post.mean.shape());
    const double s = b.ae.latent_scale;
    auto& d = z.mut_data();
    for (size_t i = 0; i < d.size(); ++i)
        d[i] = T(s * (double(post.mean.data()[i]) +
                      std::exp(0.5 * double(post.logvar.data()[i])) * rng.normal()));
    return z;
}

// Trains the denoiser and conditioning encoders on the frozen latent space.
template <class T>
LdmTrainResult train_ldm(LdmBundle<T>& b, const io::DatasetBundle& data,
                         const std::vector<int>& train_idx,
                         const std::function<void(const io::Checkpoint&)>& checkpoint_sink = {}) {
    if (train_idx.empty()) throw DataError("ldm training: empty train split");
    const auto& cfg = b.cfg;
    const int64_t steps = cfg.geti("train.steps");
    const int64_t batch = std::max<int64_t>(1, cfg.geti("train.batch"));
    const int64_t log_every = std::max<int64_t>(1, cfg.geti("train.log_every"));
    const int64_t ckpt_every = std::max<int64_t>(1, cfg.geti("train.ckpt_every"));
    const uint64_t seed = static_cast<uint64_t>(cfg.geti("seed"));
    const std::string modality = cfg.get("cond.modality");
    const double vlb_weight =
        b.vmode == diffusion::VarianceMode::Learned ? cfg.getd("diff.vlb_weight") : 0.0;

    auto set = prepare_training_set(b, data, train_idx);
    core::Adam<T> opt(b.reg->trainable(), cfg.getd("train.lr"), 0.9, 0.999, 1e-8,
                      /*allow_missing=*/true);

    Rng order_rng(seed, 0x10de);
    Rng noise_rng(seed, 0x401e);
    Rng modal_rng(seed, 0x30da);
    std::vector<int64_t> order(train_idx.size());
    std::iota(order.begin(), order.end(), 0);
    size_t cursor = order.size();

    LdmTrainResult result;
    for (int64_t step = 1; step <= steps; ++step) {
        std::vector<int64_t> chosen;
        for (int64_t k = 0; k < batch; ++k) {
            if (cursor >= order.size()) {
                for (size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[static_cast<size_t>(order_rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
                cursor = 0;
            }
            chosen.push_back(order[cursor++]);
        }

        std::vector<core::Tensor<T>> z_rows;
        std::vector<CondSource<T>> sources;
        for (int64_t c : chosen) {
            z_rows.push_back(draw_scaled_latent(b, set.posteriors[static_cast<size_t>(c)], noise_rng));
            CondSource<T> src;
            Modality pick = modality == "text" ? Modality::Text : Modality::FirstFrame;
            if (modality == "both") pick = modal_rng.uniform() < 0.5 ? Modality::FirstFrame : Modality::Text;
            if (b.guidance.enabled && modal_rng.uniform() < b.guidance.dropout) pick = Modality::Null;
            src.choice = pick;
            if (pick == Modality::FirstFrame) {
                src.ff_plan = &set.ff_plan_for(static_cast<size_t>(c));
                src.frame_values = set.frame_values[static_cast<size_t>(c)];
            } else if (pick == Modality::Text) {
                src.text_ids = set.text_ids[static_cast<size_t>(c)];
            }
            sources.push_back(std::move(src));
        }
        auto z0 = z_rows.size() == 1 ? z_rows[0] : core::concat(z_rows, 0);
        auto cond_batch = build_condition(b, sources);

        diffusion::DenoiseFn<T> model = [&](const core::Tensor<T>& zn, const std::vector<int>& ns) {
            return b.denoise(zn, ns, cond_batch);
        };
        auto loss = diffusion::loss_simple(model, z0, b.sched, b.param, noise_rng, nullptr, vlb_weight);
        const double loss_v = double(loss.item());
        if (!std::isfinite(loss_v))
            throw NumericalError("ldm training: non-finite loss at step " + std::to_string(step));
        loss.backward();
        opt.step();
        opt.zero_grad();

        if (step % log_every == 0 || step == steps)
            result.log.push_back({step, loss_v, loss_v, 0.0});
        if (checkpoint_sink && (step % ckpt_every == 0 || step == steps))
            checkpoint_sink(make_ldm_checkpoint(b, static_cast<uint64_t>(step)));
    }
    return result;
}

struct SamplerOptions {
    std::string kind = "ddpm";  // ddpm | ddim
    int steps = 50;             // ddim sub-steps
    double eta = 0.0;
};

// Draws trajectories for a batch of conditions; returns grid samples in
// physical units plus the raw scaled latents.
template <class T>
struct SampleOutput {
    std::vector<geo::FieldSample> grids;
    core::Tensor<T> z0;
};

template <class T>
SampleOutput<T> sample_trajectories(const LdmBundle<T>& b, const std::vector<CondSource<T>>& sources,
                                    const SamplerOptions& opts, core::Rng& rng) {
    core::NoGradGuard ng;
    const int64_t n = static_cast<int64_t>(sources.size());
    auto cond_batch = build_condition(b, sources);
    ConditionBatch<T> null_batch;
    if (b.guidance.enabled && b.guidance.weight != 0.0) {
        std::vector<CondSource<T>> nulls(static_cast<size_t>(n));
        null_batch = build_condition(b, nulls);
    }

    diffusion::DenoiseFn<T> model = [&](const core::Tensor<T>& zn, const std::vector<int>& ns) {
        auto out = b.denoise(zn, ns, cond_batch);
        if (b.guidance.enabled && b.guidance.weight != 0.0) {
            auto unc = b.denoise(zn, ns, null_batch);
            out.eps = diffusion::cfg_combine(out.eps, unc.eps, b.guidance);
        }
        return out;
    };

    auto z = core::Tensor<T>::zeros(b.latent_shape(n));
    for (auto& v : z.mut_data()) v = T(rng.normal());
    core::Tensor<T> z0;
    if (opts.kind == "ddim")
        z0 = diffusion::ddim_sample(model, z, b.sched, opts.steps, opts.eta, rng);
    else if (opts.kind == "ddpm")
        z0 = diffusion::ddpm_sample(model, z, b.sched, b.vmode, rng);
    else
        throw UsageError("unknown sampler kind '" + opts.kind + "' (ddpm|ddim)");

    // unscale, decode, interpolate back onto the data grid
    auto z_unscaled = core::scale(z0, T(1.0 / b.ae.latent_scale));
    auto grids = b.ae.vae.decode(z_unscaled);

    const int res = static_cast<int>(b.ae.grid.extents[0]);
    geo::FieldSample proto;
    proto.time_count = b.ae.grid.time_count;
    proto.spatial_dim = 2;
    proto.channels = 3;
    proto.grid_extents = {res, res};
    proto.channel_names = {"vx", "vy", "density"};
    auto dec_plan = b.ae.transcoder.decode_plan(b.ae.grid, proto.spacetime_coords(), false);
    auto kd = b.ae.transcoder.kappa(dec_plan, geo::KernelMode::Learned, true);

    SampleOutput<T> out;
    out.z0 = z0;
    for (int64_t i = 0; i < n; ++i) {
        auto vals = interpolate_row(b.ae, dec_plan, grids, i, kd);
        geo::FieldSample s = proto;
        s.values.resize(vals.data().size());
        for (size_t j = 0; j < s.values.size(); ++j) s.values[j] = float(vals.data()[j]);
        s.stats = b.ae.stats;
        out.grids.push_back(denormalize_sample(s, b.ae.stats));
    }
    return out;
}

// Decodes an already-sampled latent onto arbitrary spatial points, evaluated
// at every stored time level (mesh-layout result).
template <class T>
geo::FieldSample decode_latent_at(const LdmBundle<T>& b, const core::Tensor<T>& z0, int64_t row,
                                  const std::vector<double>& spatial_points) {
    core::NoGradGuard ng;
    if (spatial_points.size() % 2 != 0) throw UsageError("decode queries must be 2-d points");
    for (double c : spatial_points)
        if (c < 0.0 || c > 1.0) throw UsageError("decode queries must lie in [0,1] per axis");
    const int tcount = b.ae.grid.time_count;
    const int64_t m = static_cast<int64_t>(spatial_points.size()) / 2;

    std::vector<double> st;
    st.reserve(static_cast<size_t>(tcount) * m * 3);
    for (int t = 0; t < tcount; ++t) {
        const double tv = tcount > 1 ? double(t) / (tcount - 1) : 0.0;
        for (int64_t p = 0; p < m; ++p) {
            st.push_back(tv);
            st.push_back(spatial_points[static_cast<size_t>(p * 2)]);
            st.push_back(spatial_points[static_cast<size_t>(p * 2 + 1)]);
        }
    }
    auto z_unscaled = core::scale(z0, T(1.0 / b.ae.latent_scale));
    auto grids = b.ae.vae.decode(z_unscaled);
    auto plan = b.ae.transcoder.decode_plan(b.ae.grid, st, true);
    auto kd = b.ae.transcoder.kappa(plan, geo::KernelMode::Learned, true);
    auto vals = interpolate_row(b.ae, plan, grids, row, kd);

    geo::FieldSample s;
    s.time_count = tcount;
    s.spatial_dim = 2;
    s.channels = 3;
    s.channel_names = {"vx", "vy", "density"};
    s.coords.resize(static_cast<size_t>(m) * 2);
    for (size_t i = 0; i < s.coords.size(); ++i) s.coords[i] = float(spatial_points[i]);
    s.values.resize(vals.data().size());
    for (size_t j = 0; j < s.values.size(); ++j) s.values[j] = float(vals.data()[j]);
    s.stats = b.ae.stats;
    return denormalize_sample(s, b.ae.stats);
}

}  // namespace pdegen::pipeline
