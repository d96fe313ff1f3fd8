// SPDX-License-Identifier: Apache-2.0
//
// Single entry point for the PDE generation toolkit: dataset synthesis,
// autoencoder and latent-diffusion training, sampling, evaluation,
// autoregressive rollouts, captioning, and flop accounting.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pdegen/io/ppm.hpp"
#include "pdegen/pipeline/evaluate.hpp"
#include "pdegen/pipeline/rollout.hpp"

namespace fs = std::filesystem;
using namespace pdegen;
using pdegen::core::Rng;
using pdegen::pipeline::AeBundle;
using pdegen::pipeline::CondSource;
using pdegen::pipeline::LdmBundle;
using pdegen::pipeline::SamplerOptions;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "flat key=value config file");
    cmd->add_option("--set", args.overrides, "override a config key, e.g. --set train.lr=1e-3")
        ->take_all();
    cmd->add_option("--seed", args.seed, "override the run seed");
}

io::RunConfig resolve_config(const CommonArgs& args) {
    io::RunConfig cfg;
    if (!args.config_path.empty()) cfg.load_file(args.config_path);
    for (const auto& kv : args.overrides) cfg.apply_override(kv);
    if (args.seed >= 0) cfg.set("seed", std::to_string(args.seed));
    return cfg;
}

void echo_config(const io::RunConfig& cfg, const std::string& command) {
    std::cout << "# pdegen " << command << "\n" << cfg.echo() << std::flush;
}

std::string out_path(const io::RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.get("out_dir"));
    return (fs::path(cfg.get("out_dir")) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
}

void write_train_log(const std::string& path, const std::vector<pipeline::TrainLogRow>& rows) {
    std::ostringstream os;
    os << "step,loss,recon,kl\n";
    for (const auto& r : rows) os << r.step << "," << r.loss << "," << r.recon << "," << r.kl << "\n";
    write_text(path, os.str());
}

std::vector<std::string> captions_of(const io::DatasetBundle& data, const std::vector<int>& idx) {
    std::vector<std::string> out;
    for (int i : idx) out.push_back(data.meta.at("captions")[static_cast<size_t>(i)].get<std::string>());
    return out;
}

// "path:index" -> the stored sample's first frame
geo::FieldSample frame_from_spec(const std::string& spec) {
    const auto colon = spec.rfind(':');
    if (colon == std::string::npos)
        throw UsageError("frame spec must be dataset.lpde:index, got '" + spec + "'");
    const std::string path = spec.substr(0, colon);
    const int index = std::stoi(spec.substr(colon + 1));
    auto data = io::read_dataset(path);
    if (index < 0 || index >= static_cast<int>(data.samples.size()))
        throw UsageError("frame index " + std::to_string(index) + " outside dataset of " +
                         std::to_string(data.samples.size()) + " samples");
    return data.samples[static_cast<size_t>(index)].first_frame();
}

void render_channels(const io::RunConfig& cfg, const geo::FieldSample& traj,
                     const std::string& stem) {
    std::stringstream ss(cfg.get("sample.render"));
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (name.empty()) continue;
        int channel = -1;
        for (size_t c = 0; c < traj.channel_names.size(); ++c)
            if (traj.channel_names[c] == name) channel = static_cast<int>(c);
        if (channel < 0) throw UsageError("render: unknown channel '" + name + "'");
        const std::string path = out_path(cfg, stem + "_" + name + ".ppm");
        io::write_heatmap_strip(path, traj, channel);
        std::cout << "wrote " << path << "\n";
    }
}

int cmd_gen_data(const io::RunConfig& cfg) {
    echo_config(cfg, "gen-data");
    sim::GenSpec spec;
    spec.smoke.resolution = static_cast<int>(cfg.geti("data.resolution"));
    spec.smoke.frames = static_cast<int>(cfg.geti("data.timesteps"));
    spec.smoke.dt = cfg.getd("data.dt");
    spec.smoke.viscosity = cfg.getd("data.viscosity");
    spec.train_count = static_cast<int>(cfg.geti("data.train"));
    spec.val_count = static_cast<int>(cfg.geti("data.val"));
    spec.buoyancy_min = cfg.getd("data.buoyancy_min");
    spec.buoyancy_max = cfg.getd("data.buoyancy_max");
    spec.plumes_min = static_cast<int>(cfg.geti("data.plumes_min"));
    spec.plumes_max = static_cast<int>(cfg.geti("data.plumes_max"));
    spec.seed = static_cast<uint64_t>(cfg.geti("seed"));

    auto bundle = sim::generate_dataset(spec);
    if (cfg.get("data.layout") == "mesh") {
        // re-express every trajectory on sampled collocation points
        Rng mesh_rng(spec.seed, 0x3e5);
        const int m = static_cast<int>(cfg.geti("data.mesh_points"));
        for (auto& s : bundle.samples) {
            auto refine = sim::gradient_refinement(s, 2);
            s = sim::sample_to_mesh(s, m, mesh_rng, refine);
        }
        auto stats = geo::compute_channel_stats(bundle.samples);
        bundle.meta["stats"] = {{"mean", stats.mean}, {"stddev", stats.stddev}};
        for (auto& s : bundle.samples) s.stats = stats;
    }
    const std::string path = cfg.get("data.path");
    if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    io::write_dataset(path, bundle);

    std::cout << "wrote " << bundle.samples.size() << " samples ("
              << cfg.geti("data.train") << " train / " << cfg.geti("data.val") << " val) to " << path
              << "\n"
              << "layout " << cfg.get("data.layout") << ", grid " << cfg.geti("data.resolution")
              << "^2 x " << cfg.geti("data.timesteps") << " frames\n";
    for (size_t i = 0; i < std::min<size_t>(3, bundle.samples.size()); ++i)
        std::cout << "caption[" << i << "]: "
                  << bundle.meta["captions"][i].get<std::string>() << "\n";
    return 0;
}

int cmd_train_ae(const io::RunConfig& cfg, const std::string& out) {
    echo_config(cfg, "train-ae");
    auto data = io::read_dataset(cfg.get("data.path"));
    const auto train_idx = io::split_indices(data.meta, "train");
    auto bundle = pipeline::build_ae_bundle<float>(cfg);
    const std::string ckpt = out.empty() ? out_path(cfg, "ae.lpck") : out;

    auto result = pipeline::train_autoencoder<float>(
        bundle, data, train_idx,
        [&](const io::Checkpoint& ck) { io::save_checkpoint(ckpt, ck); });
    io::save_checkpoint(ckpt, pipeline::make_ae_checkpoint(bundle, static_cast<uint64_t>(cfg.geti("train.steps"))));
    write_train_log(out_path(cfg, "ae_train_log.csv"), result.log);

    std::cout << "train recon rel_l2 " << result.final_recon_rel_l2 << ", final kl "
              << result.final_kl << ", latent scale " << bundle.latent_scale << "\n"
              << "checkpoint " << ckpt << "\n";
    return 0;
}

int cmd_train_ldm(const io::RunConfig& cfg, const std::string& ae_ckpt, const std::string& out) {
    echo_config(cfg, "train-ldm");
    auto data = io::read_dataset(cfg.get("data.path"));
    const auto train_idx = io::split_indices(data.meta, "train");
    auto ae = pipeline::load_ae_bundle<float>(io::load_checkpoint(ae_ckpt));
    // the denoiser geometry must match the frozen autoencoder's
    auto ldm = pipeline::build_ldm_bundle<float>(cfg, std::move(ae), captions_of(data, train_idx));
    const std::string ckpt = out.empty() ? out_path(cfg, "ldm.lpck") : out;

    auto result = pipeline::train_ldm<float>(
        ldm, data, train_idx, [&](const io::Checkpoint& ck) { io::save_checkpoint(ckpt, ck); });
    io::save_checkpoint(ckpt, pipeline::make_ldm_checkpoint(ldm, static_cast<uint64_t>(cfg.geti("train.steps"))));
    write_train_log(out_path(cfg, "ldm_train_log.csv"), result.log);
    std::cout << "final loss " << result.log.back().loss << "\ncheckpoint " << ckpt << "\n";
    return 0;
}

int cmd_sample(const io::RunConfig& cfg, const std::string& ckpt) {
    echo_config(cfg, "sample");
    auto ldm = pipeline::load_ldm_bundle<float>(io::load_checkpoint(ckpt));
    const int count = static_cast<int>(cfg.geti("sample.count"));
    const std::string text = cfg.get("sample.text");
    const std::string frame_spec = cfg.get("sample.frame");
    if (text.empty() == frame_spec.empty())
        throw UsageError("sample: provide exactly one of sample.text or sample.frame");

    geo::BallPlan<float> plan;
    core::Tensor<float> frame_values;
    std::vector<CondSource<float>> sources;
    for (int i = 0; i < count; ++i) {
        CondSource<float> src;
        if (!text.empty()) {
            if (!ldm.text) throw UsageError("sample: checkpoint has no text encoder");
            src.choice = cond::Modality::Text;
            src.text_ids = ldm.vocab.encode(text, ldm.cfg.geti("text.max_len"));
        } else {
            if (!ldm.ff) throw UsageError("sample: checkpoint has no first-frame encoder");
            if (i == 0) {
                auto frame = frame_from_spec(frame_spec);
                auto norm = pipeline::normalize_sample(frame, ldm.ae.stats);
                plan = ldm.ff->plan_for(frame);
                frame_values = norm.values_tensor<float>();
            }
            src.choice = cond::Modality::FirstFrame;
            src.ff_plan = &plan;
            src.frame_values = frame_values;
        }
        sources.push_back(std::move(src));
    }

    SamplerOptions opts;
    opts.kind = cfg.get("sample.kind");
    opts.steps = static_cast<int>(cfg.geti("sample.steps"));
    opts.eta = cfg.getd("sample.eta");
    Rng rng(static_cast<uint64_t>(cfg.geti("seed")), 0x5a3);
    auto out = pipeline::sample_trajectories(ldm, sources, opts, rng);

    io::DatasetBundle result;
    result.samples = out.grids;
    result.meta = {{"kind", "generated"},
                   {"channel_names", {"vx", "vy", "density"}},
                   {"condition", text.empty() ? frame_spec : text},
                   {"sampler", opts.kind},
                   {"split", {{"train", nlohmann::json::array()}, {"val", nlohmann::json::array()}}}};
    const std::string traj_path = out_path(cfg, "samples.lpde");
    io::write_dataset(traj_path, result);
    std::cout << "wrote " << count << " trajectories to " << traj_path << "\n";
    for (int i = 0; i < count; ++i) render_channels(cfg, out.grids[static_cast<size_t>(i)], "sample" + std::to_string(i));

    const std::string queries = cfg.get("sample.queries");
    if (!queries.empty()) {
        std::vector<double> pts;
        if (queries.rfind("random:", 0) == 0) {
            const int m = std::stoi(queries.substr(7));
            Rng qrng(static_cast<uint64_t>(cfg.geti("seed")), 0x9e0);
            for (int i = 0; i < m; ++i) {
                pts.push_back(qrng.uniform());
                pts.push_back(qrng.uniform());
            }
        } else {
            std::ifstream in(queries);
            if (!in) throw DataError("cannot open query file '" + queries + "'");
            double x, y;
            while (in >> x >> y) {
                pts.push_back(x);
                pts.push_back(y);
            }
        }
        io::DatasetBundle mesh;
        for (int i = 0; i < count; ++i)
            mesh.samples.push_back(pipeline::decode_latent_at(ldm, out.z0, i, pts));
        mesh.meta = {{"kind", "generated_mesh"},
                     {"channel_names", {"vx", "vy", "density"}},
                     {"split", {{"train", nlohmann::json::array()}, {"val", nlohmann::json::array()}}}};
        const std::string mesh_path = out_path(cfg, "samples_mesh.lpde");
        io::write_dataset(mesh_path, mesh);
        std::cout << "decoded " << pts.size() / 2 << " query points per sample to " << mesh_path << "\n";
    }
    return 0;
}

int cmd_evaluate(const io::RunConfig& cfg, const std::string& ckpt) {
    echo_config(cfg, "evaluate");
    auto ldm = pipeline::load_ldm_bundle<float>(io::load_checkpoint(ckpt));
    auto data = io::read_dataset(cfg.get("data.path"));
    auto val_idx = io::split_indices(data.meta, "val");
    if (val_idx.empty()) throw DataError("evaluate: validation split is empty");
    if (const int64_t cap = cfg.geti("eval.max_samples"); cap > 0 && cap < static_cast<int64_t>(val_idx.size()))
        val_idx.resize(static_cast<size_t>(cap));

    SamplerOptions opts;
    opts.kind = cfg.get("sample.kind");
    opts.steps = static_cast<int>(cfg.geti("sample.steps"));
    opts.eta = cfg.getd("sample.eta");
    const auto mode = cfg.get("eval.mode") == "resolve" ? pipeline::EvalMode::Resolve
                                                        : pipeline::EvalMode::Direct;
    const std::string mstr = cfg.get("cond.modality");
    const auto modality = (mode == pipeline::EvalMode::Resolve || mstr == "text")
                              ? cond::Modality::Text
                              : cond::Modality::FirstFrame;

    Rng rng(static_cast<uint64_t>(cfg.geti("seed")), 0xe7a);
    auto report = pipeline::evaluate(ldm, data, val_idx, modality, mode, opts, rng);
    std::cout << report.table();
    write_text(out_path(cfg, "report.txt"), report.table());
    write_text(out_path(cfg, "report.csv"), report.csv());

    if (!cfg.get("eval.ddim_sweep").empty()) {
        std::vector<int> steps;
        std::stringstream ss(cfg.get("eval.ddim_sweep"));
        std::string item;
        while (std::getline(ss, item, ',')) steps.push_back(std::stoi(item));
        auto rows = pipeline::ddim_sweep(ldm, data, val_idx, modality, steps,
                                         static_cast<uint64_t>(cfg.geti("seed")));
        std::cout << pipeline::sweep_table(rows);
        write_text(out_path(cfg, "ddim_sweep.txt"), pipeline::sweep_table(rows));
    }

    if (cfg.get("eval.baseline") == "conv_ar") {
        const auto train_idx = io::split_indices(data.meta, "train");
        pipeline::ConvArBaseline<float> ar(static_cast<uint64_t>(cfg.geti("seed")));
        ar.train(data, train_idx, ldm.ae.stats, 1500, 2e-3, static_cast<uint64_t>(cfg.geti("seed")));
        std::vector<double> curve;
        for (int i : val_idx) {
            auto roll = ar.rollout(data.samples[static_cast<size_t>(i)], ldm.ae.stats);
            auto c = metrics::per_timestep_loss(roll, data.samples[static_cast<size_t>(i)]);
            if (curve.empty()) curve.assign(c.size(), 0.0);
            for (size_t t = 0; t < c.size(); ++t) curve[t] += c[t] / double(val_idx.size());
        }
        std::ostringstream os;
        os << "per-timestep rel_l2 (conv-ar baseline vs ldm)\n";
        for (size_t t = 0; t < curve.size(); ++t)
            os << t << "," << curve[t] << "," << report.per_timestep_mean[t] << "\n";
        os << "fitted slopes: conv_ar " << metrics::fitted_slope(curve) << ", ldm "
           << metrics::fitted_slope(report.per_timestep_mean) << "\n";
        std::cout << os.str();
        write_text(out_path(cfg, "baseline_curves.csv"), os.str());
    }
    return 0;
}

int cmd_rollout(const io::RunConfig& cfg, const std::string& ckpt) {
    echo_config(cfg, "rollout-ar");
    auto ldm = pipeline::load_ldm_bundle<float>(io::load_checkpoint(ckpt));
    const int windows = static_cast<int>(cfg.geti("rollout.windows"));
    const std::string text = cfg.get("sample.text");
    const std::string frame_spec = cfg.get("sample.frame");
    if (text.empty() == frame_spec.empty())
        throw UsageError("rollout-ar: provide exactly one of sample.text or sample.frame");

    CondSource<float> src;
    geo::BallPlan<float> plan;
    core::Tensor<float> frame_values;
    if (!text.empty()) {
        src.choice = cond::Modality::Text;
        src.text_ids = ldm.vocab.encode(text, ldm.cfg.geti("text.max_len"));
    } else {
        auto frame = frame_from_spec(frame_spec);
        auto norm = pipeline::normalize_sample(frame, ldm.ae.stats);
        plan = ldm.ff->plan_for(frame);
        frame_values = norm.values_tensor<float>();
        src.choice = cond::Modality::FirstFrame;
        src.ff_plan = &plan;
        src.frame_values = frame_values;
    }

    SamplerOptions opts;
    opts.kind = cfg.get("sample.kind");
    opts.steps = static_cast<int>(cfg.geti("sample.steps"));
    opts.eta = cfg.getd("sample.eta");
    Rng rng(static_cast<uint64_t>(cfg.geti("seed")), 0x011);
    auto result = pipeline::rollout_autoregressive(ldm, src, windows, opts, rng);

    for (size_t w = 0; w < result.window_modalities.size(); ++w)
        std::cout << "window " << w + 1 << ": conditioned on "
                  << cond::modality_name(result.window_modalities[w]) << "\n";
    io::DatasetBundle out;
    out.samples = {result.trajectory};
    out.meta = {{"kind", "rollout"},
                {"channel_names", {"vx", "vy", "density"}},
                {"windows", windows},
                {"split", {{"train", nlohmann::json::array()}, {"val", nlohmann::json::array()}}}};
    const std::string path = out_path(cfg, "rollout.lpde");
    io::write_dataset(path, out);
    std::cout << "wrote " << result.trajectory.time_count << " frames to " << path << "\n";
    render_channels(cfg, result.trajectory, "rollout");
    return 0;
}

int cmd_caption(const io::RunConfig& cfg, double radius_cm, double px, double py, double inlet,
                int reynolds, bool random_params, const std::string& smoke_spec) {
    echo_config(cfg, "caption");
    if (!smoke_spec.empty()) {
        const auto colon = smoke_spec.rfind(':');
        if (colon == std::string::npos) throw UsageError("caption: smoke spec must be dataset.lpde:index");
        auto data = io::read_dataset(smoke_spec.substr(0, colon));
        const int idx = std::stoi(smoke_spec.substr(colon + 1));
        const double buoy = data.meta.at("params")[static_cast<size_t>(idx)]["buoyancy"].get<double>();
        auto cap = cond::caption_smoke(buoy, data.samples[static_cast<size_t>(idx)].first_frame(), 2);
        std::cout << cap.text << "\n";
        return 0;
    }
    cond::CylinderParams p;
    if (random_params) {
        Rng rng(static_cast<uint64_t>(cfg.geti("seed")), 0xca9);
        p.radius_m = rng.uniform(0.02, 0.08);
        p.pos_x = rng.uniform(0.2, 1.4);
        p.pos_y = rng.uniform(0.1, 0.3);
        p.inlet_velocity = rng.uniform(0.25, 2.5);
        p.reynolds = static_cast<int>(std::lround(p.inlet_velocity * 2.0 * p.radius_m / 1e-4));
    } else {
        p.radius_m = radius_cm / 100.0;
        p.pos_x = px;
        p.pos_y = py;
        p.inlet_velocity = inlet;
        p.reynolds = reynolds;
    }
    auto cap = cond::caption_cylinder(p);
    std::cout << cap.text << "\n";
    return 0;
}

int cmd_flops(const io::RunConfig& cfg) {
    echo_config(cfg, "flops");
    auto ae = pipeline::build_ae_bundle<float>(cfg);
    std::vector<std::string> corpus{"The buoyancy factor is 0.50."};
    auto ldm = pipeline::build_ldm_bundle<float>(cfg, std::move(ae), corpus);

    models::FlopCounter fc = ldm.dit ? models::dit_flops(ldm.dit->config(), ldm.cond_token_length())
                                     : models::unet_flops(ldm.unet->config(), ldm.cond_token_length());
    char buf[128];
    for (const auto& line : fc.lines) {
        std::snprintf(buf, sizeof(buf), "%-24s %14lld\n", line.label.c_str(),
                      static_cast<long long>(line.flops));
        std::cout << buf;
    }
    std::snprintf(buf, sizeof(buf), "%-24s %14lld\n", "total_per_forward",
                  static_cast<long long>(fc.total()));
    std::cout << buf;
    const int64_t t = cfg.geti("data.timesteps");
    std::snprintf(buf, sizeof(buf), "%-24s %14lld  (x%lld frames)\n", "autoregressive_total",
                  static_cast<long long>(models::autoregressive_total(fc.total(), t)),
                  static_cast<long long>(t));
    std::cout << buf;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent diffusion toolkit for PDE trajectory generation"};
    app.require_subcommand(1);

    CommonArgs gen_args, trae_args, trldm_args, sample_args, eval_args, roll_args, cap_args, flops_args;
    std::string ae_out, ldm_out, ae_ckpt, ldm_ckpt_sample, ldm_ckpt_eval, ldm_ckpt_roll;
    double cap_radius = 3.5, cap_px = 0.4, cap_py = 0.2, cap_inlet = 1.0;
    int cap_re = 300;
    bool cap_random = false;
    std::string cap_smoke;

    auto* gen = app.add_subcommand("gen-data", "solve and write a synthetic smoke dataset");
    add_common(gen, gen_args);

    auto* trae = app.add_subcommand("train-ae", "train the mesh autoencoder");
    add_common(trae, trae_args);
    trae->add_option("--out", ae_out, "checkpoint output path");

    auto* trldm = app.add_subcommand("train-ldm", "train the latent diffusion model");
    add_common(trldm, trldm_args);
    trldm->add_option("--ae", ae_ckpt, "trained autoencoder checkpoint")->required();
    trldm->add_option("--out", ldm_out, "checkpoint output path");

    auto* smp = app.add_subcommand("sample", "generate trajectories from a condition");
    add_common(smp, sample_args);
    smp->add_option("--ckpt", ldm_ckpt_sample, "trained ldm checkpoint")->required();
    smp->add_option("--text", [&sample_args](const std::vector<std::string>& v) {
        sample_args.overrides.push_back("sample.text=" + v[0]);
        return true;
    }, "text prompt condition");
    smp->add_option("--frame", [&sample_args](const std::vector<std::string>& v) {
        sample_args.overrides.push_back("sample.frame=" + v[0]);
        return true;
    }, "first-frame condition, dataset.lpde:index");

    auto* evl = app.add_subcommand("evaluate", "score the model on the validation split");
    add_common(evl, eval_args);
    evl->add_option("--ckpt", ldm_ckpt_eval, "trained ldm checkpoint")->required();

    auto* rol = app.add_subcommand("rollout-ar", "autoregressive multi-window generation");
    add_common(rol, roll_args);
    rol->add_option("--ckpt", ldm_ckpt_roll, "trained ldm checkpoint")->required();
    rol->add_option("--text", [&roll_args](const std::vector<std::string>& v) {
        roll_args.overrides.push_back("sample.text=" + v[0]);
        return true;
    }, "text prompt condition");
    rol->add_option("--frame", [&roll_args](const std::vector<std::string>& v) {
        roll_args.overrides.push_back("sample.frame=" + v[0]);
        return true;
    }, "first-frame condition, dataset.lpde:index");
    rol->add_option("--windows", [&roll_args](const std::vector<std::string>& v) {
        roll_args.overrides.push_back("rollout.windows=" + v[0]);
        return true;
    }, "number of generation windows");

    auto* cap = app.add_subcommand("caption", "procedural captions for scene parameters");
    add_common(cap, cap_args);
    cap->add_option("--radius-cm", cap_radius, "cylinder radius in centimeters");
    cap->add_option("--pos-x", cap_px, "cylinder x position in meters");
    cap->add_option("--pos-y", cap_py, "cylinder y position in meters");
    cap->add_option("--inlet", cap_inlet, "inlet velocity in m/s");
    cap->add_option("--re", cap_re, "Reynolds number");
    cap->add_flag("--random", cap_random, "draw parameters from the generator ranges");
    cap->add_option("--smoke", cap_smoke, "caption a stored smoke sample, dataset.lpde:index");

    auto* flp = app.add_subcommand("flops", "analytic flop accounting for the configured model");
    add_common(flp, flops_args);

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_data(resolve_config(gen_args));
        if (trae->parsed()) return cmd_train_ae(resolve_config(trae_args), ae_out);
        if (trldm->parsed()) return cmd_train_ldm(resolve_config(trldm_args), ae_ckpt, ldm_out);
        if (smp->parsed()) return cmd_sample(resolve_config(sample_args), ldm_ckpt_sample);
        if (evl->parsed()) return cmd_evaluate(resolve_config(eval_args), ldm_ckpt_eval);
        if (rol->parsed()) return cmd_rollout(resolve_config(roll_args), ldm_ckpt_roll);
        if (cap->parsed())
            return cmd_caption(resolve_config(cap_args), cap_radius, cap_px, cap_py, cap_inlet,
                               cap_re, cap_random, cap_smoke);
        if (flp->parsed()) return cmd_flops(resolve_config(flops_args));
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
