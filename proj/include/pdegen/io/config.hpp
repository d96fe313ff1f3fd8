// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pdegen/core/errors.hpp"

namespace pdegen::io {

// Flat key=value configuration covering every pipeline knob. Unknown keys are
// rejected; precedence is flag > file > default. `echo()` renders the fully
// resolved table for run logs.
class RunConfig {
public:
    RunConfig() {
        for (const auto& [k, v] : defaults()) values_[k] = v;
    }

    static const std::vector<std::pair<std::string, std::string>>& defaults() {
        static const std::vector<std::pair<std::string, std::string>> table = {
            {"seed", "1234"},
            {"out_dir", "runs"},

            {"data.path", "runs/smoke.lpde"},
            {"data.resolution", "32"},
            {"data.timesteps", "24"},
            {"data.train", "64"},
            {"data.val", "16"},
            {"data.dt", "0.04"},
            {"data.viscosity", "1e-4"},
            {"data.buoyancy_min", "0.3"},
            {"data.buoyancy_max", "0.6"},
            {"data.plumes_min", "1"},
            {"data.plumes_max", "4"},
            {"data.layout", "grid"},        // grid | mesh
            {"data.mesh_points", "1024"},

            {"ball.radius", "0.0425"},
            {"ball.weights", "equal_share"},  // equal_share | inverse_density
            {"kernel.hidden", "16"},
            {"kernel.depth", "1"},
            {"kernel.full_matrix", "false"},

            {"ae.width", "12"},
            {"ae.stages", "3"},
            {"ae.factor", "2"},
            {"ae.latent_channels", "4"},
            {"ae.kl_weight", "2e-7"},
            {"ae.kl_reduction", "sum"},  // sum | mean
            {"ae.recon", "l1"},          // l1 | l2
            {"ae.attn", "true"},

            {"train.steps", "2000"},
            {"train.batch", "4"},
            {"train.lr", "2e-3"},
            {"train.log_every", "50"},
            {"train.ckpt_every", "500"},

            {"diff.steps", "1000"},
            {"diff.schedule", "linear"},  // linear | cosine
            {"diff.param", "eps"},        // eps | v
            {"diff.variance", "fixed"},   // fixed | learned
            {"diff.vlb_weight", "0.001"},
            {"ldm.latent_scale", "0"},    // 0 = estimate / take from checkpoint

            {"model.kind", "dit"},  // dit | unet
            {"dit.hidden", "128"},
            {"dit.depth", "4"},
            {"dit.heads", "4"},
            {"dit.patch_t", "1"},
            {"dit.patch_s", "2"},
            {"dit.mlp_ratio", "4"},
            {"dit.cross_every", "1"},
            {"unet.width", "16"},
            {"unet.mults", "1,2"},

            {"cond.modality", "first_frame"},  // first_frame | text | both
            {"cond.dim", "64"},
            {"ff.grid", "0"},  // 0 = data resolution
            {"ff.width", "16"},
            {"ff.radius", "0.06"},
            {"text.max_len", "64"},
            {"text.layers", "2"},
            {"text.heads", "4"},

            {"cfg.enabled", "false"},
            {"cfg.weight", "0"},
            {"cfg.rescale", "0.7"},
            {"cfg.dropout", "0.1"},

            {"sample.kind", "ddpm"},  // ddpm | ddim
            {"sample.steps", "50"},
            {"sample.eta", "0"},
            {"sample.count", "4"},
            {"sample.text", ""},
            {"sample.frame", ""},     // dataset.lpde:index
            {"sample.queries", ""},   // empty | random:| coordinate file
            {"sample.render", "density"},

            {"rollout.windows", "4"},

            {"eval.mode", "direct"},  // direct | resolve
            {"eval.ddim_sweep", ""},
            {"eval.baseline", "none"},  // none | conv_ar
            {"eval.max_samples", "0"},  // 0 = all
        };
        return table;
    }

    void set(const std::string& key, const std::string& value) {
        if (!values_.count(key)) throw UsageError("unknown config key '" + key + "'");
        values_[key] = value;
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw UsageError("cannot open config file '" + path + "'");
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            const auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                const auto e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            if (trim(line).empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw UsageError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    // "key=value" override strings from the command line.
    void apply_override(const std::string& kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("override '" + kv + "' is not key=value");
        set(kv.substr(0, eq), kv.substr(eq + 1));
    }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
        return it->second;
    }

    int64_t geti(const std::string& key) const {
        try {
            return std::stoll(get(key));
        } catch (const std::exception&) {
            throw UsageError("config key '" + key + "' is not an integer: '" + get(key) + "'");
        }
    }

    double getd(const std::string& key) const {
        try {
            return std::stod(get(key));
        } catch (const std::exception&) {
            throw UsageError("config key '" + key + "' is not a number: '" + get(key) + "'");
        }
    }

    bool getb(const std::string& key) const {
        const std::string& v = get(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw UsageError("config key '" + key + "' is not a boolean: '" + v + "'");
    }

    std::vector<int64_t> get_int_list(const std::string& key) const {
        std::vector<int64_t> out;
        std::stringstream ss(get(key));
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(std::stoll(item));
        return out;
    }

    std::string echo() const {
        std::ostringstream os;
        for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
        return os.str();
    }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace pdegen::io
