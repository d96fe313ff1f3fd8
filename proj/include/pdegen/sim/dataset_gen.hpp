// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/cond/caption.hpp"
#include "pdegen/io/dataset_file.hpp"
#include "pdegen/sim/smoke_solver.hpp"

namespace pdegen::sim {

struct GenSpec {
    SmokeSpec smoke;
    int train_count = 64;
    int val_count = 16;
    double buoyancy_min = 0.3;
    double buoyancy_max = 0.6;
    int plumes_min = 1;
    int plumes_max = 4;
    uint64_t seed = 1234;
};

struct GeneratedSample {
    geo::FieldSample sample;
    double buoyancy = 0;
    std::string caption;
};

inline GeneratedSample generate_one(const GenSpec& spec, core::Rng rng) {
    GeneratedSample out;
    SmokeSpec s = spec.smoke;
    out.buoyancy = rng.uniform(spec.buoyancy_min, spec.buoyancy_max);
    s.buoyancy = out.buoyancy;
    SmokeSolver solver(s);
    const int plumes = static_cast<int>(rng.uniform_int(spec.plumes_min, spec.plumes_max));
    for (int p = 0; p < plumes; ++p)
        solver.add_gaussian_plume(rng.uniform(0.2, 0.8), rng.uniform(0.12, 0.45),
                                  rng.uniform(0.05, 0.11), rng.uniform(0.7, 1.0));
    out.sample = solver.run();
    out.caption = cond::caption_smoke(out.buoyancy, out.sample.first_frame(), 2).text;
    return out;
}

// Full dataset: solved trajectories, captions, stats and the split recorded
// in the sidecar. File contents are a pure function of the spec.
inline io::DatasetBundle generate_dataset(const GenSpec& spec) {
    if (spec.train_count < 1 || spec.val_count < 0)
        throw UsageError("dataset generation: bad sample counts");
    core::Rng root(spec.seed, 0x5eed);
    io::DatasetBundle bundle;
    nlohmann::json captions = nlohmann::json::array();
    nlohmann::json params = nlohmann::json::array();
    const int total = spec.train_count + spec.val_count;
    for (int i = 0; i < total; ++i) {
        auto g = generate_one(spec, root.split(static_cast<uint64_t>(i)));
        captions.push_back(g.caption);
        params.push_back({{"buoyancy", g.buoyancy}});
        bundle.samples.push_back(std::move(g.sample));
    }
    auto stats = geo::compute_channel_stats(bundle.samples);
    std::vector<int> train_idx, val_idx;
    for (int i = 0; i < spec.train_count; ++i) train_idx.push_back(i);
    for (int i = spec.train_count; i < total; ++i) val_idx.push_back(i);
    bundle.meta = {
        {"kind", "smoke_buoyancy"},
        {"channel_names", {"vx", "vy", "density"}},
        {"captions", captions},
        {"params", params},
        {"stats", {{"mean", stats.mean}, {"stddev", stats.stddev}}},
        {"split", {{"train", train_idx}, {"val", val_idx}}},
        {"seed", spec.seed},
        {"solver",
         {{"resolution", spec.smoke.resolution},
          {"frames", spec.smoke.frames},
          {"dt", spec.smoke.dt},
          {"viscosity", spec.smoke.viscosity}}},
    };
    for (auto& s : bundle.samples) {
        s.channel_names = {"vx", "vy", "density"};
        s.stats = stats;
    }
    return bundle;
}

inline float bilinear_at(const geo::FieldSample& grid, int t, int c, double x, double y);

// Draws M collocation points with density proportional to the refinement map
// (grid-resolution weights; empty map = uniform) and bilinearly samples the
// trajectory at those points.
inline geo::FieldSample sample_to_mesh(const geo::FieldSample& grid, int point_count,
                                       core::Rng& rng, const std::vector<double>& refinement = {},
                                       bool snap_to_grid = false) {
    if (!grid.is_grid() || grid.spatial_dim != 2)
        throw UsageError("sample_to_mesh: expects a 2-d grid trajectory");
    if (point_count < 64) throw UsageError("sample_to_mesh: need at least 64 points");
    const int nx = grid.grid_extents[0], ny = grid.grid_extents[1];
    std::vector<double> weights = refinement;
    if (weights.empty()) weights.assign(static_cast<size_t>(nx * ny), 1.0);
    if (static_cast<int>(weights.size()) != nx * ny)
        throw UsageError("sample_to_mesh: refinement map size mismatch");
    double total = 0;
    for (double w : weights) {
        if (w < 0) throw UsageError("sample_to_mesh: negative refinement weight");
        total += w;
    }
    if (total <= 0) throw UsageError("sample_to_mesh: refinement map is identically zero");

    std::vector<double> cdf(weights.size());
    double acc = 0;
    for (size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i] / total;
        cdf[i] = acc;
    }

    geo::FieldSample mesh;
    mesh.time_count = grid.time_count;
    mesh.spatial_dim = 2;
    mesh.channels = grid.channels;
    mesh.channel_names = grid.channel_names;
    mesh.stats = grid.stats;
    mesh.coords.resize(static_cast<size_t>(point_count) * 2);
    for (int p = 0; p < point_count; ++p) {
        const double u = rng.uniform();
        const size_t cell = static_cast<size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        const int ci = static_cast<int>(cell) / ny, cj = static_cast<int>(cell) % ny;
        double x, y;
        if (snap_to_grid) {
            x = (ci + 0.5) / nx;
            y = (cj + 0.5) / ny;
        } else {
            x = (ci + rng.uniform()) / nx;
            y = (cj + rng.uniform()) / ny;
        }
        mesh.coords[static_cast<size_t>(p * 2)] = float(x);
        mesh.coords[static_cast<size_t>(p * 2 + 1)] = float(y);
    }

    mesh.values.resize(static_cast<size_t>(grid.time_count) * point_count * grid.channels);
    for (int t = 0; t < grid.time_count; ++t)
        for (int p = 0; p < point_count; ++p)
            for (int c = 0; c < grid.channels; ++c)
                mesh.values[static_cast<size_t>((t * point_count + p) * grid.channels + c)] =
                    bilinear_at(grid, t, c, mesh.coords[static_cast<size_t>(p * 2)],
                                mesh.coords[static_cast<size_t>(p * 2 + 1)]);
    return mesh;
}

// Cell-center bilinear interpolation with edge clamping.
inline float bilinear_at(const geo::FieldSample& grid, int t, int c, double x, double y) {
    const int nx = grid.grid_extents[0], ny = grid.grid_extents[1];
    const double gx = std::min(std::max(x * nx - 0.5, 0.0), double(nx - 1));
    const double gy = std::min(std::max(y * ny - 0.5, 0.0), double(ny - 1));
    const int i0 = std::min(static_cast<int>(gx), nx - 2 >= 0 ? nx - 2 : 0);
    const int j0 = std::min(static_cast<int>(gy), ny - 2 >= 0 ? ny - 2 : 0);
    const double fx = gx - i0, fy = gy - j0;
    auto at = [&](int i, int j) { return double(grid.value_at(t, i * ny + j, c)); };
    return float((1 - fx) * (1 - fy) * at(i0, j0) + fx * (1 - fy) * at(i0 + 1, j0) +
                 (1 - fx) * fy * at(i0, j0 + 1) + fx * fy * at(i0 + 1, j0 + 1));
}

// Default refinement map: uniform mass plus extra weight where the density
// gradient is large (time-averaged).
inline std::vector<double> gradient_refinement(const geo::FieldSample& grid, int density_channel,
                                               double boost = 3.0) {
    const int nx = grid.grid_extents[0], ny = grid.grid_extents[1];
    std::vector<double> w(static_cast<size_t>(nx * ny), 0.0);
    for (int t = 0; t < grid.time_count; ++t)
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ny; ++j) {
                const int ip = std::min(i + 1, nx - 1), im = std::max(i - 1, 0);
                const int jp = std::min(j + 1, ny - 1), jm = std::max(j - 1, 0);
                const double gx = grid.value_at(t, ip * ny + j, density_channel) -
                                  grid.value_at(t, im * ny + j, density_channel);
                const double gy = grid.value_at(t, i * ny + jp, density_channel) -
                                  grid.value_at(t, i * ny + jm, density_channel);
                w[static_cast<size_t>(i * ny + j)] += std::sqrt(gx * gx + gy * gy);
            }
    double mx = 0;
    for (double v : w) mx = std::max(mx, v);
    if (mx <= 0) mx = 1;
    for (auto& v : w) v = 1.0 + boost * v / mx;
    return w;
}

// Re-runs the solver from a (possibly generated) first frame; the reference
// for text-conditioned evaluation.
inline geo::FieldSample resolve_trajectory(const geo::FieldSample& first_frame, const SmokeSpec& spec) {
    if (!first_frame.is_grid() || first_frame.spatial_dim != 2 || first_frame.channels != 3)
        throw UsageError("resolve: first frame must be a 2-d grid with vx, vy, density");
    if (first_frame.grid_extents[0] != spec.resolution || first_frame.grid_extents[1] != spec.resolution)
        throw UsageError("resolve: frame resolution does not match the solver grid");
    SmokeSolver solver(spec);
    std::vector<float> frame(first_frame.values.begin(),
                             first_frame.values.begin() + int64_t(spec.resolution) * spec.resolution * 3);
    solver.set_initial_from_centers(frame);
    return solver.run();
}

}  // namespace pdegen::sim
