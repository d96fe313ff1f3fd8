// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <optional>
#include <string>

#include "pdegen/geo/field_sample.hpp"

namespace pdegen::cond {

enum class FlowRegime { Laminar, Transition, Turbulent };

inline const char* regime_name(FlowRegime r) {
    switch (r) {
        case FlowRegime::Laminar: return "laminar";
        case FlowRegime::Transition: return "transition";
        case FlowRegime::Turbulent: return "turbulent";
    }
    return "?";
}

// Re < 200 laminar, Re < 350 transition, else turbulent.
inline FlowRegime flow_regime(double re) {
    if (re <= 0) throw UsageError("flow regime: Reynolds number must be positive");
    if (re < 200.0) return FlowRegime::Laminar;
    if (re < 350.0) return FlowRegime::Transition;
    return FlowRegime::Turbulent;
}

// Cylinder-flow scene parameters. Lengths are SI (meters) internally; the
// caption reports the radius in centimeters and the position in meters.
struct CylinderParams {
    double radius_m = 0.035;
    double pos_x = 0.4;
    double pos_y = 0.2;
    double inlet_velocity = 1.0;
    int reynolds = 300;
};

struct SmokeParams {
    double buoyancy = 0.5;
    int plume_count = 1;
};

struct Caption {
    std::string text;
    std::optional<CylinderParams> cylinder;
    std::optional<SmokeParams> smoke;
};

namespace detail {
inline std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}
}  // namespace detail

inline Caption caption_cylinder(const CylinderParams& p) {
    if (!std::isfinite(p.radius_m) || !std::isfinite(p.pos_x) || !std::isfinite(p.pos_y) ||
        !std::isfinite(p.inlet_velocity))
        throw UsageError("cylinder caption: non-finite parameter");
    Caption c;
    c.cylinder = p;
    c.text = "Fluid passes over a cylinder with a radius of " + detail::fmt2(p.radius_m * 100.0) +
             " and position: " + detail::fmt2(p.pos_x) + ", " + detail::fmt2(p.pos_y) +
             ". Fluid enters with a velocity of " + detail::fmt2(p.inlet_velocity) +
             ". The Reynolds number is " + std::to_string(p.reynolds) + ". The flow is " +
             regime_name(flow_regime(p.reynolds)) + ".";
    return c;
}

// Values-only ablation prompt: the extracted numbers without surrounding text.
inline std::string caption_cylinder_values_only(const CylinderParams& p) {
    return detail::fmt2(p.radius_m * 100.0) + " " + detail::fmt2(p.pos_x) + " " +
           detail::fmt2(p.pos_y) + " " + detail::fmt2(p.inlet_velocity) + " " +
           std::to_string(p.reynolds);
}

// Normalized parameter vector for the vector-conditioning ablation; each
// entry mapped to [-1,1] over the generator ranges.
inline std::vector<double> cylinder_param_vector(const CylinderParams& p, double r_lo, double r_hi,
                                                 double v_lo, double v_hi, double re_lo, double re_hi) {
    auto norm = [](double v, double lo, double hi) { return 2.0 * (v - lo) / (hi - lo) - 1.0; };
    return {norm(p.radius_m, r_lo, r_hi), norm(p.pos_x, 0.0, 1.6), norm(p.pos_y, 0.0, 0.4),
            norm(p.inlet_velocity, v_lo, v_hi), norm(double(p.reynolds), re_lo, re_hi)};
}

namespace detail {

struct Plume {
    int area = 0;
    double cx = 0, cy = 0;  // centroid in [0,1]
};

// 4-connected components of density > threshold on an nx*ny grid
// (row-major x-major layout as in FieldSample grids).
inline std::vector<Plume> find_plumes(const std::vector<float>& density, int nx, int ny,
                                      double threshold) {
    std::vector<int> label(static_cast<size_t>(nx * ny), -1);
    std::vector<Plume> out;
    std::vector<int> stack;
    for (int i = 0; i < nx * ny; ++i) {
        if (label[static_cast<size_t>(i)] >= 0 || density[static_cast<size_t>(i)] <= threshold) continue;
        const int id = static_cast<int>(out.size());
        out.push_back({});
        stack.assign(1, i);
        label[static_cast<size_t>(i)] = id;
        while (!stack.empty()) {
            const int cur = stack.back();
            stack.pop_back();
            const int x = cur / ny, y = cur % ny;
            out[static_cast<size_t>(id)].area++;
            out[static_cast<size_t>(id)].cx += (x + 0.5) / nx;
            out[static_cast<size_t>(id)].cy += (y + 0.5) / ny;
            const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
            for (auto& [xn, yn] : nb) {
                if (xn < 0 || xn >= nx || yn < 0 || yn >= ny) continue;
                const int j = xn * ny + yn;
                if (label[static_cast<size_t>(j)] < 0 && density[static_cast<size_t>(j)] > threshold) {
                    label[static_cast<size_t>(j)] = id;
                    stack.push_back(j);
                }
            }
        }
        auto& p = out.back();
        p.cx /= p.area;
        p.cy /= p.area;
    }
    // drop speckles, order by area descending (centroid tiebreak)
    std::vector<Plume> kept;
    for (const auto& p : out)
        if (p.area >= 4) kept.push_back(p);
    std::sort(kept.begin(), kept.end(), [](const Plume& a, const Plume& b) {
        if (a.area != b.area) return a.area > b.area;
        if (a.cx != b.cx) return a.cx < b.cx;
        return a.cy < b.cy;
    });
    return kept;
}

inline std::string quadrant_name(double cx, double cy) {
    std::string v = cy > 0.55 ? "upper" : (cy < 0.45 ? "lower" : "middle");
    std::string h = cx > 0.55 ? "right" : (cx < 0.45 ? "left" : "center");
    return v + " " + h;
}

}  // namespace detail

// Rule-based smoke caption: buoyancy prefix plus plume count, coarse location
// and relative size extracted from the initial density field.
inline Caption caption_smoke(double buoyancy, const geo::FieldSample& initial_frame,
                             int density_channel, double threshold = 0.1) {
    if (initial_frame.spatial_dim != 2 || !initial_frame.is_grid())
        throw UsageError("smoke caption: expects a 2-d grid frame");
    const int nx = initial_frame.grid_extents[0], ny = initial_frame.grid_extents[1];
    std::vector<float> density(static_cast<size_t>(nx * ny));
    for (int m = 0; m < nx * ny; ++m) density[static_cast<size_t>(m)] = initial_frame.value_at(0, m, density_channel);
    auto plumes = detail::find_plumes(density, nx, ny, threshold);

    Caption c;
    c.smoke = SmokeParams{buoyancy, static_cast<int>(plumes.size())};
    std::string s = "The buoyancy factor is " + detail::fmt2(buoyancy) + ".";
    if (plumes.empty()) {
        s += " There are no smoke plumes.";
    } else {
        s += plumes.size() == 1 ? " There is 1 smoke plume."
                                : " There are " + std::to_string(plumes.size()) + " smoke plumes.";
        int total = 0;
        for (const auto& p : plumes) total += p.area;
        for (size_t i = 0; i < plumes.size(); ++i) {
            const double frac = double(plumes[i].area) / double(total);
            const char* size = frac > 0.5 ? "large" : (frac > 0.25 ? "medium" : "small");
            s += " Plume " + std::to_string(i + 1) + " is " + size + " and located in the " +
                 detail::quadrant_name(plumes[i].cx, plumes[i].cy) + ".";
        }
    }
    c.text = s;
    return c;
}

// Persistence of the temporal velocity-derivative norm: compares the mean of
// ||d(vx)/dt + d(vy)/dt||_2 over the trailing third of the trajectory against
// cutoff times the leading-third mean.
inline bool karman_detect(const geo::FieldSample& sample, double cutoff = 0.3) {
    if (sample.time_count < 3) throw UsageError("karman detect: need at least 3 timesteps");
    int vx = 0, vy = 1;
    if (!sample.channel_names.empty()) {
        vx = vy = -1;
        for (size_t i = 0; i < sample.channel_names.size(); ++i) {
            if (sample.channel_names[i] == "vx") vx = static_cast<int>(i);
            if (sample.channel_names[i] == "vy") vy = static_cast<int>(i);
        }
        if (vx < 0 || vy < 0) throw DataError("karman detect: velocity channels vx/vy not found");
    } else if (sample.channels < 2) {
        throw DataError("karman detect: sample has no velocity channel pair");
    }

    const int m = sample.point_count();
    const int nt = sample.time_count - 1;  // derivative series length
    std::vector<double> norm(static_cast<size_t>(nt));
    for (int t = 0; t < nt; ++t) {
        double acc = 0;
        for (int p = 0; p < m; ++p) {
            const double dvx = double(sample.value_at(t + 1, p, vx)) - double(sample.value_at(t, p, vx));
            const double dvy = double(sample.value_at(t + 1, p, vy)) - double(sample.value_at(t, p, vy));
            const double w = dvx + dvy;
            acc += w * w;
        }
        norm[static_cast<size_t>(t)] = std::sqrt(acc);
    }
    const int third = std::max(1, nt / 3);
    double early = 0, late = 0;
    for (int t = 0; t < third; ++t) early += norm[static_cast<size_t>(t)];
    for (int t = nt - third; t < nt; ++t) late += norm[static_cast<size_t>(t)];
    early /= third;
    late /= third;
    return late > cutoff * early && late > 0.0;
}

}  // namespace pdegen::cond
