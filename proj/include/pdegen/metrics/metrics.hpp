// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pdegen/geo/field_sample.hpp"

namespace pdegen::metrics {

// ||pred - true||_2 / ||true||_2 over the whole tensor.
inline double rel_l2(const std::vector<float>& pred, const std::vector<float>& truth) {
    if (pred.size() != truth.size()) throw UsageError("rel_l2: size mismatch");
    double num = 0, den = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = double(pred[i]) - double(truth[i]);
        num += d * d;
        den += double(truth[i]) * double(truth[i]);
    }
    if (den <= 0) throw DataError("rel_l2: reference tensor has zero norm");
    return std::sqrt(num / den);
}

inline double rel_l2(const geo::FieldSample& pred, const geo::FieldSample& truth) {
    return rel_l2(pred.values, truth.values);
}

// Per-channel relative L2, then the mean across channels.
inline std::vector<double> rel_l2_per_channel(const geo::FieldSample& pred,
                                              const geo::FieldSample& truth) {
    if (pred.values.size() != truth.values.size() || pred.channels != truth.channels)
        throw UsageError("rel_l2: sample layout mismatch");
    const int c = truth.channels;
    std::vector<double> num(static_cast<size_t>(c), 0.0), den(static_cast<size_t>(c), 0.0);
    for (size_t i = 0; i < truth.values.size(); ++i) {
        const size_t ch = i % static_cast<size_t>(c);
        const double d = double(pred.values[i]) - double(truth.values[i]);
        num[ch] += d * d;
        den[ch] += double(truth.values[i]) * double(truth.values[i]);
    }
    std::vector<double> out(static_cast<size_t>(c));
    for (int k = 0; k < c; ++k) {
        if (den[static_cast<size_t>(k)] <= 0) throw DataError("rel_l2: channel " + std::to_string(k) + " has zero norm");
        out[static_cast<size_t>(k)] = std::sqrt(num[static_cast<size_t>(k)] / den[static_cast<size_t>(k)]);
    }
    return out;
}

// Relative L2 restricted to each timestep slice.
inline std::vector<double> per_timestep_loss(const geo::FieldSample& pred,
                                             const geo::FieldSample& truth) {
    if (pred.values.size() != truth.values.size() || pred.time_count != truth.time_count)
        throw UsageError("per_timestep_loss: layout mismatch");
    const int t = truth.time_count;
    const size_t stride = truth.values.size() / static_cast<size_t>(t);
    std::vector<double> out(static_cast<size_t>(t));
    for (int k = 0; k < t; ++k) {
        std::vector<float> p(pred.values.begin() + k * stride, pred.values.begin() + (k + 1) * stride);
        std::vector<float> g(truth.values.begin() + k * stride, truth.values.begin() + (k + 1) * stride);
        out[static_cast<size_t>(k)] = rel_l2(p, g);
    }
    return out;
}

// Least-squares slope of a curve against its index.
inline double fitted_slope(const std::vector<double>& y) {
    const double n = double(y.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        sx += double(i);
        sy += y[i];
        sxx += double(i) * double(i);
        sxy += double(i) * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Time-averaged turbulent kinetic energy per point:
// TKE(x) = 0.5 * mean_t ||v(t,x) - vbar(x)||^2.
inline std::vector<double> tke_field(const geo::FieldSample& s, int vx, int vy) {
    const int m = s.point_count(), t = s.time_count;
    if (t < 2) throw UsageError("tke: need at least 2 timesteps");
    std::vector<double> out(static_cast<size_t>(m), 0.0);
    for (int p = 0; p < m; ++p) {
        double mx = 0, my = 0;
        for (int k = 0; k < t; ++k) {
            mx += s.value_at(k, p, vx);
            my += s.value_at(k, p, vy);
        }
        mx /= t;
        my /= t;
        double acc = 0;
        for (int k = 0; k < t; ++k) {
            const double dx = s.value_at(k, p, vx) - mx;
            const double dy = s.value_at(k, p, vy) - my;
            acc += dx * dx + dy * dy;
        }
        out[static_cast<size_t>(p)] = 0.5 * acc / t;
    }
    return out;
}

// D_TKE = ||log(TKE_pred + delta) - log(TKE_true + delta)||_2 / sqrt(points).
inline double d_tke(const geo::FieldSample& pred, const geo::FieldSample& truth,
                    double delta = 1e-8) {
    int vx = 0, vy = 1;
    if (!truth.channel_names.empty()) {
        vx = vy = -1;
        for (size_t i = 0; i < truth.channel_names.size(); ++i) {
            if (truth.channel_names[i] == "vx") vx = static_cast<int>(i);
            if (truth.channel_names[i] == "vy") vy = static_cast<int>(i);
        }
        if (vx < 0 || vy < 0) throw DataError("d_tke: velocity channels vx/vy not found");
    }
    auto tp = tke_field(pred, vx, vy);
    auto tt = tke_field(truth, vx, vy);
    if (tp.size() != tt.size()) throw UsageError("d_tke: point count mismatch");
    double acc = 0;
    for (size_t i = 0; i < tp.size(); ++i) {
        const double d = std::log(tp[i] + delta) - std::log(tt[i] + delta);
        acc += d * d;
    }
    return std::sqrt(acc / double(tp.size()));
}

// Evaluation summary over a validation set.
struct EvalReport {
    std::vector<std::string> sample_names;
    std::vector<double> sample_rel_l2;
    std::vector<std::vector<double>> per_channel;   // optional, per sample
    std::vector<double> per_timestep_mean;          // averaged curve
    double d_tke_mean = -1.0;                       // <0 when not evaluated
    int64_t flops_per_forward = 0;
    double sampling_seconds = 0.0;
    int skipped = 0;

    double aggregate_rel_l2() const {
        if (sample_rel_l2.empty()) throw DataError("eval report: no samples");
        double s = 0;
        for (double v : sample_rel_l2) s += v;
        return s / double(sample_rel_l2.size());
    }

    // the stored aggregate is always recomputed; this asserts consistency of
    // any externally supplied value
    void check_aggregate(double stated, double tol = 1e-12) const {
        if (std::abs(stated - aggregate_rel_l2()) > tol)
            throw DataError("eval report: aggregate mean does not match per-sample values");
    }

    std::string table() const {
        std::ostringstream os;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-20s %12s\n", "sample", "rel_l2");
        os << buf;
        for (size_t i = 0; i < sample_rel_l2.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%-20s %12.6f\n",
                          (i < sample_names.size() ? sample_names[i] : std::to_string(i)).c_str(),
                          sample_rel_l2[i]);
            os << buf;
        }
        std::snprintf(buf, sizeof(buf), "%-20s %12.6f\n", "mean", aggregate_rel_l2());
        os << buf;
        if (d_tke_mean >= 0) {
            std::snprintf(buf, sizeof(buf), "%-20s %12.6f\n", "d_tke", d_tke_mean);
            os << buf;
        }
        std::snprintf(buf, sizeof(buf), "%-20s %12lld\n", "flops_fwd", static_cast<long long>(flops_per_forward));
        os << buf;
        std::snprintf(buf, sizeof(buf), "%-20s %12.3f\n", "sampling_s", sampling_seconds);
        os << buf;
        if (skipped > 0) {
            std::snprintf(buf, sizeof(buf), "%-20s %12d\n", "skipped", skipped);
            os << buf;
        }
        return os.str();
    }

    std::string csv() const {
        std::ostringstream os;
        os << "sample,rel_l2\n";
        for (size_t i = 0; i < sample_rel_l2.size(); ++i)
            os << (i < sample_names.size() ? sample_names[i] : std::to_string(i)) << ","
               << sample_rel_l2[i] << "\n";
        os << "mean," << aggregate_rel_l2() << "\n";
        return os.str();
    }
};

}  // namespace pdegen::metrics
