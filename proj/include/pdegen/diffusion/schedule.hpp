// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pdegen/core/errors.hpp"

namespace pdegen::diffusion {

enum class ScheduleKind { Linear, Cosine };

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::Linear;
    if (s == "cosine") return ScheduleKind::Cosine;
    throw UsageError("unknown noise schedule kind '" + s + "' (linear|cosine)");
}

// Forward-process schedule over steps n in [1, N]: beta_n, alpha_n = 1-beta_n,
// alpha_bar_n = prod alpha, posterior variance beta_tilde_n.
class NoiseSchedule {
public:
    static NoiseSchedule make(ScheduleKind kind, int steps) {
        if (steps < 1) throw UsageError("noise schedule: need at least one step");
        NoiseSchedule s;
        s.kind_ = kind;
        s.steps_ = steps;
        s.beta_.resize(static_cast<size_t>(steps));
        if (kind == ScheduleKind::Linear) {
            const double b1 = 1e-4, bN = 0.02;
            for (int n = 0; n < steps; ++n)
                s.beta_[static_cast<size_t>(n)] =
                    steps == 1 ? b1 : b1 + (bN - b1) * double(n) / double(steps - 1);
        } else {
            const double off = 0.008;
            auto f = [&](double n) {
                const double a = ((n / steps + off) / (1.0 + off)) * 1.5707963267948966;
                const double c = std::cos(a);
                return c * c;
            };
            const double f0 = f(0.0);
            double prev = 1.0;
            for (int n = 1; n <= steps; ++n) {
                const double abar = f(double(n)) / f0;
                double beta = 1.0 - abar / prev;
                beta = std::min(beta, 0.999);
                s.beta_[static_cast<size_t>(n - 1)] = beta;
                prev *= 1.0 - beta;
            }
        }
        s.alpha_.resize(s.beta_.size());
        s.alpha_bar_.resize(s.beta_.size());
        s.posterior_var_.resize(s.beta_.size());
        double ab = 1.0;
        for (size_t i = 0; i < s.beta_.size(); ++i) {
            s.alpha_[i] = 1.0 - s.beta_[i];
            const double ab_prev = ab;
            ab *= s.alpha_[i];
            s.alpha_bar_[i] = ab;
            s.posterior_var_[i] = s.beta_[i] * (1.0 - ab_prev) / (1.0 - ab);
        }
        return s;
    }

    static NoiseSchedule make(const std::string& kind, int steps) {
        return make(schedule_kind_from_string(kind), steps);
    }

    int steps() const { return steps_; }
    ScheduleKind kind() const { return kind_; }

    // 1-based step accessors; alpha_bar(0) == 1.
    double beta(int n) const { return beta_[check(n)]; }
    double alpha(int n) const { return alpha_[check(n)]; }
    double alpha_bar(int n) const { return n == 0 ? 1.0 : alpha_bar_[check(n)]; }
    double posterior_var(int n) const { return posterior_var_[check(n)]; }

    double terminal_snr() const {
        const double ab = alpha_bar(steps_);
        return std::sqrt(ab) / std::sqrt(1.0 - ab);
    }

private:
    size_t check(int n) const {
        if (n < 1 || n > steps_)
            throw UsageError("noise schedule: step " + std::to_string(n) + " outside [1," +
                             std::to_string(steps_) + "]");
        return static_cast<size_t>(n - 1);
    }

    ScheduleKind kind_ = ScheduleKind::Linear;
    int steps_ = 0;
    std::vector<double> beta_, alpha_, alpha_bar_, posterior_var_;
};

}  // namespace pdegen::diffusion
