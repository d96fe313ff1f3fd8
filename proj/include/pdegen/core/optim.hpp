// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/core/tensor.hpp"

namespace pdegen::core {

// Bias-corrected Adam. Moment slots live with the optimizer and persist
// across steps; parameter order is fixed at construction so updates are
// deterministic.
template <class T>
class Adam {
public:
    // allow_missing: parameters with no populated gradient are skipped for
    // the step (models with conditional paths leave unused branches untouched).
    Adam(std::vector<Tensor<T>> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8, bool allow_missing = false)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
          allow_missing_(allow_missing) {
        if (lr_ <= 0) throw UsageError("adam: learning rate must be positive");
        slots_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            slots_[i].m.assign(params_[i].data().size(), T(0));
            slots_[i].v.assign(params_[i].data().size(), T(0));
        }
    }

    void set_lr(double lr) {
        if (lr <= 0) throw UsageError("adam: learning rate must be positive");
        lr_ = lr;
    }
    double lr() const { return lr_; }
    int64_t step_count() const { return t_; }

    void step() {
        ++t_;
        const T b1 = T(beta1_), b2 = T(beta2_);
        const T c1 = T(1) / T(1 - std::pow(beta1_, double(t_)));
        const T c2 = T(1) / T(1 - std::pow(beta2_, double(t_)));
        const T lr = T(lr_), eps = T(eps_);
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            if (!p.has_grad()) {
                if (allow_missing_) continue;
                throw UsageError("adam: parameter " + std::to_string(i) + " has no gradient");
            }
            const auto& g = p.grad();
            auto& m = slots_[i].m;
            auto& v = slots_[i].v;
            auto& x = p.mut_data();
            for (size_t j = 0; j < x.size(); ++j) {
                m[j] = b1 * m[j] + (T(1) - b1) * g[j];
                v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
                const T mhat = m[j] * c1;
                const T vhat = v[j] * c2;
                x[j] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

private:
    struct Slot {
        std::vector<T> m, v;
    };
    std::vector<Tensor<T>> params_;
    std::vector<Slot> slots_;
    double lr_, beta1_, beta2_, eps_;
    bool allow_missing_ = false;
    int64_t t_ = 0;
};

}  // namespace pdegen::core
