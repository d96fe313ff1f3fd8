// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "pdegen/core/dispatch.hpp"
#include "pdegen/core/rng.hpp"
#include "pdegen/diffusion/schedule.hpp"

namespace pdegen::diffusion {

using core::Rng;
using core::Tensor;

enum class Parameterization { Eps, Velocity };
enum class VarianceMode { FixedPosterior, Learned };

inline Parameterization parameterization_from_string(const std::string& s) {
    if (s == "eps") return Parameterization::Eps;
    if (s == "v") return Parameterization::Velocity;
    throw UsageError("unknown parameterization '" + s + "' (eps|v)");
}

struct GuidanceConfig {
    bool enabled = false;
    double weight = 0.0;    // w; 0 keeps the conditional estimate
    double rescale = 0.7;   // phi in [0,1]
    double dropout = 0.1;   // conditional dropout probability during training

    void validate() const {
        if (rescale < 0.0 || rescale > 1.0) throw UsageError("guidance: rescale must be in [0,1]");
        if (dropout < 0.0 || dropout > 1.0) throw UsageError("guidance: dropout must be in [0,1]");
    }
};

// Denoiser output; vprime is only defined for learned-variance models.
template <class T>
struct ModelOut {
    Tensor<T> eps;
    Tensor<T> vprime;
};

// Batch denoiser with conditioning bound by the caller; `steps` is per-sample.
template <class T>
using DenoiseFn = std::function<ModelOut<T>(const Tensor<T>&, const std::vector<int>&)>;

// Per-sample scalar broadcast helper: [N] values viewed as [N,1,...,1].
template <class T>
Tensor<T> per_sample_const(const std::vector<double>& vals, const Tensor<T>& like) {
    if (static_cast<int64_t>(vals.size()) != like.size(0))
        throw UsageError("per_sample_const: value count must match batch size");
    core::Shape s(like.shape().size(), 1);
    s[0] = like.size(0);
    std::vector<T> d(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) d[i] = T(vals[i]);
    return Tensor<T>::from_data(s, std::move(d));
}

template <class T>
Tensor<T> gaussian_like(const Tensor<T>& like, Rng& rng) {
    auto t = Tensor<T>::zeros(like.shape());
    for (auto& v : t.mut_data()) v = T(rng.normal());
    return t;
}

// x_n = sqrt(abar_n) x0 + sqrt(1-abar_n) eps, with per-sample steps.
template <class T>
Tensor<T> q_sample(const Tensor<T>& x0, const std::vector<int>& n, const Tensor<T>& eps,
                   const NoiseSchedule& sched) {
    if (eps.shape() != x0.shape()) throw UsageError("q_sample: eps shape must match x0");
    for (int v : n)
        if (v < 1 || v > sched.steps())
            throw UsageError("q_sample: step " + std::to_string(v) + " outside [1," +
                             std::to_string(sched.steps()) + "]");
    std::vector<double> sa(n.size()), sb(n.size());
    for (size_t i = 0; i < n.size(); ++i) {
        const double ab = sched.alpha_bar(n[i]);
        sa[i] = std::sqrt(ab);
        sb[i] = std::sqrt(1.0 - ab);
    }
    return add(mul(per_sample_const(sa, x0), x0), mul(per_sample_const(sb, x0), eps));
}

// velocity target v = sqrt(abar) eps - sqrt(1-abar) x0
template <class T>
Tensor<T> v_target(const Tensor<T>& x0, const Tensor<T>& eps, const std::vector<int>& n,
                   const NoiseSchedule& sched) {
    std::vector<double> sa(n.size()), sb(n.size());
    for (size_t i = 0; i < n.size(); ++i) {
        const double ab = sched.alpha_bar(n[i]);
        sa[i] = std::sqrt(ab);
        sb[i] = std::sqrt(1.0 - ab);
    }
    return sub(mul(per_sample_const(sa, eps), eps), mul(per_sample_const(sb, x0), x0));
}

// x0 = sqrt(abar) x_n - sqrt(1-abar) v
template <class T>
Tensor<T> x0_from_v(const Tensor<T>& xn, const Tensor<T>& v, const std::vector<int>& n,
                    const NoiseSchedule& sched) {
    std::vector<double> sa(n.size()), sb(n.size());
    for (size_t i = 0; i < n.size(); ++i) {
        const double ab = sched.alpha_bar(n[i]);
        sa[i] = std::sqrt(ab);
        sb[i] = std::sqrt(1.0 - ab);
    }
    return sub(mul(per_sample_const(sa, xn), xn), mul(per_sample_const(sb, v), v));
}

// eps = sqrt(1-abar) x_n + sqrt(abar) v
template <class T>
Tensor<T> eps_from_v(const Tensor<T>& xn, const Tensor<T>& v, const std::vector<int>& n,
                     const NoiseSchedule& sched) {
    std::vector<double> sa(n.size()), sb(n.size());
    for (size_t i = 0; i < n.size(); ++i) {
        const double ab = sched.alpha_bar(n[i]);
        sa[i] = std::sqrt(1.0 - ab);
        sb[i] = std::sqrt(ab);
    }
    return add(mul(per_sample_const(sa, xn), xn), mul(per_sample_const(sb, v), v));
}

// x0 = (x_n - sqrt(1-abar) eps) / sqrt(abar)
template <class T>
Tensor<T> x0_from_eps(const Tensor<T>& xn, const Tensor<T>& eps, const std::vector<int>& n,
                      const NoiseSchedule& sched) {
    std::vector<double> ia(n.size()), sb(n.size());
    for (size_t i = 0; i < n.size(); ++i) {
        const double ab = sched.alpha_bar(n[i]);
        ia[i] = 1.0 / std::sqrt(ab);
        sb[i] = std::sqrt(1.0 - ab);
    }
    return mul(per_sample_const(ia, xn), sub(xn, mul(per_sample_const(sb, eps), eps)));
}

// Denoising objective: draws per-sample steps and noise, returns the mean
// squared error against the eps or velocity target. `model` already carries
// its conditioning. Outputs (loss, drawn steps) for logging.
template <class T>
Tensor<T> loss_simple(const DenoiseFn<T>& model, const Tensor<T>& z0, const NoiseSchedule& sched,
                      Parameterization param, Rng& rng, std::vector<int>* steps_out = nullptr,
                      double vlb_weight = 0.0) {
    const int64_t batch = z0.size(0);
    std::vector<int> n(static_cast<size_t>(batch));
    for (auto& v : n) v = static_cast<int>(rng.uniform_int(1, sched.steps()));
    if (steps_out) *steps_out = n;
    Tensor<T> eps = gaussian_like(z0, rng);
    Tensor<T> zn = q_sample(z0, n, eps, sched);
    ModelOut<T> out = model(zn, n);
    Tensor<T> target = (param == Parameterization::Eps) ? eps : v_target(z0, eps, n, sched);
    Tensor<T> loss = core::mean(core::square(core::sub(out.eps, target)));

    if (vlb_weight > 0.0) {
        if (!out.vprime.defined())
            throw UsageError("learned-variance loss requires a model with a variance head");
        // KL between the forward posterior and p_theta with the mean frozen
        std::vector<double> c0(n.size()), c1(n.size()), bt(n.size()), lb(n.size()), lbt(n.size()),
            inva(n.size()), epsc(n.size());
        for (size_t i = 0; i < n.size(); ++i) {
            const int ni = n[i];
            const double ab = sched.alpha_bar(ni), abp = sched.alpha_bar(ni - 1);
            const double beta = sched.beta(ni), alpha = sched.alpha(ni);
            c0[i] = std::sqrt(abp) * beta / (1.0 - ab);
            c1[i] = std::sqrt(alpha) * (1.0 - abp) / (1.0 - ab);
            bt[i] = std::max(sched.posterior_var(ni), 1e-20);
            lb[i] = std::log(beta);
            lbt[i] = std::log(bt[i]);
            inva[i] = 1.0 / std::sqrt(alpha);
            epsc[i] = beta / std::sqrt(1.0 - ab);
        }
        Tensor<T> eps_sg = out.eps.detach();
        Tensor<T> mu_theta =
            mul(per_sample_const(inva, zn), sub(zn, mul(per_sample_const(epsc, zn), eps_sg)));
        Tensor<T> mu_true =
            add(mul(per_sample_const(c0, z0), z0), mul(per_sample_const(c1, zn), zn));
        Tensor<T> log_sigma = add(mul(out.vprime, per_sample_const(lb, zn)),
                                  mul(core::add_scalar(core::neg(out.vprime), T(1)),
                                      per_sample_const(lbt, zn)));
        Tensor<T> inv_sigma = core::exp(core::neg(log_sigma));
        Tensor<T> diff2 = core::square(sub(mu_true, mu_theta));
        // 0.5 * (log sigma - log bt + (bt + diff2)/sigma - 1)
        Tensor<T> kl = core::scale(
            core::add_scalar(
                add(sub(log_sigma, per_sample_const(lbt, zn)),
                    mul(add(per_sample_const(bt, zn), diff2), inv_sigma)),
                T(-1)),
            T(0.5));
        loss = add(loss, core::scale(core::mean(kl), T(vlb_weight)));
    }
    return loss;
}

// One ancestral step z_n -> z_{n-1}; same n across the batch, no noise at n=1.
template <class T>
Tensor<T> ddpm_step(const ModelOut<T>& out, const Tensor<T>& zn, int n, const NoiseSchedule& sched,
                    VarianceMode vmode, Rng& rng) {
    core::NoGradGuard ng;
    const int64_t batch = zn.size(0);
    const std::vector<int> ns(static_cast<size_t>(batch), n);
    const double alpha = sched.alpha(n), beta = sched.beta(n), ab = sched.alpha_bar(n);
    std::vector<double> inva(ns.size(), 1.0 / std::sqrt(alpha));
    std::vector<double> epsc(ns.size(), beta / std::sqrt(1.0 - ab));
    Tensor<T> mean =
        mul(per_sample_const(inva, zn), sub(zn, mul(per_sample_const(epsc, zn), out.eps)));
    if (n == 1) return mean;

    Tensor<T> noise = gaussian_like(zn, rng);
    if (vmode == VarianceMode::FixedPosterior) {
        const double sigma = std::sqrt(sched.posterior_var(n));
        return add(mean, core::scale(noise, T(sigma)));
    }
    if (!out.vprime.defined())
        throw UsageError("ddpm step: learned variance requires a model with a variance head");
    const double lb = std::log(beta), lbt = std::log(std::max(sched.posterior_var(n), 1e-20));
    Tensor<T> log_sigma =
        add(core::scale(out.vprime, T(lb)), core::scale(core::add_scalar(core::neg(out.vprime), T(1)), T(lbt)));
    Tensor<T> sigma = core::exp(core::scale(log_sigma, T(0.5)));
    return add(mean, mul(sigma, noise));
}

// Full ancestral sampling from z_N ~ N(0,I) shaped like `shape_like`.
template <class T>
Tensor<T> ddpm_sample(const DenoiseFn<T>& model, const Tensor<T>& z_init, const NoiseSchedule& sched,
                      VarianceMode vmode, Rng& rng) {
    core::NoGradGuard ng;
    Tensor<T> z = z_init;
    const int64_t batch = z.size(0);
    for (int n = sched.steps(); n >= 1; --n) {
        const std::vector<int> ns(static_cast<size_t>(batch), n);
        ModelOut<T> out = model(z, ns);
        z = ddpm_step(out, z, n, sched, vmode, rng);
    }
    return z;
}

inline std::vector<int> ddim_step_indices(int total, int count) {
    if (count < 1 || count > total)
        throw UsageError("ddim: step count " + std::to_string(count) + " outside [1," +
                         std::to_string(total) + "]");
    std::vector<int> idx;
    if (count == 1) {
        idx.push_back(total);
        return idx;
    }
    for (int i = 0; i < count; ++i) {
        const int n = 1 + static_cast<int>(std::llround(double(total - 1) * i / double(count - 1)));
        if (idx.empty() || idx.back() != n) idx.push_back(n);
    }
    return idx;  // ascending, deduplicated
}

// Strided sampler; eta=0 is deterministic, eta=1 recovers ancestral variance.
template <class T>
Tensor<T> ddim_sample(const DenoiseFn<T>& model, const Tensor<T>& z_init, const NoiseSchedule& sched,
                      int sample_steps, double eta, Rng& rng) {
    if (eta < 0.0 || eta > 1.0) throw UsageError("ddim: eta must be in [0,1]");
    core::NoGradGuard ng;
    auto idx = ddim_step_indices(sched.steps(), sample_steps);
    Tensor<T> z = z_init;
    const int64_t batch = z.size(0);
    for (size_t i = idx.size(); i-- > 0;) {
        const int n = idx[i];
        const int prev = i == 0 ? 0 : idx[i - 1];
        const std::vector<int> ns(static_cast<size_t>(batch), n);
        ModelOut<T> out = model(z, ns);
        const double ab = sched.alpha_bar(n), abp = sched.alpha_bar(prev);
        const double sigma =
            eta * std::sqrt((1.0 - abp) / (1.0 - ab)) * std::sqrt(1.0 - ab / abp);
        Tensor<T> x0 = x0_from_eps(z, out.eps, ns, sched);
        const double dir = std::sqrt(std::max(0.0, 1.0 - abp - sigma * sigma));
        z = add(core::scale(x0, T(std::sqrt(abp))), core::scale(out.eps, T(dir)));
        if (sigma > 0.0) z = add(z, core::scale(gaussian_like(z, rng), T(sigma)));
    }
    return z;
}

// Per-step DDIM transition variance for S=N comparisons.
inline double ddim_step_variance(const NoiseSchedule& sched, int n, double eta) {
    const double ab = sched.alpha_bar(n), abp = sched.alpha_bar(n - 1);
    const double s = eta * std::sqrt((1.0 - abp) / (1.0 - ab)) * std::sqrt(1.0 - ab / abp);
    return s * s;
}

// Classifier-free guidance combination with std rescale toward the
// conditional estimate. Pure CPU math; used at inference only.
template <class T>
Tensor<T> cfg_combine(const Tensor<T>& eps_cond, const Tensor<T>& eps_uncond,
                      const GuidanceConfig& g) {
    g.validate();
    if (eps_cond.shape() != eps_uncond.shape())
        throw UsageError("cfg: conditional and unconditional shapes differ");
    if (g.weight == 0.0) return eps_cond;

    const int64_t batch = eps_cond.size(0);
    const int64_t per = eps_cond.numel() / batch;
    std::vector<T> guided(eps_cond.data().size());
    const T w = T(g.weight);
    for (size_t i = 0; i < guided.size(); ++i)
        guided[i] = (T(1) + w) * eps_cond.data()[i] - w * eps_uncond.data()[i];

    const T phi = T(g.rescale);
    if (phi > 0) {
        for (int64_t s = 0; s < batch; ++s) {
            const T* c = eps_cond.data().data() + s * per;
            T* gd = guided.data() + s * per;
            auto std_of = [per](const T* p) {
                double m = 0;
                for (int64_t i = 0; i < per; ++i) m += double(p[i]);
                m /= double(per);
                double v = 0;
                for (int64_t i = 0; i < per; ++i) {
                    const double d = double(p[i]) - m;
                    v += d * d;
                }
                return std::sqrt(v / double(per));
            };
            const double sc = std_of(c), sg = std_of(gd);
            if (sg > 1e-12) {
                const T factor = T(phi * (sc / sg) + (1.0 - double(phi)));
                for (int64_t i = 0; i < per; ++i) gd[i] *= factor;
            }
        }
    }
    return Tensor<T>::from_data(eps_cond.shape(), std::move(guided));
}

}  // namespace pdegen::diffusion
