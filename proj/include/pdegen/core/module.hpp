// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdegen/core/ops_matmul.hpp"
#include "pdegen/core/rng.hpp"

namespace pdegen::core {

enum class Init { Zero, One, Normal, Uniform, LecunUniform, XavierUniform };

// Named parameter table. Initialization draws from a stream keyed by the
// parameter name, so values do not depend on creation order.
template <class T>
class ParamRegistry {
public:
    explicit ParamRegistry(uint64_t seed) : seed_(seed) {}

    Tensor<T> create(const std::string& name, Shape shape, Init init, double arg = 0.02) {
        for (const auto& [n, t] : items_)
            if (n == name) throw UsageError("duplicate parameter name '" + name + "'");
        Tensor<T> t = Tensor<T>::zeros(shape, true);
        fill_init(t, init, arg, name);
        items_.emplace_back(name, t);
        return t;
    }

    const std::vector<std::pair<std::string, Tensor<T>>>& items() const { return items_; }

    std::vector<Tensor<T>> tensors() const {
        std::vector<Tensor<T>> out;
        out.reserve(items_.size());
        for (const auto& [n, t] : items_) out.push_back(t);
        return out;
    }

    std::vector<Tensor<T>> trainable() const {
        std::vector<Tensor<T>> out;
        for (const auto& [n, t] : items_)
            if (t.requires_grad()) out.push_back(t);
        return out;
    }

    Tensor<T> find(const std::string& name) const {
        for (const auto& [n, t] : items_)
            if (n == name) return t;
        throw UsageError("parameter '" + name + "' not found");
    }

    void freeze_all() {
        for (auto& [n, t] : items_) t.set_requires_grad(false);
    }

    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto& [nm, t] : items_) n += t.numel();
        return n;
    }

    uint64_t seed() const { return seed_; }

private:
    static uint64_t fnv1a(const std::string& s) {
        uint64_t h = 1469598103934665603ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }

    void fill_init(Tensor<T>& t, Init init, double arg, const std::string& name) {
        auto& d = t.mut_data();
        Rng rng(seed_, fnv1a(name));
        switch (init) {
            case Init::Zero: break;
            case Init::One:
                std::fill(d.begin(), d.end(), T(1));
                break;
            case Init::Normal:
                for (auto& v : d) v = T(rng.normal(0.0, arg));
                break;
            case Init::Uniform:
                for (auto& v : d) v = T(rng.uniform(-arg, arg));
                break;
            case Init::LecunUniform: {
                // fan_in: 2-d [in,out] -> in; conv [O,C,k...] -> C*prod(k)
                const Shape& s = t.shape();
                double fan = s.size() == 2 ? double(s[0]) : 1.0;
                if (s.size() > 2) {
                    fan = double(s[1]);
                    for (size_t i = 2; i < s.size(); ++i) fan *= double(s[i]);
                }
                const double bound = 1.0 / std::sqrt(std::max(1.0, fan));
                for (auto& v : d) v = T(rng.uniform(-bound, bound));
                break;
            }
            case Init::XavierUniform: {
                const Shape& s = t.shape();
                double fan_in = 1.0, fan_out = 1.0;
                if (s.size() == 2) {
                    fan_in = double(s[0]);
                    fan_out = double(s[1]);
                } else if (s.size() > 2) {
                    double rec = 1.0;
                    for (size_t i = 2; i < s.size(); ++i) rec *= double(s[i]);
                    fan_in = double(s[1]) * rec;
                    fan_out = double(s[0]) * rec;
                }
                const double bound = std::sqrt(6.0 / (fan_in + fan_out)) * (arg > 0 ? arg : 1.0);
                for (auto& v : d) v = T(rng.uniform(-bound, bound));
                break;
            }
        }
    }

    uint64_t seed_;
    std::vector<std::pair<std::string, Tensor<T>>> items_;
};

// Dense layer y = x W + b with weight [in, out].
template <class T>
struct Linear {
    Tensor<T> w, b;

    Linear() = default;
    Linear(ParamRegistry<T>& reg, const std::string& prefix, int64_t in, int64_t out,
           Init winit = Init::LecunUniform, bool zero_bias = true)
        : w(reg.create(prefix + ".w", {in, out}, winit)),
          b(reg.create(prefix + ".b", {out}, zero_bias ? Init::Zero : Init::LecunUniform)) {}

    static Linear zeros(ParamRegistry<T>& reg, const std::string& prefix, int64_t in, int64_t out) {
        Linear l;
        l.w = reg.create(prefix + ".w", {in, out}, Init::Zero);
        l.b = reg.create(prefix + ".b", {out}, Init::Zero);
        return l;
    }

    Tensor<T> forward(const Tensor<T>& x) const { return linear(x, w, b); }
};

}  // namespace pdegen::core
