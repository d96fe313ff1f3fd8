// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "pdegen/core/tensor.hpp"

namespace pdegen::core {

// Compares reverse-mode gradients of a scalar-valued function against central
// finite differences, perturbing `x` elementwise. Returns the max of
// |analytic - numeric| / (|analytic| + |numeric| + 1e-12). Run at T=double;
// float loses too many digits to the difference quotient.
template <class T>
double grad_check(const std::function<Tensor<T>()>& f, Tensor<T>& x, double eps = 1e-5) {
    if (eps <= 0) throw UsageError("grad_check: eps must be positive");
    for (T v : x.data())
        if (!std::isfinite(double(v))) throw UsageError("grad_check: input has non-finite entries");

    const bool was_rg = x.requires_grad();
    x.set_requires_grad(true);
    x.zero_grad();
    Tensor<T> y = f();
    if (y.numel() != 1) throw UsageError("grad_check: function output must be scalar");
    if (y.requires_grad()) y.backward();  // constant f has zero analytic gradient
    std::vector<T> analytic = x.has_grad() ? x.grad() : std::vector<T>(x.data().size(), T(0));
    x.zero_grad();
    x.set_requires_grad(was_rg);

    double max_err = 0.0;
    auto& data = x.mut_data();
    for (size_t i = 0; i < data.size(); ++i) {
        const T saved = data[i];
        double fp, fm;
        {
            NoGradGuard ng;
            data[i] = saved + T(eps);
            fp = double(f().item());
            data[i] = saved - T(eps);
            fm = double(f().item());
        }
        data[i] = saved;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double a = double(analytic[i]);
        const double err = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
        max_err = std::max(max_err, err);
    }
    return max_err;
}

template <class T>
double grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, Tensor<T> x,
                  double eps = 1e-5) {
    return grad_check<T>([&]() { return f(x); }, x, eps);
}

}  // namespace pdegen::core
