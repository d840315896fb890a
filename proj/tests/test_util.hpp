#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace testutil {

inline double rel_err(double got, double want) {
    const double denom = std::max(std::abs(want), 1e-12);
    return std::abs(got - want) / denom;
}

// Max relative error between an analytic gradient and central finite
// differences of `f` with respect to `x`, at step h. `f` must be a pure
// function of x.
inline double max_grad_rel_err(std::vector<double>& x,
                               const std::function<double()>& f,
                               const std::vector<double>& analytic,
                               double h = 1e-5) {
    double worst = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double fp = f();
        x[i] = keep - h;
        const double fm = f();
        x[i] = keep;
        const double fd = (fp - fm) / (2.0 * h);
        const double scale = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
        worst = std::max(worst, std::abs(fd - analytic[i]) / scale);
    }
    return worst;
}

}  // namespace testutil
