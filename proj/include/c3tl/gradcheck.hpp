#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "matrix.hpp"

namespace c3tl {

/// Outcome of a finite-difference gradient verification.
struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t n_checked = 0;
};

/// Compare analytic gradients against central finite differences of a scalar
/// function. `params` are the live parameter matrices the closure reads;
/// `analytic` holds the matching gradient matrices, in the same pack order.
///
/// Relative error per entry is |a - fd| / max(|a|, |fd|, floor); entries
/// where both sides are below `floor` count as exact.
inline GradCheckResult check_gradients(const std::function<double()>& f,
                                       const std::vector<Matrix*>& params,
                                       const std::vector<const Matrix*>& analytic,
                                       double step = 1e-5, double floor = 1e-6) {
    GradCheckResult result;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k];
        const Matrix& a = *analytic[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p.data()[i];
            p.data()[i] = saved + step;
            const double up = f();
            p.data()[i] = saved - step;
            const double down = f();
            p.data()[i] = saved;
            const double fd = (up - down) / (2.0 * step);
            const double an = a.data()[i];
            if (std::abs(fd) < floor && std::abs(an) < floor) {
                ++result.n_checked;
                continue;
            }
            const double denom = std::max({std::abs(fd), std::abs(an), floor});
            const double rel = std::abs(fd - an) / denom;
            if (rel > result.max_rel_error) result.max_rel_error = rel;
            ++result.n_checked;
        }
    }
    return result;
}

}  // namespace c3tl
