#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "paai/nn/tensor.hpp"

namespace paai::nn {

struct GradCheckReport {
    bool ok = true;
    std::size_t checked = 0;
    std::size_t failures = 0;
    double worst_error = 0.0;  // |analytic - numeric| / max(atol, rtol * scale), <= 1 passes
    std::string worst_name;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/// Compares the gradients already stored in `refs[k].grad` against central
/// differences of `loss()` with step h. An entry passes when
/// |g - g_fd| <= max(atol, rtol * max(|g|, |g_fd|)).
template <class LossFn>
GradCheckReport check_gradients(std::span<const ParamRef> refs, LossFn&& loss, double h = 1e-5,
                                 double rtol = 1e-4, double atol = 1e-6) {
    GradCheckReport report;
    for (const auto& ref : refs) {
        auto& values = ref.value->values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double up = loss();
            values[i] = saved - h;
            const double down = loss();
            values[i] = saved;

            const double numeric = (up - down) / (2.0 * h);
            const double analytic = (*ref.grad)[i];
            const double bound = std::max(atol, rtol * std::max(std::abs(analytic), std::abs(numeric)));
            const double error = std::abs(analytic - numeric) / bound;
            ++report.checked;
            if (error > 1.0) {
                ++report.failures;
                report.ok = false;
            }
            if (error > report.worst_error) {
                report.worst_error = error;
                report.worst_name = ref.name;
                report.worst_index = i;
                report.worst_analytic = analytic;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace paai::nn
