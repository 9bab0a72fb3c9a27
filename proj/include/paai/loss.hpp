#pragma once

// Composite training loss  L = alpha L_acc + beta L_safe + gamma L_reg.
//
//   L_acc   smooth-L1 or squared error of predicted vs recorded acceleration
//   L_safe  mean hinge max(0, s_safe(v_next) - s_next), where v_next is the
//           follower speed after one Euler step with the predicted
//           acceleration and s_safe = c1 v + c0
//   L_reg   Var(a_hat) or mean |a_hat - a|, plus l2 * sum ||theta||^2

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "paai/error.hpp"

namespace paai {

enum class AccLossKind { smooth_l1, mse };
enum class RegKind { variance, mae };

struct LossWeights {
    double alpha = 0.5;
    double beta = 0.4;
    double gamma = 0.1;
};

struct LossConfig {
    LossWeights start{0.5, 0.4, 0.1};
    LossWeights end{0.5, 0.4, 0.1};  // linear schedule start -> end over the epoch budget
    AccLossKind acc = AccLossKind::smooth_l1;
    double safe_c1 = 1.2;
    double safe_c0 = 2.0;
    RegKind reg = RegKind::variance;
    double l2 = 1e-5;

    /// Weights at `epoch` of `total_epochs` (epoch 0 gives `start`).
    LossWeights weights_at(std::size_t epoch, std::size_t total_epochs) const noexcept {
        if (total_epochs <= 1) return start;
        const double u = std::min(1.0, static_cast<double>(epoch) / static_cast<double>(total_epochs - 1));
        return LossWeights{start.alpha + u * (end.alpha - start.alpha), start.beta + u * (end.beta - start.beta),
                           start.gamma + u * (end.gamma - start.gamma)};
    }
};

inline double smooth_l1(double diff) noexcept {
    const double a = std::abs(diff);
    return a < 1.0 ? 0.5 * diff * diff : a - 0.5;
}

inline double smooth_l1_grad(double diff) noexcept {
    if (std::abs(diff) < 1.0) return diff;
    return diff > 0.0 ? 1.0 : -1.0;
}

inline double squared_error(double diff) noexcept { return diff * diff; }

struct LossBatch {
    std::span<const double> predicted;    // a_hat
    std::span<const double> recorded;     // a
    std::span<const double> speed;        // v(t)
    std::span<const double> next_spacing; // s(t + dt)
    double dt = 0.1;
};

struct LossBreakdown {
    double total = 0.0;
    double acc = 0.0;
    double safe = 0.0;
    double reg = 0.0;  // includes the l2 term
    double l2 = 0.0;   // l2 * sum ||theta||^2, reported separately
    std::vector<double> d_predicted;  // dL/da_hat per sample
};

/// `param_sq_norm` is sum ||theta||^2 over all learnable tensors. The
/// gradient of the l2 part w.r.t. theta is gamma * l2 * 2 theta and is left
/// to the caller.
inline LossBreakdown composite_loss(const LossBatch& batch, const LossConfig& cfg, const LossWeights& w,
                                    double param_sq_norm) {
    const std::size_t n = batch.predicted.size();
    detail::require(n > 0, "loss: empty batch");
    detail::require(batch.recorded.size() == n && batch.speed.size() == n && batch.next_spacing.size() == n,
                    "loss: batch fields have different lengths");
    const double inv_n = 1.0 / static_cast<double>(n);

    LossBreakdown out;
    out.d_predicted.assign(n, 0.0);

    double mean_pred = 0.0;
    for (double x : batch.predicted) mean_pred += x;
    mean_pred *= inv_n;

    double reg_data = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pred = batch.predicted[i];
        const double diff = pred - batch.recorded[i];
        double& g = out.d_predicted[i];

        if (cfg.acc == AccLossKind::smooth_l1) {
            out.acc += smooth_l1(diff);
            g += w.alpha * inv_n * smooth_l1_grad(diff);
        } else {
            out.acc += squared_error(diff);
            g += w.alpha * inv_n * 2.0 * diff;
        }

        const double v_next = batch.speed[i] + pred * batch.dt;
        const double gap = cfg.safe_c1 * v_next + cfg.safe_c0 - batch.next_spacing[i];
        if (gap > 0.0) {
            out.safe += gap;
            g += w.beta * inv_n * cfg.safe_c1 * batch.dt;
        }

        if (cfg.reg == RegKind::variance) {
            const double c = pred - mean_pred;
            reg_data += c * c;
            g += w.gamma * inv_n * 2.0 * c;
        } else {
            reg_data += std::abs(diff);
            g += w.gamma * inv_n * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
        }
    }
    out.acc *= inv_n;
    out.safe *= inv_n;
    out.l2 = cfg.l2 * param_sq_norm;
    out.reg = reg_data * inv_n + out.l2;
    out.total = w.alpha * out.acc + w.beta * out.safe + w.gamma * out.reg;
    return out;
}

}  // namespace paai
