#pragma once

// Phase recognition: safety margin and the acceleration/deceleration blend
// weight used to mix the two correction heads.

#include <cmath>

#include "paai/nn/tensor.hpp"

namespace paai {

enum class PhaseRule {
    piecewise,  // fixed 0.8 / 0.2 / 0.5 table with margin gating
    smooth,     // sigmoid of a weighted sum of dv and margin
};

struct PhaseConfig {
    double dv_hi = 0.1;
    double dv_lo = -0.1;
    double w_accel = 0.8;
    double w_decel = 0.2;
    double w_neutral = 0.5;
    double margin_accel_min = 2.0;
    double margin_decel_max = -1.0;
    double margin_c1 = 1.5;  // s_safe = c1 v + c0
    double margin_c0 = 2.0;

    PhaseRule rule = PhaseRule::piecewise;
    double phi_dv = 10.0;  // smooth rule: w = sigmoid(phi_dv dv + phi_ms m_s + phi_0)
    double phi_ms = 0.0;
    double phi_0 = 0.0;
};

inline double safe_spacing(double v, const PhaseConfig& cfg) noexcept { return cfg.margin_c1 * v + cfg.margin_c0; }

/// m_s = (s - s_safe) / s_safe.
inline double safety_margin(double s, double v, const PhaseConfig& cfg) noexcept {
    const double s_safe = safe_spacing(v, cfg);
    return (s - s_safe) / s_safe;
}

/// Piecewise rule: the acceleration weight needs dv > dv_hi and m_s above
/// margin_accel_min; the deceleration weight needs dv < dv_lo and m_s below
/// margin_decel_max. Anything else, including a dv/margin disagreement, is
/// neutral. Note that with c0 > 0 the deceleration gate (m_s < -1) implies
/// s < 0, so it never fires on physical states.
inline double phase_weight(double dv, double m_s, const PhaseConfig& cfg) noexcept {
    if (cfg.rule == PhaseRule::smooth) {
        return nn::sigmoid(cfg.phi_dv * dv + cfg.phi_ms * m_s + cfg.phi_0);
    }
    if (dv > cfg.dv_hi && m_s > cfg.margin_accel_min) return cfg.w_accel;
    if (dv < cfg.dv_lo && m_s < cfg.margin_decel_max) return cfg.w_decel;
    return cfg.w_neutral;
}

/// a_nn = w a_acc + (1 - w) a_dec.
inline double blend_corrections(double w_phase, double a_acc, double a_dec) noexcept {
    return w_phase * a_acc + (1.0 - w_phase) * a_dec;
}

}  // namespace paai
