#pragma once

// Classical car-following laws. Relative speed is dv = v_l - v throughout
// (positive when the leader pulls away), including inside the IDM desired
// gap, where it enters as + v*dv / (2 sqrt(theta*gamma)).

#include <cmath>
#include <concepts>
#include <span>
#include <string>

#include "paai/error.hpp"

namespace paai {

struct CfState {
    double s = 0.0;    // spacing, m
    double v = 0.0;    // follower speed, m/s
    double v_l = 0.0;  // leader speed, m/s

    double dv() const noexcept { return v_l - v; }
};

struct OvrvParams {
    double k1 = 0.0717;    // 1/s^2
    double k2 = 0.6541;    // 1/s
    double eta = 17.9107;  // m
    double tau = 0.5452;   // s

    bool valid() const noexcept { return k1 > 0.0 && k2 > 0.0 && eta >= 0.0 && tau > 0.0; }
};

struct IdmParams {
    double theta = 1.6932;   // max acceleration, m/s^2
    double v0 = 40.0;        // free-flow speed, m/s
    double delta = 5.0;      // exponent
    double s0 = 6.0;         // jam spacing, m
    double T = 1.0325;       // time headway, s
    double gamma_idm = 10.0; // comfortable deceleration, m/s^2

    bool valid() const noexcept {
        return theta > 0.0 && v0 > 0.0 && delta > 0.0 && s0 > 0.0 && T > 0.0 && gamma_idm > 0.0;
    }
};

inline double ovrv_accel(const OvrvParams& p, const CfState& st) noexcept {
    return p.k1 * (st.s - p.eta - p.tau * st.v) + p.k2 * (st.v_l - st.v);
}

inline double idm_desired_gap(const IdmParams& p, const CfState& st) noexcept {
    return p.s0 + p.T * st.v + st.v * st.dv() / (2.0 * std::sqrt(p.theta * p.gamma_idm));
}

inline double idm_accel(const IdmParams& p, const CfState& st) {
    if (!(st.s > 0.0)) {
        throw std::invalid_argument("idm_accel: spacing must be positive");
    }
    const double gap_ratio = idm_desired_gap(p, st) / st.s;
    return p.theta * (1.0 - std::pow(st.v / p.v0, p.delta) - gap_ratio * gap_ratio);
}

/// A model whose acceleration depends only on the current state.
template <class M>
concept StatePredictor = requires(const M& m, const CfState& st) {
    { m.accel(st) } -> std::convertible_to<double>;
};

/// A model that looks at the state history; `history.back()` is the current
/// state.
template <class M>
concept HistoryPredictor = requires(const M& m, std::span<const CfState> history) {
    { m.accel(history) } -> std::convertible_to<double>;
};

template <class M>
concept Predictor = StatePredictor<M> || HistoryPredictor<M>;

struct OvrvModel {
    OvrvParams params;
    double accel(const CfState& st) const noexcept { return ovrv_accel(params, st); }
};

struct IdmModel {
    IdmParams params;
    double accel(const CfState& st) const { return idm_accel(params, st); }
};

enum class BaseKind { none, ovrv, idm };

inline std::string to_string(BaseKind kind) {
    switch (kind) {
        case BaseKind::ovrv: return "ovrv";
        case BaseKind::idm: return "idm";
        case BaseKind::none: break;
    }
    return "none";
}

inline BaseKind base_kind_from_string(const std::string& name) {
    if (name == "ovrv") return BaseKind::ovrv;
    if (name == "idm") return BaseKind::idm;
    if (name == "none") return BaseKind::none;
    throw std::invalid_argument("unknown base model '" + name + "'");
}

}  // namespace paai
