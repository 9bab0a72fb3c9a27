#pragma once

// Synthetic scenarios: a deterministic lead-speed profile, equilibrium
// initial states, and followers with asymmetric acceleration/braking.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "paai/calibration.hpp"
#include "paai/car_following.hpp"
#include "paai/ingest.hpp"
#include "paai/simulation.hpp"

namespace paai::synthetic {

struct LeadProfile {
    double cruise = 20.0;      // m/s
    double amplitude = 3.0;    // sinusoid amplitude, m/s
    double period = 45.0;      // sinusoid period, s
    double step_every = 60.0;  // s between speed steps
    double ramp = 4.0;         // s to move between step levels
    std::vector<double> levels{0.0, 4.0, -3.0, 2.0, -5.0, 3.0, -2.0};  // offsets, cycled
};

/// Leader speed sampled at t = k dt for k in [0, floor(duration / dt)].
inline std::vector<double> lead_speed(double duration, double dt, const LeadProfile& p = {}) {
    detail::require(dt > 0.0 && duration >= dt, "lead_speed: need duration >= dt > 0");
    detail::require(!p.levels.empty() && p.step_every > 0.0 && p.ramp >= 0.0 && p.ramp <= p.step_every,
                    "lead_speed: bad step schedule");
    const auto n = static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        const auto seg = static_cast<std::size_t>(std::floor(t / p.step_every));
        const double into = t - static_cast<double>(seg) * p.step_every;
        const double cur = p.levels[seg % p.levels.size()];
        const double prev = seg == 0 ? cur : p.levels[(seg - 1) % p.levels.size()];
        const double u = p.ramp > 0.0 ? std::min(1.0, into / p.ramp) : 1.0;
        const double step = prev + u * (cur - prev);
        out[k] = std::max(0.0, p.cruise + p.amplitude * std::sin(2.0 * std::numbers::pi * t / p.period) + step);
    }
    return out;
}

/// Spacing at which the follower holds speed v behind a leader at speed v.
inline double equilibrium_spacing(const OvrvParams& p, double v) { return p.eta + p.tau * v; }

inline double equilibrium_spacing(const IdmParams& p, double v) {
    const double r = std::pow(v / p.v0, p.delta);
    detail::require(r < 1.0, "equilibrium_spacing: speed at or above the IDM free-flow speed");
    return (p.s0 + v * p.T) / std::sqrt(1.0 - r);
}

inline double equilibrium_spacing(const ClassicParams& p, double v) {
    return std::visit([v](const auto& q) { return equilibrium_spacing(q, v); }, p);
}

inline CfState equilibrium_state(const ClassicParams& p, double v) {
    return CfState{equilibrium_spacing(p, v), v, v};
}

/// Closed-loop trajectory of a classical model behind `lead`, starting at
/// equilibrium with the first lead speed.
inline Trajectory classic_follower(const ClassicParams& p, std::span<const double> lead, double dt,
                                   const SimConfig& sim = {}) {
    SimConfig cfg = sim;
    cfg.dt = dt;
    const auto model = make_classic_predictor(p);
    const auto res = simulate(model, equilibrium_state(p, lead.front()), lead, cfg);
    return to_trajectory(res, lead, dt, 0.0);
}

struct Asymmetry {
    double accel_gain = 0.4;    // added when dv > dv_hi
    double decel_gain = -0.3;   // added when dv < dv_lo
    double dv_hi = 0.1;
    double dv_lo = -0.1;
    double noise_std = 0.05;
    std::uint64_t seed = 7;
};

/// Acceleration of the asymmetric follower without noise.
inline double asymmetric_accel(const ClassicParams& p, const Asymmetry& asym, const CfState& st) {
    double a = std::holds_alternative<OvrvParams>(p) ? ovrv_accel(std::get<OvrvParams>(p), st)
                                                     : idm_accel(std::get<IdmParams>(p), st);
    if (st.dv() > asym.dv_hi) {
        a += asym.accel_gain;
    } else if (st.dv() < asym.dv_lo) {
        a += asym.decel_gain;
    }
    return a;
}

/// Base-model follower with extra gain while closing on a faster leader,
/// extra braking while a slower leader pulls the gap in, and Gaussian
/// acceleration noise.
inline Trajectory asymmetric_follower(const ClassicParams& p, std::span<const double> lead, double dt,
                                      const Asymmetry& asym = {}, const SimConfig& sim = {}) {
    SimConfig cfg = sim;
    cfg.dt = dt;
    std::mt19937_64 rng(asym.seed);
    std::normal_distribution<double> noise(0.0, asym.noise_std);
    const AnyPredictor model([&](std::span<const CfState> history) {
        const double a = asymmetric_accel(p, asym, history.back());
        return asym.noise_std > 0.0 ? a + noise(rng) : a;
    });
    const auto res = simulate(model, equilibrium_state(p, lead.front()), lead, cfg);
    return to_trajectory(res, lead, dt, 0.0);
}

}  // namespace paai::synthetic
