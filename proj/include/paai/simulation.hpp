#pragma once

// Closed-loop follower rollouts (forward Euler), RMSE scoring, multi-model
// comparison and a single-lane ring road.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "paai/car_following.hpp"
#include "paai/error.hpp"
#include "paai/ingest.hpp"

namespace paai {

struct SimConfig {
    double dt = 0.1;
    bool clamp_speed_at_zero = true;
    double accel_min = -5.0;
    double accel_max = 3.0;
    double min_spacing = 0.1;  // floor applied after a collision
};

struct SimResult {
    std::vector<double> v;
    std::vector<double> s;
    std::vector<double> a;  // applied at step i, before integration
    bool collided = false;
    std::size_t first_collision = 0;  // step index, meaningful when collided
    double rmse_accel = 0.0;
    double rmse_speed = 0.0;
    double rmse_spacing = 0.0;
};

inline double rmse(std::span<const double> pred, std::span<const double> actual) {
    detail::require(pred.size() == actual.size(), "rmse: length mismatch");
    detail::require(!pred.empty(), "rmse: empty series");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - actual[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

/// Type-erased history predictor, used where models are chosen at runtime.
class AnyPredictor {
public:
    using Fn = std::function<double(std::span<const CfState>)>;

    AnyPredictor() = default;
    explicit AnyPredictor(Fn fn) : m_fn(std::move(fn)) {}

    template <StatePredictor M>
    static AnyPredictor from(M model) {
        return AnyPredictor([m = std::move(model)](std::span<const CfState> h) { return m.accel(h.back()); });
    }

    template <HistoryPredictor M>
        requires(!StatePredictor<M>)
    static AnyPredictor from(M model) {
        return AnyPredictor([m = std::move(model)](std::span<const CfState> h) { return m.accel(h); });
    }

    double accel(std::span<const CfState> history) const { return m_fn(history); }

private:
    Fn m_fn;
};

namespace detail {

template <Predictor M>
double query(const M& model, const std::vector<CfState>& history, const CfState& current) {
    if constexpr (StatePredictor<M>) {
        return model.accel(current);
    } else {
        return model.accel(std::span<const CfState>(history));
    }
}

}  // namespace detail

/// Forward-Euler rollout driven by a recorded leader speed series:
///   v(t+dt) = v(t) + a(t) dt,   s(t+dt) = s(t) + (v_l(t) - v(t)) dt.
/// `on_step(i, state, accel)` is called once per step before integration and
/// may return false to stop early. Returns true if any spacing hit zero (the
/// spacing is then floored at cfg.min_spacing and the rollout continues).
template <Predictor M, class OnStep>
bool rollout(const M& model, CfState init, std::span<const double> lead_speed, const SimConfig& cfg,
             OnStep&& on_step, std::size_t* first_collision = nullptr) {
    detail::require(lead_speed.size() >= 2, "simulate: lead series needs at least 2 samples");
    detail::require(cfg.dt > 0.0, "simulate: dt must be positive");

    std::vector<CfState> history;
    if constexpr (!StatePredictor<M>) {
        history.reserve(lead_speed.size());
    }
    bool collided = false;
    double s = init.s;
    double v = init.v;
    for (std::size_t i = 0; i < lead_speed.size(); ++i) {
        const CfState st{s, v, lead_speed[i]};
        if constexpr (!StatePredictor<M>) {
            history.push_back(st);
        }
        double a = detail::query(model, history, st);
        if (!std::isfinite(a)) {
            throw Error("simulate: non-finite acceleration at step " + std::to_string(i));
        }
        a = std::clamp(a, cfg.accel_min, cfg.accel_max);
        if (!on_step(i, st, a)) {
            break;
        }
        double v_next = v + a * cfg.dt;
        if (cfg.clamp_speed_at_zero && v_next < 0.0) {
            v_next = 0.0;
        }
        double s_next = s + (lead_speed[i] - v) * cfg.dt;
        if (s_next <= 0.0 && i + 1 < lead_speed.size()) {
            if (!collided && first_collision) {
                *first_collision = i + 1;
            }
            collided = true;
            s_next = cfg.min_spacing;
        }
        s = s_next;
        v = v_next;
    }
    return collided;
}

template <Predictor M>
SimResult simulate(const M& model, CfState init, std::span<const double> lead_speed, const SimConfig& cfg = {}) {
    SimResult out;
    out.v.reserve(lead_speed.size());
    out.s.reserve(lead_speed.size());
    out.a.reserve(lead_speed.size());
    out.collided = rollout(
        model, init, lead_speed, cfg,
        [&](std::size_t, const CfState& st, double a) {
            out.v.push_back(st.v);
            out.s.push_back(st.s);
            out.a.push_back(a);
            return true;
        },
        &out.first_collision);
    return out;
}

/// Rollout seeded from the first recorded state, scored against the record.
template <Predictor M>
SimResult simulate_against(const M& model, const Trajectory& truth, const SimConfig& cfg = {}) {
    SimResult out = simulate(model, CfState{truth.s.front(), truth.v.front(), truth.v_l.front()}, truth.v_l, cfg);
    out.rmse_accel = rmse(out.a, truth.forward_accel());
    out.rmse_speed = rmse(out.v, truth.v);
    out.rmse_spacing = rmse(out.s, truth.s);
    return out;
}

/// Sum of squared spacing errors of a rollout against `truth`. Stops and
/// returns +inf as soon as the running sum exceeds `abort_above`.
template <Predictor M>
double spacing_sse(const M& model, const Trajectory& truth, const SimConfig& cfg,
                   double abort_above = std::numeric_limits<double>::infinity()) {
    double sse = 0.0;
    bool aborted = false;
    rollout(model, CfState{truth.s.front(), truth.v.front(), truth.v_l.front()}, truth.v_l, cfg,
            [&](std::size_t i, const CfState& st, double) {
                const double d = st.s - truth.s[i];
                sse += d * d;
                if (sse > abort_above) {
                    aborted = true;
                    return false;
                }
                return true;
            });
    return aborted ? std::numeric_limits<double>::infinity() : sse;
}

/// Rollout as a canonical Trajectory (dv and a re-derived from v).
inline Trajectory to_trajectory(const SimResult& sim, std::span<const double> lead_speed, double dt, double t0) {
    return make_trajectory(dt, t0, sim.v, std::vector<double>(lead_speed.begin(), lead_speed.end()), sim.s);
}

// ---------------------------------------------------------------------------

struct NamedPredictor {
    std::string name;
    AnyPredictor model;
};

struct EvaluationRow {
    std::string name;
    double rmse_accel = 0.0;
    double rmse_speed = 0.0;
    double rmse_spacing = 0.0;
    bool collided = false;
    std::optional<std::string> error;
};

/// Closed-loop comparison on one record; a failing model yields a row with
/// `error` set instead of aborting the others. Rows keep input order.
inline std::vector<EvaluationRow> evaluate(std::span<const NamedPredictor> models, const Trajectory& test,
                                           const SimConfig& cfg = {}) {
    detail::require(!models.empty(), "evaluate: no models");
    std::vector<EvaluationRow> rows;
    rows.reserve(models.size());
    for (const auto& m : models) {
        EvaluationRow row;
        row.name = m.name;
        try {
            const SimResult r = simulate_against(m.model, test, cfg);
            row.rmse_accel = r.rmse_accel;
            row.rmse_speed = r.rmse_speed;
            row.rmse_spacing = r.rmse_spacing;
            row.collided = r.collided;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Ring road: vehicle i follows vehicle i-1, vehicle 0 follows vehicle n-1.

struct RingConfig {
    std::size_t n_vehicles = 22;
    double ring_length = 230.0;
    std::vector<std::size_t> model_index;  // per vehicle, into the model list
    std::vector<double> init_spacing;      // gap to the predecessor
    std::vector<double> init_speed;

    /// Evenly spaced ring, every vehicle at `speed`, all using model 0.
    static RingConfig uniform(std::size_t n, double length, double speed) {
        RingConfig cfg;
        cfg.n_vehicles = n;
        cfg.ring_length = length;
        cfg.model_index.assign(n, 0);
        cfg.init_spacing.assign(n, length / static_cast<double>(n));
        cfg.init_speed.assign(n, speed);
        return cfg;
    }
};

struct RingResult {
    std::vector<std::vector<double>> v;  // [vehicle][step]
    std::vector<std::vector<double>> s;
    std::vector<std::vector<double>> a;
    std::size_t steps = 0;
    bool collided = false;
    std::size_t collision_step = 0;
    double max_spacing_sum_error = 0.0;  // max over steps of |sum(s) - L|
};

inline void validate(const RingConfig& cfg, std::size_t n_models) {
    detail::require(cfg.n_vehicles >= 2, "ring: need at least 2 vehicles");
    detail::require(cfg.ring_length > 0.0, "ring: length must be positive");
    detail::require(cfg.model_index.size() == cfg.n_vehicles && cfg.init_spacing.size() == cfg.n_vehicles &&
                        cfg.init_speed.size() == cfg.n_vehicles,
                    "ring: per-vehicle vectors must have n_vehicles entries");
    double total = 0.0;
    for (std::size_t i = 0; i < cfg.n_vehicles; ++i) {
        detail::require(cfg.model_index[i] < n_models, "ring: model index out of range");
        detail::require(cfg.init_spacing[i] > 0.0 && cfg.init_speed[i] >= 0.0, "ring: bad initial state");
        total += cfg.init_spacing[i];
    }
    detail::require(std::abs(total - cfg.ring_length) <= 1e-9 * cfg.ring_length,
                    "ring: initial spacings must sum to the ring length");
}

inline RingResult ring_simulate(const RingConfig& cfg, std::span<const AnyPredictor> models, double duration,
                                const SimConfig& sim = {}) {
    validate(cfg, models.size());
    detail::require(duration > 0.0, "ring: duration must be positive");
    const std::size_t n = cfg.n_vehicles;
    const auto steps = static_cast<std::size_t>(std::floor(duration / sim.dt + 1e-9)) + 1;

    RingResult out;
    out.v.assign(n, {});
    out.s.assign(n, {});
    out.a.assign(n, {});
    std::vector<std::vector<CfState>> history(n);
    std::vector<double> s = cfg.init_spacing;
    std::vector<double> v = cfg.init_speed;
    std::vector<double> a(n);

    for (std::size_t k = 0; k < steps; ++k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += s[i];
        out.max_spacing_sum_error = std::max(out.max_spacing_sum_error, std::abs(total - cfg.ring_length));

        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t leader = (i + n - 1) % n;
            history[i].push_back(CfState{s[i], v[i], v[leader]});
            double acc = models[cfg.model_index[i]].accel(history[i]);
            if (!std::isfinite(acc)) {
                throw Error("ring: non-finite acceleration for vehicle " + std::to_string(i));
            }
            a[i] = std::clamp(acc, sim.accel_min, sim.accel_max);
            out.v[i].push_back(v[i]);
            out.s[i].push_back(s[i]);
            out.a[i].push_back(a[i]);
        }
        out.steps = k + 1;
        if (k + 1 == steps) break;

        std::vector<double> s_next(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t leader = (i + n - 1) % n;
            s_next[i] = s[i] + (v[leader] - v[i]) * sim.dt;
        }
        for (std::size_t i = 0; i < n; ++i) {
            v[i] += a[i] * sim.dt;
            if (sim.clamp_speed_at_zero && v[i] < 0.0) v[i] = 0.0;
        }
        s = std::move(s_next);
        if (std::any_of(s.begin(), s.end(), [](double x) { return x <= 0.0; })) {
            out.collided = true;
            out.collision_step = k + 1;
            break;
        }
    }
    return out;
}

/// Linear string-stability test for OVRV with dv = v_l - v: a perturbation
/// is not amplified upstream iff k1 tau^2 + 2 k2 tau - 2 >= 0.
inline bool ovrv_string_stable(const OvrvParams& p) noexcept {
    return p.k1 * p.tau * p.tau + 2.0 * p.k2 * p.tau - 2.0 >= 0.0;
}

}  // namespace paai
