#pragma once

// Exhaustive grid-search calibration of OVRV / IDM against closed-loop
// spacing RMSE.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "paai/car_following.hpp"
#include "paai/error.hpp"
#include "paai/ingest.hpp"
#include "paai/simulation.hpp"

namespace paai {

struct GridAxis {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t steps = 2;

    /// i-th grid value; the last value is exactly `hi`.
    double value(std::size_t i) const noexcept {
        if (i + 1 == steps) return hi;
        return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
    }
};

/// Axes in the parameter order of the model: OVRV (k1, k2, eta, tau),
/// IDM (theta, v0, delta, s0, T, gamma).
struct GridSpec {
    std::vector<GridAxis> axes;

    std::size_t cells() const noexcept {
        std::size_t n = 1;
        for (const auto& ax : axes) n *= ax.steps;
        return n;
    }

    /// Row-major decoding (last axis fastest).
    std::vector<double> point(std::size_t index) const {
        std::vector<double> values(axes.size());
        for (std::size_t k = axes.size(); k-- > 0;) {
            values[k] = axes[k].value(index % axes[k].steps);
            index /= axes[k].steps;
        }
        return values;
    }
};

inline const std::vector<std::string>& parameter_names(BaseKind kind) {
    static const std::vector<std::string> ovrv{"k1", "k2", "eta", "tau"};
    static const std::vector<std::string> idm{"theta", "v0", "delta", "s0", "T", "gamma"};
    detail::require(kind != BaseKind::none, "parameter_names: no classical model");
    return kind == BaseKind::ovrv ? ovrv : idm;
}

inline GridSpec default_grid(BaseKind kind) {
    if (kind == BaseKind::ovrv) {
        return GridSpec{{{"k1", 0.01, 0.2, 20}, {"k2", 0.1, 1.0, 19}, {"eta", 5.0, 30.0, 26}, {"tau", 0.1, 2.0, 20}}};
    }
    detail::require(kind == BaseKind::idm, "default_grid: no classical model");
    return GridSpec{{{"theta", 0.5, 3.0, 11},
                     {"v0", 25.0, 40.0, 4},
                     {"delta", 2.0, 5.0, 4},
                     {"s0", 1.0, 8.0, 8},
                     {"T", 0.5, 2.0, 7},
                     {"gamma", 1.0, 10.0, 10}}};
}

inline OvrvParams ovrv_from(const std::vector<double>& x) { return OvrvParams{x[0], x[1], x[2], x[3]}; }
inline IdmParams idm_from(const std::vector<double>& x) { return IdmParams{x[0], x[1], x[2], x[3], x[4], x[5]}; }

using ClassicParams = std::variant<OvrvParams, IdmParams>;

inline AnyPredictor make_classic_predictor(const ClassicParams& params) {
    if (const auto* p = std::get_if<OvrvParams>(&params)) return AnyPredictor::from(OvrvModel{*p});
    return AnyPredictor::from(IdmModel{std::get<IdmParams>(params)});
}

struct CalibrationResult {
    BaseKind kind = BaseKind::ovrv;
    ClassicParams params;
    double spacing_rmse = 0.0;
    std::size_t best_index = 0;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;
};

struct CalibrationOptions {
    SimConfig sim;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// Scores every grid cell by a closed-loop rollout seeded from the record's
/// first state and driven by its leader speed. Cells with invalid parameters
/// are skipped. The minimum RMSE wins; ties go to the lowest row-major index,
/// independent of the thread count.
inline CalibrationResult calibrate(BaseKind kind, const Trajectory& traj, const GridSpec& grid,
                                   const CalibrationOptions& options = {}) {
    const auto& names = parameter_names(kind);
    detail::require(grid.axes.size() == names.size(), "calibrate: grid has the wrong number of axes");
    for (const auto& ax : grid.axes) {
        detail::require(ax.steps >= 1, "calibrate: axis needs at least one step");
        detail::require(ax.steps == 1 || ax.lo < ax.hi, "calibrate: axis needs lo < hi");
    }
    detail::require(static_cast<double>(traj.size() - 1) * traj.dt >= 2.0 - 1e-9,
                    "calibrate: trajectory must span at least 2 s");

    SimConfig sim = options.sim;
    sim.dt = traj.dt;
    const std::size_t total = grid.cells();
    unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));

    struct Partial {
        double sse = std::numeric_limits<double>::infinity();
        std::size_t index = std::numeric_limits<std::size_t>::max();
        std::size_t evaluated = 0;
        std::size_t skipped = 0;
    };
    std::vector<Partial> partials(threads);

    auto work = [&](unsigned t) {
        Partial& best = partials[t];
        const std::size_t begin = total * t / threads;
        const std::size_t end = total * (t + 1) / threads;
        for (std::size_t idx = begin; idx < end; ++idx) {
            const auto x = grid.point(idx);
            double sse = 0.0;
            if (kind == BaseKind::ovrv) {
                const OvrvParams p = ovrv_from(x);
                if (!p.valid()) { ++best.skipped; continue; }
                sse = spacing_sse(OvrvModel{p}, traj, sim, best.sse);
            } else {
                const IdmParams p = idm_from(x);
                if (!p.valid()) { ++best.skipped; continue; }
                sse = spacing_sse(IdmModel{p}, traj, sim, best.sse);
            }
            ++best.evaluated;
            if (sse < best.sse) {
                best.sse = sse;
                best.index = idx;
            }
        }
    };

    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    }

    Partial winner;
    CalibrationResult out;
    out.kind = kind;
    for (const auto& p : partials) {
        out.evaluated += p.evaluated;
        out.skipped += p.skipped;
        if (p.sse < winner.sse || (p.sse == winner.sse && p.index < winner.index)) {
            winner.sse = p.sse;
            winner.index = p.index;
        }
    }
    if (winner.index == std::numeric_limits<std::size_t>::max()) {
        throw Error("calibrate: no valid parameter combination in grid");
    }
    const auto x = grid.point(winner.index);
    out.best_index = winner.index;
    out.spacing_rmse = std::sqrt(winner.sse / static_cast<double>(traj.size()));
    if (kind == BaseKind::ovrv) {
        out.params = ovrv_from(x);
    } else {
        out.params = idm_from(x);
    }
    return out;
}

}  // namespace paai
