#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "paai/calibration.hpp"
#include "paai/car_following.hpp"
#include "paai/synthetic.hpp"

using namespace paai;

namespace {

// Textbook forms evaluated in long double, written out independently.
long double ovrv_reference(long double k1, long double k2, long double eta, long double tau, long double s,
                           long double v, long double vl) {
    return k1 * (s - eta - tau * v) + k2 * (vl - v);
}

long double idm_reference(long double theta, long double v0, long double delta, long double s0, long double T,
                          long double gamma, long double s, long double v, long double vl) {
    const long double s_star = s0 + T * v + v * (vl - v) / (2.0L * std::sqrt(theta * gamma));
    return theta * (1.0L - std::pow(v / v0, delta) - (s_star / s) * (s_star / s));
}

// Axis whose first value is exactly `x`.
GridAxis from(const char* name, double x, double width, std::size_t steps) { return {name, x, x + width, steps}; }
// Axis whose last value is exactly `x`.
GridAxis upto(const char* name, double x, double width, std::size_t steps) { return {name, x - width, x, steps}; }

bool grid_contains(const GridSpec& g, const std::vector<double>& x) {
    for (std::size_t i = 0; i < g.cells(); ++i) {
        if (g.point(i) == x) return true;
    }
    return false;
}

Trajectory follower_record(const ClassicParams& p, double duration, double scale = 1.0) {
    synthetic::LeadProfile lp;
    lp.amplitude *= scale;
    for (double& l : lp.levels) l *= scale;
    return synthetic::classic_follower(p, synthetic::lead_speed(duration, 0.1, lp), 0.1);
}

}  // namespace

TEST(OvrvAccel, EquilibriumIsZero) {
    const OvrvParams p;
    for (double v : {0.0, 5.0, 20.0, 33.0}) {
        EXPECT_NEAR(ovrv_accel(p, CfState{p.eta + p.tau * v, v, v}), 0.0, 1e-14);
    }
}

TEST(OvrvAccel, DefaultParametersExample) {
    const OvrvParams p;
    const double a = ovrv_accel(p, CfState{30.0, 20.0, 20.0});
    EXPECT_NEAR(a, 0.08499, 1e-4);
    EXPECT_NEAR(a, static_cast<double>(ovrv_reference(0.0717L, 0.6541L, 17.9107L, 0.5452L, 30, 20, 20)), 1e-14);
}

TEST(OvrvAccel, DoublingTheGapTermDoublesAcceleration) {
    const OvrvParams p;
    const double v = 15.0;
    const double base = p.eta + p.tau * v;
    const double a1 = ovrv_accel(p, CfState{base + 3.0, v, v});
    const double a2 = ovrv_accel(p, CfState{base + 6.0, v, v});
    EXPECT_NEAR(a2, 2.0 * a1, 1e-14);
}

TEST(OvrvAccel, AffineInEachArgument) {
    const OvrvParams p;
    const double h = 0.5;
    const CfState st{25.0, 14.0, 16.0};
    auto second_diff = [&](auto shift) {
        return ovrv_accel(p, shift(st, h)) - 2.0 * ovrv_accel(p, st) + ovrv_accel(p, shift(st, -h));
    };
    EXPECT_NEAR(second_diff([](CfState x, double d) { x.s += d; return x; }), 0.0, 1e-13);
    EXPECT_NEAR(second_diff([](CfState x, double d) { x.v += d; return x; }), 0.0, 1e-13);
    EXPECT_NEAR(second_diff([](CfState x, double d) { x.v_l += d; return x; }), 0.0, 1e-13);
}

TEST(IdmAccel, StandstillEquilibrium) {
    const IdmParams p;
    EXPECT_NEAR(idm_accel(p, CfState{p.s0, 0.0, 0.0}), 0.0, 1e-15);
}

TEST(IdmAccel, FreeFlowEquilibrium) {
    const IdmParams p;
    EXPECT_NEAR(idm_accel(p, CfState{1e9, p.v0, p.v0}), 0.0, 1e-9);
}

TEST(IdmAccel, DefaultParametersExample) {
    const IdmParams p;
    const double a = idm_accel(p, CfState{40.0, 20.0, 20.0});
    EXPECT_NEAR(a, 0.8886, 2e-4);
    EXPECT_NEAR(a, static_cast<double>(idm_reference(1.6932L, 40, 5, 6, 1.0325L, 10, 40, 20, 20)), 1e-14);
}

TEST(IdmAccel, RelativeSpeedSignConvention) {
    const IdmParams p;
    const CfState st{30.0, 18.0, 21.0};
    EXPECT_NEAR(idm_accel(p, st), static_cast<double>(idm_reference(1.6932L, 40, 5, 6, 1.0325L, 10, 30, 18, 21)),
                1e-13);
    EXPECT_GT(idm_desired_gap(p, st), p.s0 + p.T * st.v);
}

TEST(IdmAccel, NonPositiveSpacingFails) {
    const IdmParams p;
    EXPECT_THROW(idm_accel(p, CfState{0.0, 10.0, 10.0}), std::invalid_argument);
    EXPECT_THROW(idm_accel(p, CfState{-1.0, 10.0, 10.0}), std::invalid_argument);
}

TEST(IdmAccel, MonotoneInSpeedAndSpacing) {
    const IdmParams p;
    double prev = idm_accel(p, CfState{30.0, 0.5, 0.5});
    for (double v = 1.0; v < p.v0; v += 0.5) {
        const double a = idm_accel(p, CfState{30.0, v, v});
        EXPECT_LT(a, prev) << "v=" << v;
        prev = a;
    }
    prev = idm_accel(p, CfState{1.0, 12.0, 12.0});
    for (double s = 1.5; s < 200.0; s += 0.5) {
        const double a = idm_accel(p, CfState{s, 12.0, 12.0});
        EXPECT_GT(a, prev) << "s=" << s;
        prev = a;
    }
}

TEST(Names, BaseKindRoundTrip) {
    for (BaseKind k : {BaseKind::ovrv, BaseKind::idm, BaseKind::none}) EXPECT_EQ(base_kind_from_string(to_string(k)), k);
    EXPECT_THROW(base_kind_from_string("gipps"), std::invalid_argument);
}

TEST(Grid, RowMajorDecodingWithExactEndpoints) {
    const GridSpec g{{{"a", 0.0, 1.0, 3}, {"b", 0.1, 0.7, 4}}};
    EXPECT_EQ(g.cells(), 12u);
    EXPECT_EQ(g.point(0), (std::vector<double>{0.0, 0.1}));
    EXPECT_EQ(g.point(3), (std::vector<double>{0.0, 0.7}));
    EXPECT_EQ(g.point(4), (std::vector<double>{0.5, 0.1}));
    EXPECT_EQ(g.point(11), (std::vector<double>{1.0, 0.7}));
}

TEST(Grid, DefaultsBracketReferenceValues) {
    const auto og = default_grid(BaseKind::ovrv);
    const OvrvParams op;
    const std::vector<double> ov{op.k1, op.k2, op.eta, op.tau};
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_LE(og.axes[k].lo, ov[k]);
        EXPECT_GE(og.axes[k].hi, ov[k]);
    }
    const auto ig = default_grid(BaseKind::idm);
    const IdmParams ip;
    const std::vector<double> iv{ip.theta, ip.v0, ip.delta, ip.s0, ip.T, ip.gamma_idm};
    for (std::size_t k = 0; k < 6; ++k) {
        EXPECT_LE(ig.axes[k].lo, iv[k]);
        EXPECT_GE(ig.axes[k].hi, iv[k]);
    }
}

TEST(Calibrate, RecoversOvrvParameters) {
    const OvrvParams truth;
    const auto traj = follower_record(truth, 60.0);
    const GridSpec g{{from("k1", truth.k1, 0.1, 5), upto("k2", truth.k2, 0.5, 5), from("eta", truth.eta, 8.0, 5),
                      upto("tau", truth.tau, 0.4, 5)}};
    ASSERT_TRUE(grid_contains(g, {truth.k1, truth.k2, truth.eta, truth.tau}));
    const auto res = calibrate(BaseKind::ovrv, traj, g);
    const auto& p = std::get<OvrvParams>(res.params);
    EXPECT_EQ(p.k1, truth.k1);
    EXPECT_EQ(p.k2, truth.k2);
    EXPECT_EQ(p.eta, truth.eta);
    EXPECT_EQ(p.tau, truth.tau);
    EXPECT_LT(res.spacing_rmse, 1e-9);
    EXPECT_EQ(res.evaluated, g.cells());
}

TEST(Calibrate, RecoversIdmParameters) {
    const IdmParams truth;
    const auto traj = follower_record(truth, 60.0, 0.3);
    const GridSpec g{{from("theta", truth.theta, 1.0, 3), upto("v0", truth.v0, 10.0, 3),
                      upto("delta", truth.delta, 2.0, 3), from("s0", truth.s0, 2.0, 3), upto("T", truth.T, 0.5, 3),
                      upto("gamma", truth.gamma_idm, 5.0, 3)}};
    const auto res = calibrate(BaseKind::idm, traj, g);
    const auto& p = std::get<IdmParams>(res.params);
    EXPECT_EQ(p.theta, truth.theta);
    EXPECT_EQ(p.v0, truth.v0);
    EXPECT_EQ(p.delta, truth.delta);
    EXPECT_EQ(p.s0, truth.s0);
    EXPECT_EQ(p.T, truth.T);
    EXPECT_EQ(p.gamma_idm, truth.gamma_idm);
    EXPECT_LT(res.spacing_rmse, 1e-9);
}

TEST(Calibrate, TiesGoToTheFirstRowMajorCell) {
    // A constant equilibrium record scores zero for every (k1, k2).
    const std::size_t n = 50;
    const auto traj = make_trajectory(0.1, 0.0, std::vector<double>(n, 20.0), std::vector<double>(n, 20.0),
                                      std::vector<double>(n, 30.0));
    const GridSpec g{{{"k1", 0.05, 0.1, 3}, {"k2", 0.5, 1.0, 3}, {"eta", 20.0, 20.0, 1}, {"tau", 0.5, 0.5, 1}}};
    for (unsigned threads : {1u, 2u, 4u, 9u}) {
        const auto res = calibrate(BaseKind::ovrv, traj, g, CalibrationOptions{{}, threads});
        EXPECT_EQ(res.best_index, 0u) << threads << " threads";
        EXPECT_EQ(res.spacing_rmse, 0.0);
        EXPECT_EQ(std::get<OvrvParams>(res.params).k1, 0.05);
        EXPECT_EQ(std::get<OvrvParams>(res.params).k2, 0.5);
    }
}

TEST(Calibrate, InvalidCellsAreSkipped) {
    const OvrvParams truth;
    const auto traj = follower_record(truth, 20.0);
    const GridSpec g{{{"k1", -0.0717, truth.k1, 3}, {"k2", truth.k2, 1.0, 2}, {"eta", truth.eta, 20.0, 2},
                      {"tau", truth.tau, 1.0, 2}}};
    const auto res = calibrate(BaseKind::ovrv, traj, g);
    EXPECT_EQ(res.skipped, 16u);
    EXPECT_EQ(res.evaluated, 8u);
    EXPECT_EQ(std::get<OvrvParams>(res.params).k1, truth.k1);
}

TEST(Calibrate, AllInvalidGridFails) {
    const auto traj = follower_record(OvrvParams{}, 20.0);
    const GridSpec g{{{"k1", -0.2, -0.1, 2}, {"k2", 0.1, 1.0, 2}, {"eta", 5.0, 20.0, 2}, {"tau", 0.5, 1.0, 2}}};
    EXPECT_THROW(calibrate(BaseKind::ovrv, traj, g), Error);
}

TEST(Calibrate, RejectsShortRecordsAndBadGrids) {
    const auto traj = follower_record(OvrvParams{}, 20.0);
    EXPECT_THROW(calibrate(BaseKind::ovrv, traj.slice(0, 15), default_grid(BaseKind::ovrv)), std::invalid_argument);
    EXPECT_THROW(calibrate(BaseKind::ovrv, traj, default_grid(BaseKind::idm)), std::invalid_argument);
    GridSpec g = default_grid(BaseKind::ovrv);
    g.axes[0].hi = g.axes[0].lo;
    EXPECT_THROW(calibrate(BaseKind::ovrv, traj, g), std::invalid_argument);
}

TEST(Calibrate, ResultIndependentOfThreadCount) {
    synthetic::Asymmetry asym;
    const auto traj = synthetic::asymmetric_follower(OvrvParams{}, synthetic::lead_speed(40.0, 0.1), 0.1, asym);
    const GridSpec g{{{"k1", 0.02, 0.2, 4}, {"k2", 0.2, 1.0, 5}, {"eta", 10.0, 25.0, 6}, {"tau", 0.2, 1.2, 5}}};
    const auto ref = calibrate(BaseKind::ovrv, traj, g, CalibrationOptions{{}, 1});
    for (unsigned threads : {2u, 3u, 8u}) {
        const auto res = calibrate(BaseKind::ovrv, traj, g, CalibrationOptions{{}, threads});
        EXPECT_EQ(res.best_index, ref.best_index);
        EXPECT_EQ(res.spacing_rmse, ref.spacing_rmse);
        EXPECT_EQ(res.evaluated + res.skipped, g.cells());
    }
}

TEST(Calibrate, RefiningTheGridNeverHurts) {
    synthetic::Asymmetry asym;
    const auto traj = synthetic::asymmetric_follower(OvrvParams{}, synthetic::lead_speed(40.0, 0.1), 0.1, asym);
    GridSpec coarse{{{"k1", 0.02, 0.2, 3}, {"k2", 0.2, 1.0, 3}, {"eta", 10.0, 25.0, 4}, {"tau", 0.2, 1.2, 3}}};
    GridSpec fine = coarse;
    for (auto& ax : fine.axes) ax.steps = 2 * ax.steps - 1;
    ASSERT_TRUE(grid_contains(fine, coarse.point(7)));
    const auto a = calibrate(BaseKind::ovrv, traj, coarse);
    const auto b = calibrate(BaseKind::ovrv, traj, fine);
    EXPECT_LE(b.spacing_rmse, a.spacing_rmse);
}
