// Acceptance checks. Prints one PASS / FAIL / SKIP line per criterion and
// exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "paai_cli.hpp"

using namespace paai;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    enum Status { pass, fail, skip } status = fail;
    std::string detail;
};

Outcome pass(std::string d) { return {Outcome::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::fail, std::move(d)}; }
Outcome skip(std::string d) { return {Outcome::skip, std::move(d)}; }

std::string fmt(double x) {
    std::ostringstream ss;
    ss.precision(4);
    ss << x;
    return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

synthetic::LeadProfile scaled_profile(double scale) {
    synthetic::LeadProfile lp;
    lp.amplitude *= scale;
    for (double& l : lp.levels) l *= scale;
    return lp;
}

// IDM with dv = v_l - v in the desired gap amplifies leader oscillations;
// its scenarios use a gentler leader so the follower stays collision-free.
double lead_scale(BaseKind kind) { return kind == BaseKind::idm ? 0.3 : 1.0; }

ClassicParams reference_params(BaseKind kind) {
    if (kind == BaseKind::ovrv) return OvrvParams{};
    return IdmParams{};
}

std::vector<double> as_vector(const ClassicParams& p) {
    if (const auto* o = std::get_if<OvrvParams>(&p)) return {o->k1, o->k2, o->eta, o->tau};
    const auto& i = std::get<IdmParams>(p);
    return {i.theta, i.v0, i.delta, i.s0, i.T, i.gamma_idm};
}

// ---------------------------------------------------------------------------

Outcome calibration_recovery() {
    std::string detail;
    bool ok = true;
    for (BaseKind kind : {BaseKind::ovrv, BaseKind::idm}) {
        const ClassicParams truth = reference_params(kind);
        const auto lead = synthetic::lead_speed(600.0, 0.1, scaled_profile(lead_scale(kind)));
        const auto traj = synthetic::classic_follower(truth, lead, 0.1);
        const auto x = as_vector(truth);
        const auto& names = parameter_names(kind);
        // Every axis has the reference value as an exact endpoint, alternating
        // between the low and the high end.
        const std::size_t steps = kind == BaseKind::ovrv ? 9 : 5;
        GridSpec grid;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double width = 0.5 * std::abs(x[k]);
            grid.axes.push_back(k % 2 == 0 ? GridAxis{names[k], x[k], x[k] + width, steps}
                                           : GridAxis{names[k], x[k] - width, x[k], steps});
        }
        bool contained = false;
        for (std::size_t i = 0; i < grid.cells() && !contained; ++i) contained = grid.point(i) == x;

        const auto t0 = std::chrono::steady_clock::now();
        const auto res = calibrate(kind, traj, grid);
        const double elapsed = seconds_since(t0);
        const bool exact = as_vector(res.params) == x;
        const bool good = contained && exact && res.spacing_rmse < 1e-6 && elapsed < 120.0;
        ok = ok && good;
        detail += to_string(kind) + ": " + std::to_string(grid.cells()) + " cells, " +
                  (exact ? "recovered" : "NOT recovered") + ", rmse " + fmt(res.spacing_rmse) + " m, " +
                  fmt(elapsed) + " s; ";
    }
    return ok ? pass(detail) : fail(detail);
}

Outcome residual_identity() {
    std::string detail;
    bool ok = true;
    for (ModelKind kind : {ModelKind::ovrv_paai, ModelKind::idm_paai}) {
        const BaseKind bk = base_of(kind);
        const ClassicParams base = reference_params(bk);
        const auto lead = synthetic::lead_speed(999.9, 0.1, scaled_profile(lead_scale(bk)));
        auto model = std::make_shared<const PaaiModel>(PaaiModel::create(kind, base));
        const auto init = synthetic::equilibrium_state(base, lead.front());
        const auto hybrid = simulate(ModelPredictor(model), init, lead);
        const auto plain = simulate(make_classic_predictor(base), init, lead);
        const bool same = hybrid.s == plain.s && hybrid.v == plain.v && hybrid.a == plain.a;
        ok = ok && same && lead.size() == 10000;
        detail += to_string(kind) + " " + std::to_string(lead.size()) + " steps " +
                  (same ? "bit-identical" : "DIFFER") + "; ";
    }
    return ok ? pass(detail) : fail(detail);
}

Outcome gradient_correctness() {
    const NetworkShape shape{8, 6, 5, 5};
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t checked = 0, failures = 0;
    double worst = 0.0;
    for (ModelKind kind : {ModelKind::ovrv_paai, ModelKind::idm_paai}) {
        const BaseKind bk = base_of(kind);
        const ClassicParams base = reference_params(bk);
        const auto traj = synthetic::asymmetric_follower(
            base, synthetic::lead_speed(60.0, 0.1, scaled_profile(lead_scale(bk))), 0.1);
        for (AccLossKind acc : {AccLossKind::smooth_l1, AccLossKind::mse}) {
            for (std::uint64_t seed = 1; seed <= 10; ++seed) {
                PaaiModel m = initialize_model(kind, base, traj, seed, shape);
                m.loss.acc = acc;
                const auto ds = make_dataset(m, traj);
                std::vector<std::size_t> idx;
                for (std::size_t i = seed; i < ds.size(); i += 37) idx.push_back(i);
                auto batch = make_batch(ds, idx);
                for (std::size_t i = 0; i < batch.next_spacing.size(); i += 3) batch.next_spacing[i] = 0.5 * batch.speed[i];
                const LossWeights w = m.loss.weights_at(seed * 7, 100);

                NetworkParams grad = NetworkParams::zeros(m.n_features(), m.shape, m.streams());
                batch_loss(m, batch, w, &grad);
                const auto refs = m.net.refs(grad);
                const auto report =
                    nn::check_gradients(refs, [&] { return batch_loss(m, batch, w).total; }, 1e-6, 1e-4, 1e-6);
                checked += report.checked;
                failures += report.failures;
                worst = std::max(worst, report.worst_error);
            }
        }
    }
    const double elapsed = seconds_since(t0);
    const std::string detail = std::to_string(checked) + " partials over 10 seeds x {smooth-L1, MSE} x " +
                               "{OVRV-PAAI, IDM-PAAI}, " + std::to_string(failures) +
                               " outside 1e-4 relative / 1e-6 absolute (worst ratio " + fmt(worst) + "), " + fmt(elapsed) + " s";
    return failures == 0 && elapsed < 60.0 ? pass(detail) : fail(detail);
}

Outcome phase_rule() {
    const PhaseConfig cfg;
    std::vector<double> dvs{-5.0, -1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0, 5.0};
    std::vector<double> mss{-3.0, -1.5, -1.0, -0.5, 0.0, 1.0, 2.0, 2.5, 10.0};
    for (double t : {-0.1, 0.1}) {
        dvs.push_back(std::nextafter(t, -1.0));
        dvs.push_back(std::nextafter(t, 1.0));
    }
    for (double t : {-1.0, 2.0}) {
        mss.push_back(std::nextafter(t, -10.0));
        mss.push_back(std::nextafter(t, 10.0));
    }
    std::size_t cases = 0, wrong = 0;
    for (double dv : dvs) {
        for (double ms : mss) {
            double expected = 0.5;
            if (dv > 0.1 && ms > 2.0) expected = 0.8;
            if (dv < -0.1 && ms < -1.0) expected = 0.2;
            ++cases;
            if (phase_weight(dv, ms, cfg) != expected) ++wrong;
        }
    }

    const auto traj = synthetic::classic_follower(OvrvParams{}, synthetic::lead_speed(30.0, 0.1), 0.1);
    const PaaiModel m = initialize_model(ModelKind::ovrv_paai, OvrvParams{}, traj, 17, NetworkShape{6, 5, 4, 4});
    const auto ds = make_dataset(m, traj);
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto batch = make_batch(ds, idx);
    double endpoint_err = 0.0;
    for (double w : {1.0, 0.0}) {
        const auto out = forward_batch(m, batch.x, batch.current, nullptr, w);
        const auto& head = w == 1.0 ? out.head_out[0] : out.head_out[1];
        endpoint_err = std::max(endpoint_err, (out.a_nn - head).cwiseAbs().maxCoeff());
    }
    const std::string detail = std::to_string(cases) + " (dv, m_s) cases, " + std::to_string(wrong) +
                               " mismatches; endpoint error " + fmt(endpoint_err) + " over " +
                               std::to_string(ds.size()) + " samples";
    return wrong == 0 && endpoint_err <= 1e-12 ? pass(detail) : fail(detail);
}

Outcome synthetic_trend() {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    for (ModelKind kind : {ModelKind::ovrv_paai, ModelKind::idm_paai}) {
        const BaseKind bk = base_of(kind);
        const ClassicParams base = reference_params(bk);
        const auto lead = synthetic::lead_speed(600.0, 0.1, scaled_profile(lead_scale(bk)));
        const auto traj = synthetic::asymmetric_follower(base, lead, 0.1);
        const auto sp = split(traj);
        const double base_rmse = simulate_against(make_classic_predictor(base), sp.test).rmse_spacing;

        EnsembleConfig ec;
        ec.members = 5;
        ec.train.epochs = 200;
        const auto results = train_ensemble(kind, base, sp, ec);
        std::vector<std::shared_ptr<const PaaiModel>> members;
        for (const auto& r : results) members.push_back(std::make_shared<const PaaiModel>(r.model));
        const double ens_rmse = simulate_against(EnsemblePredictor(members), sp.test).rmse_spacing;
        const double reduction = 1.0 - ens_rmse / base_rmse;
        ok = ok && reduction >= 0.20;
        detail += to_string(kind) + " " + fmt(ens_rmse) + " m vs " + to_string(bk) + " " + fmt(base_rmse) + " m (" +
                  fmt(100.0 * reduction) + "% lower); ";
    }
    const double elapsed = seconds_since(t0);
    detail += fmt(elapsed) + " s";
    return ok && elapsed < 1200.0 ? pass(detail) : fail(detail);
}

Outcome statistics_invariants() {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> x(10000);
    double ar = 0.0;
    for (double& v : x) {
        ar = 0.95 * ar + n(rng);
        v = 25.0 + ar;
    }

    const auto st = stats::summarize(x);
    const double h = stats::silverman_bandwidth(x);
    const stats::KdeConfig kc{h, stats::linspace(st.min - 8 * h, st.max + 8 * h, 4001)};
    const double mass = stats::trapezoid(stats::kde(x, kc), kc.grid[1] - kc.grid[0]);

    std::vector<double> far(x);
    for (double& v : far) v += 1000.0;
    const double ks_same = stats::ecdf_and_ks(x, x).ks;
    const double ks_disjoint = stats::ecdf_and_ks(x, far).ks;

    const auto r = stats::acf(x, 2000);
    double rho_max = 0.0;
    for (std::size_t k = 1; k < r.rho.size(); ++k) rho_max = std::max(rho_max, std::abs(r.rho[k]));

    std::vector<double> accel(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) accel[i] = 0.3 * n(rng);
    const double jsi = stats::jerk(accel, 0.1).jsi;
    double jsi_err = 0.0;
    for (double c : {0.5, 2.0, 3.0}) {
        std::vector<double> scaled(accel);
        for (double& v : scaled) v *= c;
        jsi_err = std::max(jsi_err, std::abs(stats::jerk(scaled, 0.1).jsi / (c * c * jsi) - 1.0));
    }

    const double gap = std::max(std::abs(smooth_l1(1.0 - 1e-6) - smooth_l1(1.0 + 1e-6)),
                                std::abs(smooth_l1_grad(1.0 - 1e-6) - smooth_l1_grad(1.0 + 1e-6)));

    const bool ok = std::abs(mass - 1.0) <= 1e-3 && ks_same == 0.0 && ks_disjoint == 1.0 && r.rho[0] == 1.0 &&
                    rho_max <= 1.0 && jsi_err <= 1e-9 && gap < 1e-5;
    const std::string detail = "KDE mass " + fmt(mass) + ", KS " + fmt(ks_same) + " / " + fmt(ks_disjoint) +
                               ", rho(0) " + fmt(r.rho[0]) + ", max |rho(1..2000)| " + fmt(rho_max) +
                               ", JSI scaling error " + fmt(jsi_err) + ", smooth-L1 jump " + fmt(gap);
    return ok ? pass(detail) : fail(detail);
}

Outcome ring_checks() {
    const OvrvParams p;
    const double v_eq = 10.0;
    const double s_eq = p.eta + p.tau * v_eq;
    const std::vector<AnyPredictor> models{make_classic_predictor(p)};

    RingConfig perturbed = RingConfig::uniform(22, 22.0 * s_eq, v_eq);
    perturbed.init_speed[0] -= 2.0;
    const auto pr = ring_simulate(perturbed, models, 499.9);
    double worst_sum = 0.0;
    for (std::size_t k = 0; k < pr.steps; ++k) {
        double total = 0.0;
        for (std::size_t i = 0; i < 22; ++i) total += pr.s[i][k];
        worst_sum = std::max(worst_sum, std::abs(total - perturbed.ring_length) / perturbed.ring_length);
    }

    const RingConfig uniform = RingConfig::uniform(22, 22.0 * s_eq, v_eq);
    const auto ur = ring_simulate(uniform, models, 499.9);
    double drift = 0.0;
    for (std::size_t i = 0; i < 22; ++i) {
        for (std::size_t k = 0; k < ur.steps; ++k) {
            drift = std::max({drift, std::abs(ur.v[i][k] - v_eq), std::abs(ur.s[i][k] - uniform.init_spacing[i])});
        }
    }
    const bool ok = worst_sum <= 1e-6 && ur.steps == 5000 && !ur.collided && drift < 1e-6;
    const std::string detail = "perturbed ring: " + std::to_string(pr.steps) + " steps" +
                               (pr.collided ? " (collision)" : "") + ", max relative spacing-sum error " +
                               fmt(worst_sum) + "; uniform equilibrium: " + std::to_string(ur.steps) +
                               " steps, max drift " + fmt(drift);
    return ok ? pass(detail) : fail(detail);
}

Outcome dataset_replay() {
    const char* path = std::getenv("PAAI_EV_DATASET");
    if (!path || !*path) return skip("PAAI_EV_DATASET not set");
    const Trajectory traj = load_trajectory(path);
    const DatasetSplit sp = split(traj);

    std::string detail;
    bool ok = true;
    std::vector<NamedPredictor> models;
    std::vector<ClassicParams> calibrated;
    for (BaseKind kind : {BaseKind::ovrv, BaseKind::idm}) {
        const double target = kind == BaseKind::ovrv ? 2.0648 : 2.5077;
        const auto cal = calibrate(kind, sp.train, default_grid(kind));
        const bool near = std::abs(cal.spacing_rmse - target) <= 0.10 * target;
        ok = ok && near;
        detail += to_string(kind) + " calibration " + fmt(cal.spacing_rmse) + " m (reference " + fmt(target) + "); ";
        calibrated.push_back(cal.params);
        models.push_back({to_string(kind), make_classic_predictor(cal.params)});
    }
    auto ensemble = [&](ModelKind kind) {
        const ClassicParams& base = kind == ModelKind::idm_paai ? calibrated[1] : calibrated[0];
        const auto results = train_ensemble(kind, base, sp, EnsembleConfig{});
        std::vector<std::shared_ptr<const PaaiModel>> members;
        for (const auto& r : results) members.push_back(std::make_shared<const PaaiModel>(r.model));
        return AnyPredictor::from(EnsemblePredictor(members));
    };
    models.push_back({"baseline-ai", ensemble(ModelKind::baseline_ai)});
    models.push_back({"ovrv-paai", ensemble(ModelKind::ovrv_paai)});
    models.push_back({"idm-paai", ensemble(ModelKind::idm_paai)});
    const auto rows = evaluate(models, sp.test);
    const std::vector<double> reference{1.8340, 3.4308, 1.1434, 1.0546, 1.8089};
    std::vector<double> got;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const double r = rows[k].error ? INFINITY : rows[k].rmse_spacing;
        got.push_back(r);
        ok = ok && std::abs(r - reference[k]) <= 0.25 * reference[k];
        detail += rows[k].name + " " + fmt(r) + " m; ";
    }
    ok = ok && got[3] < got[2] && got[2] < std::min(got[0], got[1]);
    return ok ? pass(detail) : fail(detail);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome reproducibility() {
    const fs::path dir = fs::temp_directory_path() / "paai_acceptance_rerun";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto p = [&](const std::string& name) { return (dir / name).string(); };
    std::ostringstream sink;
    auto cli = [&](std::vector<std::string> args) {
        if (cli::run(args, sink, sink) != 0) throw Error("command failed: " + args.front() + "\n" + sink.str());
    };

    cli({"synth", "-m", "ovrv", "--duration", "120", "--asymmetric", "--seed", "11", "-o", p("record.csv")});
    cli({"train", "-i", p("record.csv"), "-m", "ovrv-paai", "--members", "2", "--epochs", "3", "--seed", "21", "-o",
         p("ens")});
    cli({"simulate", "-i", p("record.csv"), "-m", p("ens/ensemble.json"), "--part", "test", "-o", p("sim.csv")});
    cli({"stats", "-i", p("record.csv"), "-i", p("sim.csv"), "--max-lag", "100", "-o", p("stats.json")});
    cli({"evaluate", "-i", p("record.csv"), "-m", "ovrv", "-m", p("ens/ensemble.json"), "-o", p("eval.json")});
    cli({"report", "-i", p("stats.json"), "-i", p("eval.json"), "-i", p("ens/member_0.json"), "-o", p("report.json")});

    const std::vector<std::string> manifests{"record.csv.manifest.json", "ens/manifest.json", "sim.csv.manifest.json",
                                             "stats.json.manifest.json", "eval.json.manifest.json",
                                             "report.json.manifest.json"};
    std::vector<std::pair<std::string, std::string>> first;
    for (const auto& m : manifests) {
        const auto manifest = read_json_file(p(m));
        for (const auto& out : manifest.at("outputs")) {
            const auto path = out.get<std::string>();
            first.emplace_back(path, slurp(path));
        }
    }
    std::size_t differing = 0;
    for (const auto& m : manifests) {
        const auto outputs = read_json_file(p(m)).at("outputs");
        for (const auto& out : outputs) {
            if (out.get<std::string>() != p(m)) fs::remove(out.get<std::string>());
        }
        cli({"rerun", p(m)});
    }
    for (const auto& [path, bytes] : first) {
        if (slurp(path) != bytes) ++differing;
    }
    fs::remove_all(dir);
    const std::string detail = std::to_string(manifests.size()) + " manifests re-run, " +
                               std::to_string(first.size()) + " output files compared, " +
                               std::to_string(differing) + " differ";
    return differing == 0 && !first.empty() ? pass(detail) : fail(detail);
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"calibration recovery", calibration_recovery},
        {"residual identity", residual_identity},
        {"gradient correctness", gradient_correctness},
        {"phase rule", phase_rule},
        {"synthetic trend", synthetic_trend},
        {"statistics invariants", statistics_invariants},
        {"ring conservation and equilibrium", ring_checks},
        {"dataset replay", dataset_replay},
        {"reproducibility", reproducibility},
    };
    // Optional arguments select criteria by number; default runs all.
    std::vector<bool> selected(criteria.size(), argc < 2);
    for (int a = 1; a < argc; ++a) {
        const auto n = static_cast<std::size_t>(std::atoi(argv[a]));
        if (n >= 1 && n <= criteria.size()) selected[n - 1] = true;
    }
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        if (!selected[k]) continue;
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const char* tag = o.status == Outcome::pass ? "PASS" : (o.status == Outcome::skip ? "SKIP" : "FAIL");
        if (o.status == Outcome::fail) ++failed;
        std::cout << "[" << tag << "] " << (k + 1) << " " << criteria[k].first << ": " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
