#pragma once

// Command-line front end. `run` is callable in-process so tests can drive
// every subcommand without spawning processes.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "paai/paai.hpp"

namespace paai::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kConfigEnv = "PAAI_CONFIG";

/// Bad command-line usage; reported with exit status 2.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// 64-bit FNV-1a over the bytes of a file, as 16 hex digits.
inline std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "' for hashing");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

struct Manifest {
    std::string subcommand;
    std::vector<std::string> argv;
    std::string config;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::map<std::string, std::uint64_t> seeds;

    json to_json() const {
        json in = json::array();
        for (const auto& p : inputs) in.push_back({{"path", p}, {"fnv1a64", file_digest(p)}});
        json s = json::object();
        for (const auto& [k, v] : seeds) s[k] = v;
        return json{{"format", "paai-run"}, {"tool_version", kVersion}, {"subcommand", subcommand},
                    {"argv", argv},         {"config", config},         {"inputs", in},
                    {"seeds", s},           {"outputs", outputs}};
    }
};

/// Model named on the command line: a classical kind (Table-6 defaults), a
/// path to a calibration / checkpoint / ensemble file, or LABEL=PATH.
inline LoadedModel resolve_model(const std::string& spec) {
    std::string label;
    std::string target = spec;
    if (const auto eq = spec.find('='); eq != std::string::npos) {
        label = spec.substr(0, eq);
        target = spec.substr(eq + 1);
    }
    LoadedModel m;
    if (target == "ovrv" || target == "idm") {
        m.classic = default_params(base_kind_from_string(target));
        m.name = target;
        m.predictor = make_classic_predictor(*m.classic);
    } else if (target == "baseline-ai" || target == "ovrv-paai" || target == "idm-paai") {
        throw UsageError("model '" + target + "' needs a trained checkpoint: pass --model " + target +
                                    "=PATH");
    } else {
        m = load_model_manifest(target);
    }
    if (!label.empty()) m.name = label;
    return m;
}

inline Trajectory select_part(const Trajectory& traj, const std::string& part) {
    if (part == "all") return traj;
    const DatasetSplit sp = split(traj);
    if (part == "train") return sp.train;
    if (part == "validation") return sp.validation;
    if (part == "test") return sp.test;
    throw UsageError("unknown split part '" + part + "'");
}

inline GridSpec apply_grid_overrides(BaseKind kind, const std::vector<std::string>& overrides) {
    GridSpec grid = default_grid(kind);
    for (const auto& o : overrides) {
        // NAME=LO:HI:STEPS
        const auto eq = o.find('=');
        const auto c1 = o.find(':', eq);
        const auto c2 = c1 == std::string::npos ? c1 : o.find(':', c1 + 1);
        if (eq == std::string::npos || c1 == std::string::npos || c2 == std::string::npos) {
            throw UsageError("grid override '" + o + "' is not NAME=LO:HI:STEPS");
        }
        const std::string name = o.substr(0, eq);
        auto it = std::find_if(grid.axes.begin(), grid.axes.end(), [&](const GridAxis& a) { return a.name == name; });
        if (it == grid.axes.end()) throw UsageError("unknown grid axis '" + name + "'");
        it->lo = std::stod(o.substr(eq + 1, c1 - eq - 1));
        it->hi = std::stod(o.substr(c1 + 1, c2 - c1 - 1));
        it->steps = static_cast<std::size_t>(std::stoul(o.substr(c2 + 1)));
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Stats report.

inline json series_report(const std::string& name, std::span<const double> x, std::size_t kde_points) {
    const auto st = stats::summarize(x);
    const auto [lo, hi] = stats::outlier_fences(st);
    std::size_t outliers = 0;
    for (double v : x) outliers += (v < lo || v > hi) ? 1 : 0;
    json j{{"series", name},
           {"summary",
            {{"n", st.n},
             {"min", st.min},
             {"q1", st.q1},
             {"median", st.median},
             {"q3", st.q3},
             {"max", st.max},
             {"mean", st.mean},
             {"std", st.std},
             {"iqr", st.iqr}}},
           {"fences", {lo, hi}},
           {"outliers", outliers}};
    if (x.size() >= 2) {
        // Constant series get a nominal bandwidth instead of failing.
        const double h = st.std > 0.0 ? stats::silverman_bandwidth(x) : 1e-3;
        stats::KdeConfig kc{h, stats::linspace(st.min - 3.0 * h, st.max + 3.0 * h, kde_points)};
        j["kde"] = {{"bandwidth", h}, {"grid", kc.grid}, {"density", stats::kde(x, kc)}};
    }
    return j;
}

struct Options {
    // common
    std::vector<std::string> inputs;
    std::string output;
    double dt = 0.1;
    std::uint64_t seed = 1;
    std::vector<std::string> models;
    unsigned threads = 0;
    std::string part;  // empty: subcommand default

    // ingest
    std::string col_t = "t", col_v = "v", col_vl = "v_l", col_s;
    std::string col_lead_lat, col_lead_lon, col_foll_lat, col_foll_lon;
    std::string delimiter = ",";
    std::size_t smooth_window = 1;
    bool write_split = false;

    // stats
    std::size_t max_lag = 2000;
    std::size_t kde_points = 256;
    std::size_t jerk_window = 25;

    // calibrate
    std::vector<std::string> grid;

    // train
    std::string base_file;
    std::size_t members = 5;
    std::size_t epochs = 200;
    std::size_t patience = 15;
    std::size_t batch = 64;
    double lr = 1e-3;
    double weight_decay = 0.01;
    std::string acc_loss;
    std::string reg;

    // ring
    std::size_t vehicles = 22;
    double ring_length = 230.0;
    double speed = -1.0;
    double duration = 60.0;
    double perturb = 0.0;

    // synth
    double lead_scale = 1.0;
    bool asymmetric = false;
    double noise = 0.05;

    // rerun
    std::string manifest;
};

class Runner {
public:
    Runner(std::ostream& out, std::ostream& err) : m_out(out), m_err(err) {}

    int run(const std::vector<std::string>& args);

private:
    std::ostream& m_out;
    std::ostream& m_err;
    Options m_opt;
    Manifest m_manifest;

    void ensure_output() const {
        if (m_opt.output.empty()) throw UsageError("--output is required");
    }
    const std::string& single_input() const {
        if (m_opt.inputs.size() != 1) throw UsageError("exactly one --input is required");
        return m_opt.inputs.front();
    }
    void add_output(const std::string& path) { m_manifest.outputs.push_back(path); }
    LoadedModel use_model(const std::string& spec) {
        LoadedModel m = resolve_model(spec);
        for (const auto& f : m.files) m_manifest.inputs.push_back(f);
        return m;
    }
    void write_manifest(const std::string& path) {
        add_output(path);
        write_json_file(path, m_manifest.to_json());
    }
    static std::string manifest_path_for(const std::string& output) { return output + ".manifest.json"; }

    void cmd_ingest();
    void cmd_stats();
    void cmd_calibrate();
    void cmd_train();
    void cmd_predict();
    void cmd_simulate();
    void cmd_evaluate();
    void cmd_ring();
    void cmd_report();
    void cmd_synth();
    int cmd_rerun();
};

inline void Runner::cmd_ingest() {
    ensure_output();
    ColumnMapping map;
    map.timestamp = m_opt.col_t;
    map.foll_speed = m_opt.col_v;
    map.lead_speed = m_opt.col_vl;
    if (!m_opt.col_s.empty()) map.spacing = m_opt.col_s;
    if (!m_opt.col_lead_lat.empty()) map.lead_lat = m_opt.col_lead_lat;
    if (!m_opt.col_lead_lon.empty()) map.lead_lon = m_opt.col_lead_lon;
    if (!m_opt.col_foll_lat.empty()) map.foll_lat = m_opt.col_foll_lat;
    if (!m_opt.col_foll_lon.empty()) map.foll_lon = m_opt.col_foll_lon;
    if (m_opt.delimiter.size() != 1) throw UsageError("--delimiter must be one character");
    map.delimiter = m_opt.delimiter[0];

    const std::string& in = single_input();
    m_manifest.inputs.push_back(in);
    const auto raw = load_csv(in, map);
    const Trajectory traj = preprocess(raw, m_opt.dt, m_opt.smooth_window);
    save_trajectory(m_opt.output, traj);
    add_output(m_opt.output);
    if (m_opt.write_split) {
        const DatasetSplit sp = split(traj);
        const std::filesystem::path base(m_opt.output);
        const auto stem = (base.parent_path() / base.stem()).string();
        for (const auto& [suffix, part] : {std::pair{"_train.csv", &sp.train}, std::pair{"_validation.csv", &sp.validation},
                                           std::pair{"_test.csv", &sp.test}}) {
            save_trajectory(stem + suffix, *part);
            add_output(stem + suffix);
        }
    }
    m_out << "ingested " << raw.size() << " rows into " << traj.size() << " samples at dt=" << traj.dt << "\n";
    write_manifest(manifest_path_for(m_opt.output));
}

inline void Runner::cmd_stats() {
    ensure_output();
    if (m_opt.inputs.empty()) throw UsageError("at least one --input is required");
    std::vector<Trajectory> trajs;
    for (const auto& in : m_opt.inputs) {
        m_manifest.inputs.push_back(in);
        trajs.push_back(load_trajectory(in));
    }
    json records = json::array();
    for (std::size_t k = 0; k < trajs.size(); ++k) {
        const auto& t = trajs[k];
        json rec{{"input", m_opt.inputs[k]}, {"samples", t.size()}, {"dt", t.dt}};
        json series = json::array();
        series.push_back(series_report("acceleration", t.a, m_opt.kde_points));
        series.push_back(series_report("speed", t.v, m_opt.kde_points));
        series.push_back(series_report("spacing", t.s, m_opt.kde_points));
        series.push_back(series_report("relative_speed", t.dv, m_opt.kde_points));
        rec["series"] = std::move(series);
        const auto jp = stats::jerk(t.a, t.dt, m_opt.jerk_window);
        rec["jerk"] = {{"filter_window", m_opt.jerk_window}, {"jsi", jp.jsi}, {"raw", jp.raw}, {"filtered", jp.filtered}};
        const std::size_t lag = std::min(m_opt.max_lag, t.size() - 1);
        const auto ac = stats::acf(t.s, lag);
        rec["acf"] = {{"max_lag", lag}, {"lags", ac.lags}, {"rho", ac.rho}};
        records.push_back(std::move(rec));
    }
    json ks = json::array();
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        for (std::size_t j = i + 1; j < trajs.size(); ++j) {
            json pair{{"a", m_opt.inputs[i]}, {"b", m_opt.inputs[j]}};
            for (const auto& [name, pa, pb] :
                 {std::tuple{"acceleration", &trajs[i].a, &trajs[j].a}, std::tuple{"speed", &trajs[i].v, &trajs[j].v},
                  std::tuple{"spacing", &trajs[i].s, &trajs[j].s}}) {
                const auto e = stats::ecdf_and_ks(*pa, *pb);
                pair[name] = {{"ks", e.ks}, {"support", e.support}, {"cdf_a", e.cdf_a}, {"cdf_b", e.cdf_b}};
            }
            ks.push_back(std::move(pair));
        }
    }
    write_json_file(m_opt.output, json{{"format", "paai-stats"}, {"records", records}, {"ks_pairs", ks}});
    add_output(m_opt.output);
    m_out << "wrote statistics for " << trajs.size() << " record(s) to " << m_opt.output << "\n";
    write_manifest(manifest_path_for(m_opt.output));
}

inline void Runner::cmd_calibrate() {
    ensure_output();
    if (m_opt.models.size() != 1) throw UsageError("calibrate needs exactly one --model (ovrv or idm)");
    if (m_opt.models.front() != "ovrv" && m_opt.models.front() != "idm") {
        throw UsageError("calibrate needs --model ovrv or idm");
    }
    const BaseKind kind = base_kind_from_string(m_opt.models.front());
    const std::string& in = single_input();
    m_manifest.inputs.push_back(in);
    const Trajectory traj = select_part(load_trajectory(in), m_opt.part);
    const GridSpec grid = apply_grid_overrides(kind, m_opt.grid);
    CalibrationOptions co;
    co.threads = m_opt.threads;
    const auto res = calibrate(kind, traj, grid, co);
    json j = to_json(res, grid);
    j["input"] = in;
    j["part"] = m_opt.part;
    write_json_file(m_opt.output, j);
    add_output(m_opt.output);
    m_out << to_string(kind) << " spacing RMSE " << res.spacing_rmse << " m over " << res.evaluated << " cells\n";
    write_manifest(manifest_path_for(m_opt.output));
}

inline void Runner::cmd_train() {
    ensure_output();
    if (m_opt.models.size() != 1) throw UsageError("train needs exactly one --model");
    const std::string& kind_name = m_opt.models.front();
    if (kind_name != "baseline-ai" && kind_name != "ovrv-paai" && kind_name != "idm-paai") {
        throw UsageError("train needs --model baseline-ai, ovrv-paai or idm-paai");
    }
    const ModelKind kind = model_kind_from_string(kind_name);
    const std::string& in = single_input();
    m_manifest.inputs.push_back(in);
    ClassicParams base = OvrvParams{};
    if (kind != ModelKind::baseline_ai) {
        if (m_opt.base_file.empty()) {
            base = default_params(base_of(kind));
        } else {
            m_manifest.inputs.push_back(m_opt.base_file);
            base = classic_from_json(read_json_file(m_opt.base_file));
            if (base_of(kind) == BaseKind::ovrv && !std::holds_alternative<OvrvParams>(base)) {
                throw UsageError("--base must hold OVRV parameters for ovrv-paai");
            }
            if (base_of(kind) == BaseKind::idm && !std::holds_alternative<IdmParams>(base)) {
                throw UsageError("--base must hold IDM parameters for idm-paai");
            }
        }
    }
    const DatasetSplit sp = split(load_trajectory(in));

    EnsembleConfig ec;
    ec.members = m_opt.members;
    ec.threads = m_opt.threads ? m_opt.threads : std::max(1u, std::thread::hardware_concurrency());
    ec.train.epochs = m_opt.epochs;
    ec.train.patience = m_opt.patience;
    ec.train.batch_size = m_opt.batch;
    ec.train.seed = m_opt.seed;
    ec.train.optimizer.learning_rate = m_opt.lr;
    ec.train.optimizer.weight_decay = m_opt.weight_decay;
    m_manifest.seeds["train"] = m_opt.seed;

    // Loss overrides go through a template model so every member shares them.
    LossConfig loss = default_loss(kind);
    if (!m_opt.acc_loss.empty()) loss.acc = acc_loss_from_string(m_opt.acc_loss);
    if (!m_opt.reg.empty()) loss.reg = reg_from_string(m_opt.reg);

    std::vector<std::optional<TrainResult>> results(ec.members);
    std::vector<std::exception_ptr> errors(ec.members);
    auto member = [&](std::size_t k) {
        try {
            TrainConfig tc = ec.train;
            tc.seed = ec.train.seed + k;
            PaaiModel m = initialize_model(kind, base, sp.train, tc.seed, ec.shape);
            m.loss = loss;
            results[k] = train(std::move(m), sp, tc);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };
    {
        const std::size_t threads = std::min<std::size_t>(ec.threads, ec.members);
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t k = w; k < ec.members; k += threads) member(k);
            });
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    const std::filesystem::path dir(m_opt.output);
    std::filesystem::create_directories(dir);
    std::vector<std::string> files;
    for (std::size_t k = 0; k < ec.members; ++k) {
        const std::string name = "member_" + std::to_string(k) + ".json";
        write_json_file((dir / name).string(), checkpoint_json(*results[k], ec.train.seed + k));
        add_output((dir / name).string());
        files.push_back(name);
        m_manifest.seeds["member_" + std::to_string(k)] = ec.train.seed + k;
        m_out << "member " << k << ": best epoch " << results[k]->best_epoch << ", validation loss "
              << results[k]->best_validation_loss << "\n";
    }
    const std::string ens = (dir / "ensemble.json").string();
    write_json_file(ens, ensemble_manifest(kind, files));
    add_output(ens);
    write_manifest((dir / "manifest.json").string());
}

inline void Runner::cmd_predict() {
    ensure_output();
    if (m_opt.models.size() != 1) throw UsageError("predict needs exactly one --model");
    const std::string& in = single_input();
    m_manifest.inputs.push_back(in);
    const LoadedModel model = use_model(m_opt.models.front());
    const Trajectory traj = load_trajectory(in);
    const auto target = traj.forward_accel();
    std::vector<CfState> history;
    std::ofstream out(m_opt.output, std::ios::binary);
    if (!out) throw Error("cannot write '" + m_opt.output + "'");
    out << "t,a_hat,a\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        history.push_back(CfState{traj.s[i], traj.v[i], traj.v_l[i]});
        const double a = model.predictor.accel(history);
        out << detail::format_g9(traj.time(i)) << ',' << detail::format_g9(a) << ',' << detail::format_g9(target[i]) << '\n';
    }
    if (!out) throw Error("write to '" + m_opt.output + "' failed");
    out.close();
    add_output(m_opt.output);
    m_out << "wrote " << traj.size() << " one-step predictions to " << m_opt.output << "\n";
    write_manifest(manifest_path_for(m_opt.output));
}

inline void Runner::cmd_simulate() {
    ensure_output();
    if (m_opt.models.size() != 1) throw UsageError("simulate needs exactly one --model");
    const std::string& in = single_input();
    m_manifest.inputs.push_back(in);
    const LoadedModel model = use_model(m_opt.models.front());
    const Trajectory truth = select_part(load_trajectory(in), m_opt.part);
    SimConfig sim;
    sim.dt = truth.dt;
    const SimResult res = simulate_against(model.predictor, truth, sim);
    save_trajectory(m_opt.output, to_trajectory(res, truth.v_l, truth.dt, truth.t0));
    add_output(m_opt.output);
    m_out << model.name << ": spacing RMSE " << res.rmse_spacing << " m, speed RMSE " << res.rmse_speed
          << " m/s, acceleration RMSE " << res.rmse_accel << " m/s^2" << (res.collided ? " (collision)" : "") << "\n";
    write_manifest(manifest_path_for(m_opt.output));
}

inline void Runner::cmd_evaluate() {
    ensure_output();
    if (m_opt.models.empty()) throw UsageError("evaluate needs at least one --model");
    const std::string& in = single_input();
    m_manifest.inputs.push_back(in);
    std::vector<NamedPredictor> models;
    for (const auto& spec : m_opt.models) {
        auto lm = use_model(spec);
        models.push_back({lm.name, lm.predictor});
    }
    const Trajectory truth = select_part(load_trajectory(in), m_opt.part);
    SimConfig sim;
    sim.dt = truth.dt;
    const auto rows = evaluate(models, truth, sim);
    json table = json::array();
    for (const auto& r : rows) {
        json row{{"model", r.name}};
        if (r.error) {
            row["error"] = *r.error;
        } else {
            row["rmse_accel"] = r.rmse_accel;
            row["rmse_speed"] = r.rmse_speed;
            row["rmse_spacing"] = r.rmse_spacing;
            row["collided"] = r.collided;
        }
        table.push_back(std::move(row));
        m_out << r.name << ": " << (r.error ? *r.error : "spacing RMSE " + detail::format_g9(r.rmse_spacing)) << "\n";
    }
    write_json_file(m_opt.output, json{{"format", "paai-evaluation"},
                                       {"input", in},
                                       {"part", m_opt.part},
                                       {"samples", truth.size()},
                                       {"columns", {"rmse_accel", "rmse_speed", "rmse_spacing"}},
                                       {"rows", table}});
    add_output(m_opt.output);
    write_manifest(manifest_path_for(m_opt.output));
}

inline void Runner::cmd_ring() {
    ensure_output();
    if (m_opt.models.size() != 1) throw UsageError("ring needs exactly one --model");
    const LoadedModel model = use_model(m_opt.models.front());
    double v = m_opt.speed;
    RingConfig rc;
    if (v < 0.0) {
        // Uniform equilibrium speed for the classical model, else 10 m/s.
        v = 10.0;
        if (model.classic && std::holds_alternative<OvrvParams>(*model.classic)) {
            const auto& p = std::get<OvrvParams>(*model.classic);
            v = std::max(0.0, (m_opt.ring_length / static_cast<double>(m_opt.vehicles) - p.eta) / p.tau);
        }
    }
    rc = RingConfig::uniform(m_opt.vehicles, m_opt.ring_length, v);
    rc.init_speed[0] = std::max(0.0, rc.init_speed[0] + m_opt.perturb);
    SimConfig sim;
    sim.dt = m_opt.dt;
    const std::vector<AnyPredictor> preds{model.predictor};
    const RingResult res = ring_simulate(rc, preds, m_opt.duration, sim);
    json veh = json::array();
    for (std::size_t i = 0; i < rc.n_vehicles; ++i) {
        veh.push_back({{"v", res.v[i]}, {"s", res.s[i]}, {"a", res.a[i]}});
    }
    write_json_file(m_opt.output, json{{"format", "paai-ring"},
                                       {"model", model.name},
                                       {"vehicles", rc.n_vehicles},
                                       {"ring_length", rc.ring_length},
                                       {"initial_speed", v},
                                       {"perturbation", m_opt.perturb},
                                       {"dt", sim.dt},
                                       {"steps", res.steps},
                                       {"collided", res.collided},
                                       {"collision_step", res.collision_step},
                                       {"max_spacing_sum_error", res.max_spacing_sum_error},
                                       {"series", veh}});
    add_output(m_opt.output);
    m_out << "ring: " << res.steps << " steps" << (res.collided ? ", collision" : "") << "\n";
    write_manifest(manifest_path_for(m_opt.output));
}

inline void Runner::cmd_report() {
    ensure_output();
    if (m_opt.inputs.empty()) throw UsageError("report needs at least one --input");
    json summary = json::array(), jerk = json::array(), acf = json::array(), ks = json::array();
    json calibration = json::array(), evaluation = json::array(), training = json::array();
    for (const auto& in : m_opt.inputs) {
        m_manifest.inputs.push_back(in);
        const json j = read_json_file(in);
        const std::string format = j.value("format", "");
        if (format == "paai-stats") {
            for (const auto& rec : j.at("records")) {
                json row{{"input", rec.at("input")}};
                for (const auto& s : rec.at("series")) row[s.at("series").get<std::string>()] = s.at("summary");
                summary.push_back(row);
                jerk.push_back({{"input", rec.at("input")}, {"jsi", rec.at("jerk").at("jsi")}});
                const auto& rho = rec.at("acf").at("rho");
                acf.push_back({{"input", rec.at("input")},
                               {"max_lag", rec.at("acf").at("max_lag")},
                               {"rho_lag_10", rho.size() > 10 ? rho.at(10) : json(nullptr)},
                               {"rho_lag_100", rho.size() > 100 ? rho.at(100) : json(nullptr)}});
            }
            for (const auto& p : j.at("ks_pairs")) {
                ks.push_back({{"a", p.at("a")},
                              {"b", p.at("b")},
                              {"acceleration", p.at("acceleration").at("ks")},
                              {"speed", p.at("speed").at("ks")},
                              {"spacing", p.at("spacing").at("ks")}});
            }
        } else if (format == "paai-calibration") {
            calibration.push_back({{"model", j.at("kind")}, {"params", j.at("params")},
                                   {"spacing_rmse", j.at("spacing_rmse")}});
        } else if (format == "paai-evaluation") {
            for (const auto& r : j.at("rows")) evaluation.push_back(r);
        } else if (format == "paai-model") {
            training.push_back({{"input", in}, {"kind", j.at("kind")}, {"training", j.value("training", json(nullptr))}});
        } else {
            throw Error("'" + in + "' is not a stats, calibration, evaluation or model file");
        }
    }
    write_json_file(m_opt.output, json{{"format", "paai-report"},
                                       {"summary_statistics", summary},
                                       {"distribution_distances", ks},
                                       {"jerk", jerk},
                                       {"autocorrelation", acf},
                                       {"calibration", calibration},
                                       {"training", training},
                                       {"evaluation", evaluation}});
    add_output(m_opt.output);
    m_out << "wrote report to " << m_opt.output << "\n";
    write_manifest(manifest_path_for(m_opt.output));
}

inline void Runner::cmd_synth() {
    ensure_output();
    if (m_opt.models.size() != 1 || (m_opt.models.front() != "ovrv" && m_opt.models.front() != "idm")) {
        throw UsageError("synth needs --model ovrv or idm");
    }
    const ClassicParams p = default_params(base_kind_from_string(m_opt.models.front()));
    synthetic::LeadProfile lp;
    lp.amplitude *= m_opt.lead_scale;
    for (double& l : lp.levels) l *= m_opt.lead_scale;
    const auto lead = synthetic::lead_speed(m_opt.duration, m_opt.dt, lp);
    Trajectory traj;
    if (m_opt.asymmetric) {
        synthetic::Asymmetry asym;
        asym.noise_std = m_opt.noise;
        asym.seed = m_opt.seed;
        m_manifest.seeds["noise"] = m_opt.seed;
        traj = synthetic::asymmetric_follower(p, lead, m_opt.dt, asym);
    } else {
        traj = synthetic::classic_follower(p, lead, m_opt.dt);
    }
    save_trajectory(m_opt.output, traj);
    add_output(m_opt.output);
    m_out << "wrote " << traj.size() << " synthetic samples to " << m_opt.output << "\n";
    write_manifest(manifest_path_for(m_opt.output));
}

inline int Runner::cmd_rerun() {
    const json j = read_json_file(m_opt.manifest);
    if (j.value("format", "") != "paai-run") throw Error("'" + m_opt.manifest + "' is not a run manifest");
    for (const auto& in : j.at("inputs")) {
        const std::string path = in.at("path").get<std::string>();
        if (file_digest(path) != in.at("fnv1a64").get<std::string>()) {
            throw Error("input '" + path + "' changed since the recorded run");
        }
    }
    Runner inner(m_out, m_err);
    return inner.run(j.at("argv").get<std::vector<std::string>>());
}

inline int Runner::run(const std::vector<std::string>& args) {
    CLI::App app{"Car-following models with phase-aware neural corrections"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file with option defaults; flags on the command line win")
        ->envname(kConfigEnv);

    auto& o = m_opt;
    auto common = [&](CLI::App* sub, bool multi_input = false) {
        if (multi_input) {
            sub->add_option("-i,--input", o.inputs, "Input file (repeatable)");
        } else {
            sub->add_option("-i,--input", o.inputs, "Input file")->expected(1);
        }
        sub->add_option("-o,--output", o.output, "Output path");
        sub->add_option("--dt", o.dt, "Time step in seconds")->check(CLI::PositiveNumber);
        sub->add_option("--seed", o.seed, "Random seed");
        sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
    };
    auto model_opt = [&](CLI::App* sub, bool multi) {
        auto* opt = sub->add_option("-m,--model", o.models,
                                    "ovrv | idm | baseline-ai | ovrv-paai | idm-paai, a model file, or LABEL=FILE");
        if (!multi) opt->expected(1);
    };
    auto part_opt = [&](CLI::App* sub, const std::string& def) {
        sub->add_option("--part", o.part, "Portion of the record: all | train | validation | test (default " + def + ")")
            ->check(CLI::IsMember({"all", "train", "validation", "test"}));
    };

    auto* ingest = app.add_subcommand("ingest", "Resample a raw delimited log into a canonical trajectory");
    common(ingest);
    ingest->add_option("--col-t", o.col_t, "Timestamp column");
    ingest->add_option("--col-v", o.col_v, "Follower speed column");
    ingest->add_option("--col-vl", o.col_vl, "Leader speed column");
    ingest->add_option("--col-spacing", o.col_s, "Spacing column");
    ingest->add_option("--col-lead-lat", o.col_lead_lat, "Leader latitude column");
    ingest->add_option("--col-lead-lon", o.col_lead_lon, "Leader longitude column");
    ingest->add_option("--col-foll-lat", o.col_foll_lat, "Follower latitude column");
    ingest->add_option("--col-foll-lon", o.col_foll_lon, "Follower longitude column");
    ingest->add_option("--delimiter", o.delimiter, "Field delimiter");
    ingest->add_option("--smooth", o.smooth_window, "Centered moving-average window for speeds (odd)");
    ingest->add_flag("--split", o.write_split, "Also write _train/_validation/_test files");

    auto* st = app.add_subcommand("stats", "Summary statistics, KDE, KS, jerk and autocorrelation");
    common(st, true);
    st->add_option("--max-lag", o.max_lag, "Largest autocorrelation lag in samples");
    st->add_option("--kde-points", o.kde_points, "KDE grid size")->check(CLI::Range(2, 100000));
    st->add_option("--jerk-window", o.jerk_window, "Jerk moving-average window (odd)");

    auto* cal = app.add_subcommand("calibrate", "Grid-search calibration of a classical model");
    common(cal);
    model_opt(cal, false);
    cal->add_option("--grid", o.grid, "Axis override NAME=LO:HI:STEPS (repeatable)");
    part_opt(cal, "train");

    auto* tr = app.add_subcommand("train", "Train an ensemble of learned models");
    common(tr);
    model_opt(tr, false);
    tr->add_option("--base", o.base_file, "Calibration file with base-model parameters");
    tr->add_option("--members", o.members, "Ensemble size")->check(CLI::Range(1, 1000));
    tr->add_option("--epochs", o.epochs, "Maximum epochs");
    tr->add_option("--patience", o.patience, "Early-stopping patience in epochs");
    tr->add_option("--batch", o.batch, "Mini-batch size")->check(CLI::Range(1, 1 << 20));
    tr->add_option("--lr", o.lr, "AdamW learning rate")->check(CLI::PositiveNumber);
    tr->add_option("--weight-decay", o.weight_decay, "AdamW decoupled weight decay");
    tr->add_option("--acc-loss", o.acc_loss, "Acceleration loss: smooth-l1 | mse")
        ->check(CLI::IsMember({"smooth-l1", "mse"}));
    tr->add_option("--reg", o.reg, "Regularizer: variance | mae")->check(CLI::IsMember({"variance", "mae"}));

    auto* pr = app.add_subcommand("predict", "One-step acceleration predictions along a recorded trajectory");
    common(pr);
    model_opt(pr, false);

    auto* sim = app.add_subcommand("simulate", "Closed-loop rollout behind a recorded leader");
    common(sim);
    model_opt(sim, false);
    part_opt(sim, "all");

    auto* ev = app.add_subcommand("evaluate", "Closed-loop RMSE comparison table");
    common(ev);
    model_opt(ev, true);
    part_opt(ev, "test");

    auto* ring = app.add_subcommand("ring", "Ring-road platoon simulation");
    common(ring);
    model_opt(ring, false);
    ring->add_option("--vehicles", o.vehicles, "Number of vehicles")->check(CLI::Range(2, 100000));
    ring->add_option("--length", o.ring_length, "Ring length in meters")->check(CLI::PositiveNumber);
    ring->add_option("--speed", o.speed, "Initial uniform speed (default: equilibrium)");
    ring->add_option("--duration", o.duration, "Simulated seconds")->check(CLI::PositiveNumber);
    ring->add_option("--perturb", o.perturb, "Initial speed change of vehicle 0");

    auto* rep = app.add_subcommand("report", "Bundle stats, calibration, training and evaluation outputs");
    common(rep, true);

    auto* syn = app.add_subcommand("synth", "Generate a synthetic follower trajectory");
    common(syn);
    model_opt(syn, false);
    syn->add_option("--duration", o.duration, "Seconds")->check(CLI::PositiveNumber);
    syn->add_option("--lead-scale", o.lead_scale, "Scale of the leader speed variations");
    syn->add_flag("--asymmetric", o.asymmetric, "Add phase-dependent gain, braking and noise");
    syn->add_option("--noise", o.noise, "Acceleration noise std for --asymmetric");

    auto* rr = app.add_subcommand("rerun", "Repeat a run from its manifest");
    rr->add_option("manifest", o.manifest, "Run manifest")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        m_out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        m_out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        m_out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        m_err << "error: " << e.what() << "\n";
        for (const auto* sub : app.get_subcommands()) m_err << sub->help();
        return 2;
    }

    CLI::App* chosen = app.get_subcommands().front();
    if (o.part.empty()) {
        o.part = chosen == cal ? "train" : (chosen == ev ? "test" : "all");
    }
    m_manifest.subcommand = chosen->get_name();
    m_manifest.argv = args;
    m_manifest.config = chosen->config_to_str(true, false);
    try {
        const std::string& name = m_manifest.subcommand;
        if (name == "ingest") cmd_ingest();
        else if (name == "stats") cmd_stats();
        else if (name == "calibrate") cmd_calibrate();
        else if (name == "train") cmd_train();
        else if (name == "predict") cmd_predict();
        else if (name == "simulate") cmd_simulate();
        else if (name == "evaluate") cmd_evaluate();
        else if (name == "ring") cmd_ring();
        else if (name == "report") cmd_report();
        else if (name == "synth") cmd_synth();
        else if (name == "rerun") return cmd_rerun();
    } catch (const UsageError& e) {
        m_err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        m_err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

/// Runs one command line (without the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    Runner r(out, err);
    return r.run(args);
}

}  // namespace paai::cli
