#pragma once

// JSON persistence for classical parameters, learned models, training
// histories and ensemble manifests. Doubles are written in shortest
// round-trip form, so a reload is bit-exact.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "paai/calibration.hpp"
#include "paai/error.hpp"
#include "paai/model.hpp"
#include "paai/simulation.hpp"
#include "paai/training.hpp"

namespace paai {

using json = nlohmann::ordered_json;

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
    if (!out) throw Error("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Classical parameters.

inline json to_json(const ClassicParams& params) {
    if (const auto* p = std::get_if<OvrvParams>(&params)) {
        return json{{"kind", "ovrv"}, {"params", {{"k1", p->k1}, {"k2", p->k2}, {"eta", p->eta}, {"tau", p->tau}}}};
    }
    const auto& p = std::get<IdmParams>(params);
    return json{{"kind", "idm"},
                {"params",
                 {{"theta", p.theta}, {"v0", p.v0}, {"delta", p.delta}, {"s0", p.s0}, {"T", p.T}, {"gamma", p.gamma_idm}}}};
}

inline ClassicParams classic_from_json(const json& j) {
    const BaseKind kind = base_kind_from_string(j.at("kind").get<std::string>());
    const auto& names = parameter_names(kind);
    std::vector<double> x;
    for (const auto& n : names) x.push_back(j.at("params").at(n).get<double>());
    if (kind == BaseKind::ovrv) return ovrv_from(x);
    return idm_from(x);
}

inline ClassicParams default_params(BaseKind kind) {
    detail::require(kind != BaseKind::none, "default_params: no classical model");
    if (kind == BaseKind::ovrv) return OvrvParams{};
    return IdmParams{};
}

inline json to_json(const CalibrationResult& r, const GridSpec& grid) {
    json j = to_json(r.params);
    j["format"] = "paai-calibration";
    j["spacing_rmse"] = r.spacing_rmse;
    json axes = json::array();
    for (const auto& ax : grid.axes) {
        axes.push_back({{"name", ax.name}, {"lo", ax.lo}, {"hi", ax.hi}, {"steps", ax.steps}});
    }
    j["grid"] = {{"axes", axes},
                 {"cells", grid.cells()},
                 {"best_index", r.best_index},
                 {"evaluated", r.evaluated},
                 {"skipped", r.skipped}};
    return j;
}

// ---------------------------------------------------------------------------
// Learned models.

inline json to_json(const LossWeights& w) { return json{w.alpha, w.beta, w.gamma}; }

inline LossWeights weights_from_json(const json& j) {
    return LossWeights{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline json to_json(const PhaseConfig& c) {
    return json{{"rule", c.rule == PhaseRule::piecewise ? "piecewise" : "smooth"},
                {"dv_hi", c.dv_hi},
                {"dv_lo", c.dv_lo},
                {"w_accel", c.w_accel},
                {"w_decel", c.w_decel},
                {"w_neutral", c.w_neutral},
                {"margin_accel_min", c.margin_accel_min},
                {"margin_decel_max", c.margin_decel_max},
                {"margin_c1", c.margin_c1},
                {"margin_c0", c.margin_c0},
                {"phi_dv", c.phi_dv},
                {"phi_ms", c.phi_ms},
                {"phi_0", c.phi_0}};
}

inline PhaseConfig phase_from_json(const json& j) {
    PhaseConfig c;
    const std::string rule = j.at("rule").get<std::string>();
    detail::require(rule == "piecewise" || rule == "smooth", "unknown phase rule '" + rule + "'");
    c.rule = rule == "piecewise" ? PhaseRule::piecewise : PhaseRule::smooth;
    c.dv_hi = j.at("dv_hi").get<double>();
    c.dv_lo = j.at("dv_lo").get<double>();
    c.w_accel = j.at("w_accel").get<double>();
    c.w_decel = j.at("w_decel").get<double>();
    c.w_neutral = j.at("w_neutral").get<double>();
    c.margin_accel_min = j.at("margin_accel_min").get<double>();
    c.margin_decel_max = j.at("margin_decel_max").get<double>();
    c.margin_c1 = j.at("margin_c1").get<double>();
    c.margin_c0 = j.at("margin_c0").get<double>();
    c.phi_dv = j.at("phi_dv").get<double>();
    c.phi_ms = j.at("phi_ms").get<double>();
    c.phi_0 = j.at("phi_0").get<double>();
    return c;
}

inline json to_json(const LossConfig& c) {
    return json{{"start", to_json(c.start)},
                {"end", to_json(c.end)},
                {"acc", c.acc == AccLossKind::smooth_l1 ? "smooth-l1" : "mse"},
                {"safe_c1", c.safe_c1},
                {"safe_c0", c.safe_c0},
                {"reg", c.reg == RegKind::variance ? "variance" : "mae"},
                {"l2", c.l2}};
}

inline AccLossKind acc_loss_from_string(const std::string& s) {
    if (s == "smooth-l1") return AccLossKind::smooth_l1;
    if (s == "mse") return AccLossKind::mse;
    throw std::invalid_argument("unknown acceleration loss '" + s + "'");
}

inline RegKind reg_from_string(const std::string& s) {
    if (s == "variance") return RegKind::variance;
    if (s == "mae") return RegKind::mae;
    throw std::invalid_argument("unknown regularizer '" + s + "'");
}

inline LossConfig loss_from_json(const json& j) {
    LossConfig c;
    c.start = weights_from_json(j.at("start"));
    c.end = weights_from_json(j.at("end"));
    c.acc = acc_loss_from_string(j.at("acc").get<std::string>());
    c.safe_c1 = j.at("safe_c1").get<double>();
    c.safe_c0 = j.at("safe_c0").get<double>();
    c.reg = reg_from_string(j.at("reg").get<std::string>());
    c.l2 = j.at("l2").get<double>();
    return c;
}

inline json to_json(const PaaiModel& m) {
    json j;
    j["format"] = "paai-model";
    j["kind"] = to_string(m.kind);
    j["base"] = m.has_base() ? to_json(m.base) : json(nullptr);
    j["shape"] = {{"window", m.shape.window},
                  {"hidden", m.shape.hidden},
                  {"attention", m.shape.attention},
                  {"head_hidden", m.shape.head_hidden}};
    j["phase"] = to_json(m.phase);
    j["loss"] = to_json(m.loss);
    j["accel_bounds"] = {m.accel_min, m.accel_max};
    j["dt"] = m.dt;
    j["normalizer"] = {{"mean", m.norm.mean}, {"scale", m.norm.scale}};
    NetworkParams scratch = m.net;
    json params = json::object();
    for (const auto& r : const_cast<NetworkParams&>(m.net).refs(scratch)) {
        params[r.name] = {{"shape", r.value->shape()}, {"values", r.value->values()}};
    }
    j["parameters"] = std::move(params);
    return j;
}

inline PaaiModel model_from_json(const json& j) {
    if (j.value("format", "") != "paai-model") throw Error("not a model checkpoint");
    const ModelKind kind = model_kind_from_string(j.at("kind").get<std::string>());
    NetworkShape shape;
    shape.window = j.at("shape").at("window").get<std::size_t>();
    shape.hidden = j.at("shape").at("hidden").get<std::size_t>();
    shape.attention = j.at("shape").at("attention").get<std::size_t>();
    shape.head_hidden = j.at("shape").at("head_hidden").get<std::size_t>();
    ClassicParams base = OvrvParams{};
    if (kind != ModelKind::baseline_ai) base = classic_from_json(j.at("base"));
    PaaiModel m = PaaiModel::create(kind, base, shape);
    m.phase = phase_from_json(j.at("phase"));
    m.loss = loss_from_json(j.at("loss"));
    m.accel_min = j.at("accel_bounds").at(0).get<double>();
    m.accel_max = j.at("accel_bounds").at(1).get<double>();
    m.dt = j.at("dt").get<double>();
    m.norm.mean = j.at("normalizer").at("mean").get<std::vector<double>>();
    m.norm.scale = j.at("normalizer").at("scale").get<std::vector<double>>();
    if (m.norm.mean.size() != m.n_features() || m.norm.scale.size() != m.n_features()) {
        throw Error("checkpoint normalizer has the wrong feature count");
    }
    NetworkParams scratch = m.net;
    const auto& params = j.at("parameters");
    for (const auto& r : m.net.refs(scratch)) {
        if (!params.contains(r.name)) throw Error("checkpoint is missing parameter '" + r.name + "'");
        const auto& p = params.at(r.name);
        if (p.at("shape").get<std::vector<std::size_t>>() != r.value->shape()) {
            throw Error("checkpoint parameter '" + r.name + "' has the wrong shape");
        }
        const auto values = p.at("values").get<std::vector<double>>();
        r.value->values().assign(values.begin(), values.end());
        if (r.value->values().size() != nn::Tensor::count(r.value->shape())) {
            throw Error("checkpoint parameter '" + r.name + "' has the wrong size");
        }
    }
    return m;
}

inline json to_json(const std::vector<EpochRecord>& history) {
    json out = json::array();
    for (const auto& r : history) {
        out.push_back({{"epoch", r.epoch},
                       {"weights", to_json(r.weights)},
                       {"train_loss", r.train_loss},
                       {"validation_loss", r.validation_loss},
                       {"best_validation_loss", r.best_validation_loss}});
    }
    return out;
}

/// Model checkpoint plus training metadata.
inline json checkpoint_json(const TrainResult& r, std::uint64_t seed) {
    json j = to_json(r.model);
    j["training"] = {{"seed", seed},
                     {"best_epoch", r.best_epoch},
                     {"best_validation_loss", r.best_validation_loss},
                     {"stopped_early", r.stopped_early},
                     {"history", to_json(r.history)}};
    return j;
}

inline void save_model(const std::string& path, const PaaiModel& m) { write_json_file(path, to_json(m)); }

inline PaaiModel load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Manifests: anything `--model` can point at.

/// Ensemble manifest; member paths are relative to the manifest's directory.
inline json ensemble_manifest(ModelKind kind, const std::vector<std::string>& member_files) {
    return json{{"format", "paai-ensemble"}, {"kind", to_string(kind)}, {"aggregation", "mean"},
                {"members", member_files}};
}

struct LoadedModel {
    std::string name;
    AnyPredictor predictor;
    std::vector<std::shared_ptr<const PaaiModel>> members;  // empty for classical models
    std::optional<ClassicParams> classic;
    std::vector<std::string> files;  // every file read, manifest first
};

inline LoadedModel load_model_manifest(const std::string& path) {
    const json j = read_json_file(path);
    const std::string format = j.value("format", "");
    LoadedModel out;
    out.files.push_back(path);
    if (format == "paai-calibration") {
        out.classic = classic_from_json(j);
        out.name = j.at("kind").get<std::string>();
        out.predictor = make_classic_predictor(*out.classic);
        return out;
    }
    if (format == "paai-model") {
        auto m = std::make_shared<const PaaiModel>(model_from_json(j));
        out.name = to_string(m->kind);
        out.members.push_back(m);
        out.predictor = AnyPredictor::from(ModelPredictor(m));
        return out;
    }
    if (format == "paai-ensemble") {
        const auto dir = std::filesystem::path(path).parent_path();
        for (const auto& f : j.at("members")) {
            out.files.push_back((dir / f.get<std::string>()).string());
            out.members.push_back(std::make_shared<const PaaiModel>(load_model(out.files.back())));
        }
        if (out.members.empty()) throw Error("ensemble manifest '" + path + "' lists no members");
        out.name = j.at("kind").get<std::string>();
        for (const auto& m : out.members) {
            if (to_string(m->kind) != out.name) throw Error("ensemble member kind does not match manifest");
        }
        out.predictor = AnyPredictor::from(EnsemblePredictor(out.members));
        return out;
    }
    throw Error("'" + path + "' is not a model, ensemble or calibration file");
}

}  // namespace paai
