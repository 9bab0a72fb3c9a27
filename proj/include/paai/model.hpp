#pragma once

// The two learned car-following models.
//
//   Baseline AI:  a_hat = clamp(head(attend(LSTM(x))))
//   PAAI:         a_hat = clamp(a_base + w a_acc + (1 - w) a_dec)
//
// where a_acc and a_dec come from two attention streams over a shared LSTM,
// each followed by its own dense head, and w is the phase weight of the
// current step. Per-step inputs are (v, s, dv, m_s) plus a_base for PAAI,
// standardized with statistics of the training record.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "paai/calibration.hpp"
#include "paai/car_following.hpp"
#include "paai/ingest.hpp"
#include "paai/loss.hpp"
#include "paai/nn/attention.hpp"
#include "paai/nn/dense_head.hpp"
#include "paai/nn/lstm.hpp"
#include "paai/nn/tensor.hpp"
#include "paai/phase.hpp"

namespace paai {

enum class ModelKind { baseline_ai, ovrv_paai, idm_paai };

inline std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::baseline_ai: return "baseline-ai";
        case ModelKind::ovrv_paai: return "ovrv-paai";
        case ModelKind::idm_paai: return "idm-paai";
    }
    return "baseline-ai";
}

inline ModelKind model_kind_from_string(const std::string& name) {
    if (name == "baseline-ai") return ModelKind::baseline_ai;
    if (name == "ovrv-paai") return ModelKind::ovrv_paai;
    if (name == "idm-paai") return ModelKind::idm_paai;
    throw std::invalid_argument("unknown learned model '" + name + "'");
}

inline BaseKind base_of(ModelKind kind) {
    switch (kind) {
        case ModelKind::ovrv_paai: return BaseKind::ovrv;
        case ModelKind::idm_paai: return BaseKind::idm;
        case ModelKind::baseline_ai: break;
    }
    return BaseKind::none;
}

/// Loss setup for each learned model: smooth-L1 with variance regularization
/// and s_safe = 1.2 v + 2 for Baseline AI / OVRV-PAAI, squared error with MAE
/// regularization and s_safe = v for IDM-PAAI. PAAI weights move linearly
/// from (0.6, 0.3, 0.1) to (0.4, 0.5, 0.1) over training.
inline LossConfig default_loss(ModelKind kind) {
    LossConfig cfg;
    if (kind == ModelKind::baseline_ai) {
        return cfg;
    }
    cfg.start = {0.6, 0.3, 0.1};
    cfg.end = {0.4, 0.5, 0.1};
    if (kind == ModelKind::idm_paai) {
        cfg.acc = AccLossKind::mse;
        cfg.reg = RegKind::mae;
        cfg.safe_c1 = 1.0;
        cfg.safe_c0 = 0.0;
    }
    return cfg;
}

struct NetworkShape {
    std::size_t window = 30;
    std::size_t hidden = 32;
    std::size_t attention = 16;
    std::size_t head_hidden = 16;
};

struct Normalizer {
    std::vector<double> mean;
    std::vector<double> scale;
};

struct NetworkParams {
    nn::LstmParams lstm;
    std::vector<nn::AttentionParams> attention;
    std::vector<nn::HeadParams> heads;

    static NetworkParams zeros(std::size_t n_features, const NetworkShape& shape, std::size_t streams) {
        NetworkParams p;
        p.lstm = nn::LstmParams::zeros(n_features, shape.hidden);
        for (std::size_t k = 0; k < streams; ++k) {
            p.attention.push_back(nn::AttentionParams::zeros(shape.hidden, shape.attention));
            p.heads.push_back(nn::HeadParams::zeros(shape.hidden, shape.head_hidden));
        }
        return p;
    }

    template <class Rng>
    void init_uniform(Rng& rng) {
        lstm.init_uniform(rng);
        for (auto& a : attention) a.init_uniform(rng);
        for (auto& h : heads) h.init_uniform(rng);
    }

    static std::string stream_name(std::size_t k, std::size_t streams) {
        if (streams == 1) return "";
        return k == 0 ? ".acc" : ".dec";
    }

    /// Parameter/gradient pairs in a fixed order; `grad` must be shaped like *this.
    std::vector<nn::ParamRef> refs(NetworkParams& grad) {
        std::vector<nn::ParamRef> out;
        lstm.append_refs(out, grad.lstm, "lstm");
        for (std::size_t k = 0; k < attention.size(); ++k) {
            attention[k].append_refs(out, grad.attention[k], "attention" + stream_name(k, attention.size()));
        }
        for (std::size_t k = 0; k < heads.size(); ++k) {
            heads[k].append_refs(out, grad.heads[k], "head" + stream_name(k, heads.size()));
        }
        return out;
    }

    std::vector<const nn::Tensor*> tensors() const {
        std::vector<const nn::Tensor*> out{&lstm.w_x, &lstm.w_h, &lstm.b};
        for (const auto& a : attention) {
            for (const auto* t : {&a.w_b, &a.b_b, &a.w_a, &a.b_a}) out.push_back(t);
        }
        for (const auto& h : heads) {
            for (const auto* t : {&h.w_mid, &h.b_mid, &h.w_out, &h.b_out}) out.push_back(t);
        }
        return out;
    }

    std::vector<nn::Tensor*> tensors() {
        std::vector<nn::Tensor*> out;
        for (const auto* t : std::as_const(*this).tensors()) out.push_back(const_cast<nn::Tensor*>(t));
        return out;
    }

    double squared_norm() const {
        double acc = 0.0;
        for (const auto* t : tensors()) acc += t->squared_norm();
        return acc;
    }

    void fill(double x) {
        for (auto* t : tensors()) t->fill(x);
    }
};

struct PaaiModel {
    ModelKind kind = ModelKind::ovrv_paai;
    ClassicParams base = OvrvParams{};
    PhaseConfig phase;
    LossConfig loss;
    NetworkShape shape;
    Normalizer norm;
    NetworkParams net;
    double accel_min = -5.0;
    double accel_max = 3.0;
    double dt = 0.1;

    bool has_base() const noexcept { return kind != ModelKind::baseline_ai; }
    std::size_t n_features() const noexcept { return has_base() ? 5 : 4; }
    std::size_t streams() const noexcept { return has_base() ? 2 : 1; }

    double base_accel(const CfState& st) const {
        if (!has_base()) return 0.0;
        if (const auto* p = std::get_if<OvrvParams>(&base)) return ovrv_accel(*p, st);
        return idm_accel(std::get<IdmParams>(base), st);
    }

    /// Model with an all-zero network and identity normalization.
    static PaaiModel create(ModelKind kind, ClassicParams base, NetworkShape shape = {}) {
        PaaiModel m;
        m.kind = kind;
        m.shape = shape;
        m.loss = default_loss(kind);
        if (kind == ModelKind::ovrv_paai) {
            detail::require(std::holds_alternative<OvrvParams>(base), "PaaiModel: OVRV-PAAI needs OVRV parameters");
        } else if (kind == ModelKind::idm_paai) {
            detail::require(std::holds_alternative<IdmParams>(base), "PaaiModel: IDM-PAAI needs IDM parameters");
        }
        m.base = base;
        m.norm.mean.assign(m.n_features(), 0.0);
        m.norm.scale.assign(m.n_features(), 1.0);
        m.net = NetworkParams::zeros(m.n_features(), shape, m.streams());
        return m;
    }
};

/// Raw (unnormalized) per-step inputs: v, s, dv, m_s, then a_base for PAAI.
inline void raw_features(const PaaiModel& m, const CfState& st, std::span<double> out) {
    out[0] = st.v;
    out[1] = st.s;
    out[2] = st.dv();
    out[3] = safety_margin(st.s, st.v, m.phase);
    if (m.has_base()) out[4] = m.base_accel(st);
}

/// Fits per-feature mean / population std on a record. Features with zero
/// spread keep scale 1.
inline Normalizer fit_normalizer(const PaaiModel& m, const Trajectory& traj) {
    const std::size_t f = m.n_features();
    Normalizer norm{std::vector<double>(f, 0.0), std::vector<double>(f, 0.0)};
    std::vector<double> row(f);
    const auto n = static_cast<double>(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
        raw_features(m, CfState{traj.s[i], traj.v[i], traj.v_l[i]}, row);
        for (std::size_t k = 0; k < f; ++k) norm.mean[k] += row[k] / n;
    }
    for (std::size_t i = 0; i < traj.size(); ++i) {
        raw_features(m, CfState{traj.s[i], traj.v[i], traj.v_l[i]}, row);
        for (std::size_t k = 0; k < f; ++k) norm.scale[k] += (row[k] - norm.mean[k]) * (row[k] - norm.mean[k]) / n;
    }
    for (double& s : norm.scale) s = s > 1e-24 ? std::sqrt(s) : 1.0;
    return norm;
}

inline void normalized_features(const PaaiModel& m, const CfState& st, std::span<double> out) {
    raw_features(m, st, out);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = (out[k] - m.norm.mean[k]) / m.norm.scale[k];
}

/// Raw feature rows for s consecutive steps (s x n_features).
struct FeatureWindow {
    nn::Tensor features;
};

inline FeatureWindow make_window(const PaaiModel& m, std::span<const CfState> history) {
    detail::require(!history.empty(), "make_window: empty history");
    const std::size_t S = m.shape.window;
    const std::size_t f = m.n_features();
    FeatureWindow w{nn::Tensor({S, f})};
    for (std::size_t k = 0; k < S; ++k) {
        // Steps before the start of the history repeat the earliest state.
        const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(history.size()) - static_cast<std::ptrdiff_t>(S) +
                                   static_cast<std::ptrdiff_t>(k);
        const CfState& st = history[static_cast<std::size_t>(std::max<std::ptrdiff_t>(idx, 0))];
        raw_features(m, st, std::span<double>(w.features.values().data() + k * f, f));
    }
    return w;
}

// ---------------------------------------------------------------------------
// Batched forward / backward.

struct ForwardCache {
    nn::LstmCache lstm;
    nn::Sequence hs;
    std::vector<nn::AttentionCache> attention;
    std::vector<nn::HeadCache> heads;
};

struct ForwardResult {
    std::vector<Eigen::VectorXd> head_out;  // per stream, B entries
    Eigen::VectorXd a_base;
    Eigen::VectorXd w_phase;
    Eigen::VectorXd a_nn;
    Eigen::VectorXd unclamped;
    Eigen::VectorXd a_hat;
};

/// `x` holds normalized inputs (one B x F matrix per window step);
/// `current` is the state at the last window step of each sample.
/// `forced_phase` overrides the phase rule (tests and diagnostics).
inline ForwardResult forward_batch(const PaaiModel& m, const nn::Sequence& x, std::span<const CfState> current,
                                   ForwardCache* cache = nullptr, std::optional<double> forced_phase = std::nullopt) {
    detail::require(x.size() == m.shape.window, "forward_batch: window length mismatch");
    const auto B = static_cast<Eigen::Index>(current.size());
    detail::require(x.front().rows() == B, "forward_batch: batch size mismatch");

    ForwardResult out;
    nn::LstmCache* lstm_cache = cache ? &cache->lstm : nullptr;
    nn::Sequence hs = nn::lstm_forward(m.net.lstm, x, lstm_cache);
    if (cache) {
        cache->attention.assign(m.streams(), {});
        cache->heads.assign(m.streams(), {});
    }
    for (std::size_t k = 0; k < m.streams(); ++k) {
        const auto att = nn::attention(m.net.attention[k], hs, cache ? &cache->attention[k] : nullptr);
        out.head_out.push_back(nn::dense_head(m.net.heads[k], att.h_att, cache ? &cache->heads[k] : nullptr));
    }
    if (cache) cache->hs = std::move(hs);

    out.a_base = Eigen::VectorXd::Zero(B);
    out.w_phase = Eigen::VectorXd::Ones(B);
    if (m.has_base()) {
        for (Eigen::Index b = 0; b < B; ++b) {
            const CfState& st = current[static_cast<std::size_t>(b)];
            out.a_base(b) = m.base_accel(st);
            out.w_phase(b) = forced_phase ? *forced_phase
                                          : phase_weight(st.dv(), safety_margin(st.s, st.v, m.phase), m.phase);
        }
        out.a_nn.resize(B);
        for (Eigen::Index b = 0; b < B; ++b) {
            out.a_nn(b) = blend_corrections(out.w_phase(b), out.head_out[0](b), out.head_out[1](b));
        }
        out.unclamped = out.a_base + out.a_nn;
    } else {
        out.a_nn = out.head_out[0];
        out.unclamped = out.a_nn;
    }
    out.a_hat = out.unclamped.cwiseMax(m.accel_min).cwiseMin(m.accel_max);
    nn::check_finite(out.a_hat, "output.a_hat");
    return out;
}

/// Reverse pass from dL/da_hat. Gradients accumulate into `grad`; the output
/// clamp passes no gradient where it is active.
inline void backward_batch(const PaaiModel& m, const ForwardCache& cache, const ForwardResult& fwd,
                           const Eigen::VectorXd& d_ahat, NetworkParams& grad) {
    const Eigen::Index B = d_ahat.size();
    Eigen::VectorXd d_out(B);
    for (Eigen::Index b = 0; b < B; ++b) {
        const double u = fwd.unclamped(b);
        d_out(b) = (u < m.accel_min || u > m.accel_max) ? 0.0 : d_ahat(b);
    }
    nn::check_finite(d_out, "output.d_ahat");

    nn::Sequence dhs(cache.hs.size(), nn::Matrix::Zero(B, static_cast<Eigen::Index>(m.shape.hidden)));
    for (std::size_t k = 0; k < m.streams(); ++k) {
        Eigen::VectorXd d_head = d_out;
        if (m.has_base()) {
            d_head = k == 0 ? Eigen::VectorXd(d_out.cwiseProduct(fwd.w_phase))
                            : Eigen::VectorXd(d_out.cwiseProduct((1.0 - fwd.w_phase.array()).matrix()));
        }
        const nn::Matrix dh_att = nn::dense_head_backward(m.net.heads[k], cache.heads[k], d_head, grad.heads[k]);
        nn::attention_backward(m.net.attention[k], cache.attention[k], cache.hs, dh_att, grad.attention[k], dhs);
    }
    nn::lstm_backward(m.net.lstm, cache.lstm, dhs, grad.lstm);
}

/// Single prediction from a raw feature window and the current state.
inline double predict(const PaaiModel& m, const FeatureWindow& window, const CfState& st) {
    const std::size_t f = m.n_features();
    detail::require(window.features.rows() == m.shape.window && window.features.cols() == f,
                    "predict: window shape mismatch");
    nn::Sequence x;
    x.reserve(m.shape.window);
    for (std::size_t k = 0; k < m.shape.window; ++k) {
        nn::Matrix row(1, static_cast<Eigen::Index>(f));
        for (std::size_t j = 0; j < f; ++j) {
            row(0, static_cast<Eigen::Index>(j)) = (window.features[k * f + j] - m.norm.mean[j]) / m.norm.scale[j];
        }
        x.push_back(std::move(row));
    }
    const CfState current[1] = {st};
    const auto out = forward_batch(m, x, current);
    if (!std::isfinite(out.a_hat(0))) {
        throw NonFiniteError("output.a_hat");
    }
    return out.a_hat(0);
}

/// Closed-loop adapter: builds the window from the state history.
class ModelPredictor {
public:
    explicit ModelPredictor(std::shared_ptr<const PaaiModel> model) : m_model(std::move(model)) {}

    double accel(std::span<const CfState> history) const {
        return predict(*m_model, make_window(*m_model, history), history.back());
    }

    const PaaiModel& model() const noexcept { return *m_model; }

private:
    std::shared_ptr<const PaaiModel> m_model;
};

/// Arithmetic mean of member predictions.
class EnsemblePredictor {
public:
    explicit EnsemblePredictor(std::vector<std::shared_ptr<const PaaiModel>> members) : m_members(std::move(members)) {
        detail::require(!m_members.empty(), "EnsemblePredictor: need at least one member");
    }

    double accel(std::span<const CfState> history) const {
        double acc = 0.0;
        for (const auto& m : m_members) acc += predict(*m, make_window(*m, history), history.back());
        return acc / static_cast<double>(m_members.size());
    }

    std::size_t size() const noexcept { return m_members.size(); }

private:
    std::vector<std::shared_ptr<const PaaiModel>> m_members;
};

inline double ensemble_mean(std::span<const double> predictions) {
    detail::require(!predictions.empty(), "ensemble_mean: no predictions");
    double acc = 0.0;
    for (double p : predictions) acc += p;
    return acc / static_cast<double>(predictions.size());
}

}  // namespace paai
