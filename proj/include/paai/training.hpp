#pragma once

// Window datasets, batched loss/gradient evaluation, and the AdamW training
// loop with early stopping on validation loss.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "paai/error.hpp"
#include "paai/ingest.hpp"
#include "paai/loss.hpp"
#include "paai/model.hpp"
#include "paai/nn/adamw.hpp"

namespace paai {

/// Every sample t in [0, n - 2] of one record: the window ending at t, the
/// state at t, the acceleration applied over [t, t + dt) and s(t + dt).
struct WindowDataset {
    std::size_t window = 0;
    std::size_t n_features = 0;
    double dt = 0.1;
    nn::Matrix features;  // n x F, normalized
    std::vector<CfState> states;
    std::vector<double> target;
    std::vector<double> next_spacing;

    std::size_t size() const noexcept { return target.size(); }
};

inline WindowDataset make_dataset(const PaaiModel& m, const Trajectory& traj) {
    detail::require(traj.size() >= 2, "make_dataset: need at least two samples");
    WindowDataset ds;
    ds.window = m.shape.window;
    ds.n_features = m.n_features();
    ds.dt = traj.dt;
    const std::size_t n = traj.size();
    ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(ds.n_features));
    ds.states.reserve(n);
    std::vector<double> row(ds.n_features);
    for (std::size_t i = 0; i < n; ++i) {
        ds.states.push_back(CfState{traj.s[i], traj.v[i], traj.v_l[i]});
        normalized_features(m, ds.states.back(), row);
        for (std::size_t k = 0; k < ds.n_features; ++k) {
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
        }
    }
    const auto fwd = traj.forward_accel();
    ds.target.assign(fwd.begin(), fwd.end() - 1);
    ds.next_spacing.assign(traj.s.begin() + 1, traj.s.end());
    return ds;
}

struct WindowBatch {
    nn::Sequence x;  // window steps, each B x F
    std::vector<CfState> current;
    std::vector<double> target;
    std::vector<double> speed;
    std::vector<double> next_spacing;
    double dt = 0.1;
};

inline WindowBatch make_batch(const WindowDataset& ds, std::span<const std::size_t> samples) {
    detail::require(!samples.empty(), "make_batch: empty batch");
    const auto B = static_cast<Eigen::Index>(samples.size());
    WindowBatch batch;
    batch.dt = ds.dt;
    batch.x.assign(ds.window, nn::Matrix(B, static_cast<Eigen::Index>(ds.n_features)));
    for (Eigen::Index b = 0; b < B; ++b) {
        const std::size_t t = samples[static_cast<std::size_t>(b)];
        for (std::size_t k = 0; k < ds.window; ++k) {
            const std::ptrdiff_t idx =
                static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(ds.window - 1 - k);
            batch.x[k].row(b) = ds.features.row(std::max<std::ptrdiff_t>(idx, 0));
        }
        batch.current.push_back(ds.states[t]);
        batch.target.push_back(ds.target[t]);
        batch.speed.push_back(ds.states[t].v);
        batch.next_spacing.push_back(ds.next_spacing[t]);
    }
    return batch;
}

/// Composite loss of one batch. With `grad` set, dL/dtheta (including the
/// L2 term) is accumulated into it.
inline LossBreakdown batch_loss(const PaaiModel& m, const WindowBatch& batch, const LossWeights& w,
                                NetworkParams* grad = nullptr, std::optional<double> forced_phase = std::nullopt) {
    ForwardCache cache;
    const ForwardResult fwd = forward_batch(m, batch.x, batch.current, grad ? &cache : nullptr, forced_phase);
    const std::vector<double> pred(fwd.a_hat.data(), fwd.a_hat.data() + fwd.a_hat.size());
    const LossBatch lb{pred, batch.target, batch.speed, batch.next_spacing, batch.dt};
    LossBreakdown loss = composite_loss(lb, m.loss, w, m.net.squared_norm());
    if (grad) {
        const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(loss.d_predicted.data(),
                                                                    static_cast<Eigen::Index>(loss.d_predicted.size()));
        backward_batch(m, cache, fwd, d, *grad);
        const auto params = m.net.tensors();
        const auto grads = grad->tensors();
        const double scale = w.gamma * m.loss.l2 * 2.0;
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto& g = grads[k]->values();
            const auto& p = params[k]->values();
            for (std::size_t i = 0; i < p.size(); ++i) g[i] += scale * p[i];
        }
    }
    return loss;
}

/// Mean loss over a whole dataset (no gradients), weighting batches by size.
inline double dataset_loss(const PaaiModel& m, const WindowDataset& ds, const LossWeights& w,
                           std::size_t batch_size = 256) {
    detail::require(ds.size() > 0, "dataset_loss: empty dataset");
    double acc = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
        const std::size_t end = std::min(ds.size(), start + batch_size);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        acc += batch_loss(m, make_batch(ds, idx), w).total * static_cast<double>(idx.size());
    }
    return acc / static_cast<double>(ds.size());
}

/// One-step (teacher-forced) predictions for every sample of a record.
inline std::vector<double> one_step_predictions(const PaaiModel& m, const WindowDataset& ds,
                                                std::size_t batch_size = 256) {
    std::vector<double> out;
    out.reserve(ds.size());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
        const std::size_t end = std::min(ds.size(), start + batch_size);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const auto batch = make_batch(ds, idx);
        const auto fwd = forward_batch(m, batch.x, batch.current);
        out.insert(out.end(), fwd.a_hat.data(), fwd.a_hat.data() + fwd.a_hat.size());
    }
    return out;
}

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t patience = 15;
    std::size_t batch_size = 64;
    std::uint64_t seed = 1;
    nn::AdamWOptions optimizer;
};

struct EpochRecord {
    std::size_t epoch = 0;
    LossWeights weights;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    double best_validation_loss = 0.0;
};

struct TrainResult {
    PaaiModel model;  // best-validation checkpoint
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_validation_loss = std::numeric_limits<double>::infinity();
    bool stopped_early = false;
};

/// Network initialized from `seed` and a normalizer fit on `train`.
inline PaaiModel initialize_model(ModelKind kind, ClassicParams base, const Trajectory& train, std::uint64_t seed,
                                  NetworkShape shape = {}) {
    PaaiModel m = PaaiModel::create(kind, base, shape);
    m.dt = train.dt;
    m.norm = fit_normalizer(m, train);
    std::mt19937_64 rng(seed);
    m.net.init_uniform(rng);
    return m;
}

/// Validation loss uses the final weights of the schedule so that scores
/// from different epochs are comparable.
inline TrainResult train(PaaiModel model, const DatasetSplit& split, const TrainConfig& cfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    detail::require(cfg.batch_size > 0, "train: batch size must be positive");
    TrainResult result;
    result.model = model;
    if (cfg.epochs == 0) return result;

    const WindowDataset train_ds = make_dataset(model, split.train);
    const WindowDataset val_ds = make_dataset(model, split.validation);
    const LossWeights val_weights = model.loss.weights_at(cfg.epochs - 1, cfg.epochs);

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    nn::AdamW opt(cfg.optimizer);
    NetworkParams grad = NetworkParams::zeros(model.n_features(), model.shape, model.streams());
    std::vector<std::size_t> order(train_ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::size_t since_best = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const LossWeights w = model.loss.weights_at(epoch, cfg.epochs);
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        try {
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                const auto batch = make_batch(train_ds, std::span(order).subspan(start, end - start));
                grad.fill(0.0);
                const auto loss = batch_loss(model, batch, w, &grad);
                if (!std::isfinite(loss.total)) throw NonFiniteError("loss");
                epoch_loss += loss.total * static_cast<double>(end - start);
                auto refs = model.net.refs(grad);
                opt.step(refs);
            }
        } catch (const NonFiniteError& e) {
            throw Error("training diverged at epoch " + std::to_string(epoch) + " (" + e.node() + ")");
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.weights = w;
        rec.train_loss = epoch_loss / static_cast<double>(train_ds.size());
        rec.validation_loss = dataset_loss(model, val_ds, val_weights);
        if (!std::isfinite(rec.validation_loss)) {
            throw Error("training diverged at epoch " + std::to_string(epoch) + " (validation loss)");
        }
        if (rec.validation_loss < result.best_validation_loss) {
            result.best_validation_loss = rec.validation_loss;
            result.best_epoch = epoch;
            result.model = model;
            since_best = 0;
        } else {
            ++since_best;
        }
        rec.best_validation_loss = result.best_validation_loss;
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (since_best >= cfg.patience) {
            result.stopped_early = true;
            break;
        }
    }
    return result;
}

struct EnsembleConfig {
    std::size_t members = 5;
    std::size_t threads = 1;
    NetworkShape shape;
    TrainConfig train;  // train.seed is the seed of member 0; member k uses seed + k
};

/// Trains independent members; results are ordered by member index.
inline std::vector<TrainResult> train_ensemble(ModelKind kind, const ClassicParams& base, const DatasetSplit& split,
                                               const EnsembleConfig& cfg) {
    detail::require(cfg.members > 0, "train_ensemble: need at least one member");
    std::vector<std::optional<TrainResult>> slots(cfg.members);
    std::vector<std::exception_ptr> errors(cfg.members);
    auto run_member = [&](std::size_t k) {
        try {
            TrainConfig tc = cfg.train;
            tc.seed = cfg.train.seed + k;
            slots[k] = train(initialize_model(kind, base, split.train, tc.seed, cfg.shape), split, tc);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(cfg.threads, 1, cfg.members);
    if (threads == 1) {
        for (std::size_t k = 0; k < cfg.members; ++k) run_member(k);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t k = w; k < cfg.members; k += threads) run_member(k);
            });
        }
    }
    std::vector<TrainResult> out;
    for (std::size_t k = 0; k < cfg.members; ++k) {
        if (errors[k]) std::rethrow_exception(errors[k]);
        out.push_back(std::move(*slots[k]));
    }
    return out;
}

}  // namespace paai
