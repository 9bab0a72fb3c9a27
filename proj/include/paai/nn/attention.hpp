#pragma once

// Additive temporal attention over LSTM hidden states:
//   e_t = W_a ReLU(W_b h_t + b_b) + b_a,  w = softmax_t(e),  h_att = sum_t w_t h_t.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "paai/nn/lstm.hpp"
#include "paai/nn/tensor.hpp"

namespace paai::nn {

struct AttentionParams {
    Tensor w_b;  // A x H
    Tensor b_b;  // A
    Tensor w_a;  // 1 x A
    Tensor b_a;  // 1

    static AttentionParams zeros(std::size_t hidden_size, std::size_t attention_size) {
        return AttentionParams{Tensor({attention_size, hidden_size}), Tensor({attention_size}),
                               Tensor({1, attention_size}), Tensor({1})};
    }

    std::size_t hidden_size() const noexcept { return w_b.cols(); }
    std::size_t attention_size() const noexcept { return w_b.rows(); }

    template <class Rng>
    void init_uniform(Rng& rng) {
        const double bound_b = 1.0 / std::sqrt(static_cast<double>(hidden_size()));
        const double bound_a = 1.0 / std::sqrt(static_cast<double>(attention_size()));
        uniform_fill(w_b, bound_b, rng);
        uniform_fill(b_b, bound_b, rng);
        uniform_fill(w_a, bound_a, rng);
        uniform_fill(b_a, bound_a, rng);
    }

    void append_refs(std::vector<ParamRef>& out, AttentionParams& grad, const std::string& prefix) {
        out.push_back({prefix + ".w_b", &w_b, &grad.w_b});
        out.push_back({prefix + ".b_b", &b_b, &grad.b_b});
        out.push_back({prefix + ".w_a", &w_a, &grad.w_a});
        out.push_back({prefix + ".b_a", &b_a, &grad.b_a});
    }
};

struct AttentionOutput {
    Matrix weights;  // B x S, rows sum to 1
    Matrix h_att;    // B x H
};

struct AttentionCache {
    Sequence z;  // pre-ReLU scores input, B x A per step
    AttentionOutput out;
};

/// Softmax along each row with max subtraction.
inline Matrix softmax_rows(const Matrix& scores) {
    Matrix out(scores.rows(), scores.cols());
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const double peak = scores.row(r).maxCoeff();
        out.row(r) = (scores.row(r).array() - peak).exp().matrix();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

inline AttentionOutput attention(const AttentionParams& p, const Sequence& hs, AttentionCache* cache = nullptr) {
    detail::require(!hs.empty(), "attention: empty sequence");
    const Eigen::Index batch = hs.front().rows();
    const auto steps = static_cast<Eigen::Index>(hs.size());
    const auto wb = p.w_b.matrix();
    const auto wa = p.w_a.matrix();
    Matrix scores(batch, steps);
    if (cache) cache->z.clear();
    for (Eigen::Index t = 0; t < steps; ++t) {
        const Matrix& h = hs[static_cast<std::size_t>(t)];
        detail::require(static_cast<std::size_t>(h.cols()) == p.hidden_size() && h.rows() == batch,
                        "attention: hidden state shape mismatch");
        Matrix z = h * wb.transpose();
        z.rowwise() += p.b_b.row();
        scores.col(t) = (z.cwiseMax(0.0) * wa.transpose()).col(0).array() + p.b_a[0];
        if (cache) cache->z.push_back(std::move(z));
    }
    AttentionOutput out;
    out.weights = softmax_rows(scores);
    out.h_att = Matrix::Zero(batch, static_cast<Eigen::Index>(p.hidden_size()));
    for (Eigen::Index t = 0; t < steps; ++t) {
        out.h_att += (hs[static_cast<std::size_t>(t)].array().colwise() * out.weights.col(t).array()).matrix();
    }
    check_finite(out.h_att, "attention.h_att");
    if (cache) cache->out = out;
    return out;
}

/// Accumulates parameter gradients into `grad` and adds dL/dh_t into `dhs`.
inline void attention_backward(const AttentionParams& p, const AttentionCache& cache, const Sequence& hs,
                               const Matrix& dh_att, AttentionParams& grad, Sequence& dhs) {
    const Eigen::Index batch = dh_att.rows();
    const auto steps = static_cast<Eigen::Index>(hs.size());
    const Matrix& w = cache.out.weights;

    Matrix dw(batch, steps);
    for (Eigen::Index t = 0; t < steps; ++t) {
        dw.col(t) = (hs[static_cast<std::size_t>(t)].array() * dh_att.array()).rowwise().sum().matrix();
    }
    const Eigen::VectorXd weighted = (w.array() * dw.array()).rowwise().sum().matrix();
    const Matrix de = (w.array() * (dw.colwise() - weighted).array()).matrix();
    check_finite(de, "attention.de");

    const auto wb = p.w_b.matrix();
    const auto wa = p.w_a.matrix();
    auto dwb = grad.w_b.matrix();
    auto dwa = grad.w_a.matrix();
    for (Eigen::Index t = 0; t < steps; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        const Matrix& z = cache.z[ts];
        const Matrix r = z.cwiseMax(0.0);
        const Eigen::VectorXd de_t = de.col(t);
        dwa.noalias() += de_t.transpose() * r;
        grad.b_a[0] += de_t.sum();
        const Matrix dz = ((de_t * wa).array() * (z.array() > 0.0).cast<double>()).matrix();
        dwb.noalias() += dz.transpose() * hs[ts];
        grad.b_b.row() += dz.colwise().sum();
        dhs[ts].noalias() += dz * wb;
        dhs[ts] += (dh_att.array().colwise() * w.col(t).array()).matrix();
    }
}

}  // namespace paai::nn
