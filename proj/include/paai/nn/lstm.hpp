#pragma once

// Single-layer LSTM over a batch of equal-length sequences, zero initial
// state. Gate blocks in the stacked weights are ordered input, forget,
// cell candidate, output.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "paai/nn/tensor.hpp"

namespace paai::nn {

/// One B x F matrix per time step.
using Sequence = std::vector<Matrix>;

struct LstmParams {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    Tensor w_x;  // 4H x I
    Tensor w_h;  // 4H x H
    Tensor b;    // 4H

    static LstmParams zeros(std::size_t input_size, std::size_t hidden_size) {
        LstmParams p;
        p.input_size = input_size;
        p.hidden_size = hidden_size;
        p.w_x = Tensor({4 * hidden_size, input_size});
        p.w_h = Tensor({4 * hidden_size, hidden_size});
        p.b = Tensor({4 * hidden_size});
        return p;
    }

    template <class Rng>
    void init_uniform(Rng& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
        uniform_fill(w_x, bound, rng);
        uniform_fill(w_h, bound, rng);
        uniform_fill(b, bound, rng);
    }

    void append_refs(std::vector<ParamRef>& out, LstmParams& grad, const std::string& prefix) {
        out.push_back({prefix + ".w_x", &w_x, &grad.w_x});
        out.push_back({prefix + ".w_h", &w_h, &grad.w_h});
        out.push_back({prefix + ".b", &b, &grad.b});
    }
};

struct LstmCache {
    Sequence x;
    Sequence i, f, g, o;  // gate activations
    Sequence c;           // c[t] after step t
    Sequence tanh_c;
    Sequence h;           // h[t] after step t
};

inline Sequence lstm_forward(const LstmParams& p, const Sequence& xs, LstmCache* cache = nullptr) {
    detail::require(!xs.empty(), "lstm_forward: empty sequence");
    const auto H = static_cast<Eigen::Index>(p.hidden_size);
    const Eigen::Index batch = xs.front().rows();
    for (const auto& x : xs) {
        detail::require(static_cast<std::size_t>(x.cols()) == p.input_size && x.rows() == batch,
                        "lstm_forward: input shape mismatch");
    }
    const auto wx = p.w_x.matrix();
    const auto wh = p.w_h.matrix();
    const auto bias = p.b.row();

    Matrix h = Matrix::Zero(batch, H);
    Matrix c = Matrix::Zero(batch, H);
    Sequence hs;
    hs.reserve(xs.size());
    if (cache) {
        *cache = LstmCache{};
        cache->x = xs;
    }
    Matrix z(batch, 4 * H);
    for (const auto& x : xs) {
        z.noalias() = x * wx.transpose();
        z.noalias() += h * wh.transpose();
        z.rowwise() += bias;
        Matrix gi = z.middleCols(0, H).unaryExpr([](double u) { return sigmoid(u); });
        Matrix gf = z.middleCols(H, H).unaryExpr([](double u) { return sigmoid(u); });
        Matrix gg = z.middleCols(2 * H, H).array().tanh().matrix();
        Matrix go = z.middleCols(3 * H, H).unaryExpr([](double u) { return sigmoid(u); });
        c = (gf.array() * c.array() + gi.array() * gg.array()).matrix();
        Matrix tc = c.array().tanh().matrix();
        h = (go.array() * tc.array()).matrix();
        check_finite(h, "lstm.h");
        if (cache) {
            cache->i.push_back(std::move(gi));
            cache->f.push_back(std::move(gf));
            cache->g.push_back(std::move(gg));
            cache->o.push_back(std::move(go));
            cache->c.push_back(c);
            cache->tanh_c.push_back(std::move(tc));
            cache->h.push_back(h);
        }
        hs.push_back(h);
    }
    return hs;
}

/// Backpropagation through time. `dhs[t]` is dL/dh_t from downstream;
/// parameter gradients are accumulated into `grad`.
inline void lstm_backward(const LstmParams& p, const LstmCache& cache, const Sequence& dhs, LstmParams& grad) {
    const std::size_t steps = cache.h.size();
    detail::require(dhs.size() == steps, "lstm_backward: gradient sequence length mismatch");
    const auto H = static_cast<Eigen::Index>(p.hidden_size);
    const Eigen::Index batch = cache.h.front().rows();
    const auto wh = p.w_h.matrix();
    auto dwx = grad.w_x.matrix();
    auto dwh = grad.w_h.matrix();
    auto db = grad.b.row();

    Matrix dh_next = Matrix::Zero(batch, H);
    Matrix dc_next = Matrix::Zero(batch, H);
    Matrix dz(batch, 4 * H);
    for (std::size_t t = steps; t-- > 0;) {
        const Matrix dh = dhs[t] + dh_next;
        const auto& gi = cache.i[t].array();
        const auto& gf = cache.f[t].array();
        const auto& gg = cache.g[t].array();
        const auto& go = cache.o[t].array();
        const auto& tc = cache.tanh_c[t].array();
        const Matrix dc = (dh.array() * go * (1.0 - tc * tc) + dc_next.array()).matrix();
        const Matrix c_prev = t > 0 ? cache.c[t - 1] : Matrix(Matrix::Zero(batch, H));
        const Matrix h_prev = t > 0 ? cache.h[t - 1] : Matrix(Matrix::Zero(batch, H));

        dz.middleCols(0, H) = (dc.array() * gg * gi * (1.0 - gi)).matrix();
        dz.middleCols(H, H) = (dc.array() * c_prev.array() * gf * (1.0 - gf)).matrix();
        dz.middleCols(2 * H, H) = (dc.array() * gi * (1.0 - gg * gg)).matrix();
        dz.middleCols(3 * H, H) = (dh.array() * tc * go * (1.0 - go)).matrix();
        check_finite(dz, "lstm.dz");

        dwx.noalias() += dz.transpose() * cache.x[t];
        dwh.noalias() += dz.transpose() * h_prev;
        db += dz.colwise().sum();
        dh_next.noalias() = dz * wh;
        dc_next = (dc.array() * gf).matrix();
    }
}

/// Single-sequence convenience: x_seq is s x input_size, result s x hidden_size.
inline Tensor lstm_forward(const LstmParams& p, const Tensor& x_seq) {
    detail::require(x_seq.rank() == 2 && x_seq.cols() == p.input_size && x_seq.rows() >= 1,
                    "lstm_forward: x_seq must be s x input_size");
    Sequence xs;
    const auto x = x_seq.matrix();
    for (Eigen::Index t = 0; t < x.rows(); ++t) xs.push_back(x.row(t));
    const Sequence hs = lstm_forward(p, xs);
    Tensor out({x_seq.rows(), p.hidden_size});
    auto m = out.matrix();
    for (std::size_t t = 0; t < hs.size(); ++t) m.row(static_cast<Eigen::Index>(t)) = hs[t].row(0);
    return out;
}

}  // namespace paai::nn
