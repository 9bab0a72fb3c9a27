#pragma once

// Two-layer regression head: y = W_out ReLU(W_mid x + b_mid) + b_out.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "paai/nn/tensor.hpp"

namespace paai::nn {

struct HeadParams {
    Tensor w_mid;  // M x H
    Tensor b_mid;  // M
    Tensor w_out;  // 1 x M
    Tensor b_out;  // 1

    static HeadParams zeros(std::size_t input_size, std::size_t mid_size) {
        return HeadParams{Tensor({mid_size, input_size}), Tensor({mid_size}), Tensor({1, mid_size}), Tensor({1})};
    }

    std::size_t input_size() const noexcept { return w_mid.cols(); }
    std::size_t mid_size() const noexcept { return w_mid.rows(); }

    template <class Rng>
    void init_uniform(Rng& rng) {
        const double bound_mid = 1.0 / std::sqrt(static_cast<double>(input_size()));
        const double bound_out = 1.0 / std::sqrt(static_cast<double>(mid_size()));
        uniform_fill(w_mid, bound_mid, rng);
        uniform_fill(b_mid, bound_mid, rng);
        uniform_fill(w_out, bound_out, rng);
        uniform_fill(b_out, bound_out, rng);
    }

    void append_refs(std::vector<ParamRef>& out, HeadParams& grad, const std::string& prefix) {
        out.push_back({prefix + ".w_mid", &w_mid, &grad.w_mid});
        out.push_back({prefix + ".b_mid", &b_mid, &grad.b_mid});
        out.push_back({prefix + ".w_out", &w_out, &grad.w_out});
        out.push_back({prefix + ".b_out", &b_out, &grad.b_out});
    }
};

struct HeadCache {
    Matrix x;
    Matrix z;  // pre-ReLU, B x M
};

/// Batched: x is B x H, result has B entries.
inline Eigen::VectorXd dense_head(const HeadParams& p, const Matrix& x, HeadCache* cache = nullptr) {
    detail::require(static_cast<std::size_t>(x.cols()) == p.input_size(), "dense_head: shape mismatch");
    Matrix z = x * p.w_mid.matrix().transpose();
    z.rowwise() += p.b_mid.row();
    Eigen::VectorXd y = (z.cwiseMax(0.0) * p.w_out.matrix().transpose()).col(0);
    y.array() += p.b_out[0];
    check_finite(y, "head.out");
    if (cache) {
        cache->x = x;
        cache->z = std::move(z);
    }
    return y;
}

inline double dense_head(const HeadParams& p, const Tensor& h_att) {
    detail::require(h_att.size() == p.input_size(), "dense_head: shape mismatch");
    return dense_head(p, Matrix(h_att.row()))(0);
}

/// Returns dL/dx (B x H); parameter gradients accumulate into `grad`.
inline Matrix dense_head_backward(const HeadParams& p, const HeadCache& cache, const Eigen::VectorXd& dy,
                                  HeadParams& grad) {
    const Matrix r = cache.z.cwiseMax(0.0);
    grad.w_out.matrix().noalias() += dy.transpose() * r;
    grad.b_out[0] += dy.sum();
    const Matrix dz = ((dy * p.w_out.matrix()).array() * (cache.z.array() > 0.0).cast<double>()).matrix();
    grad.w_mid.matrix().noalias() += dz.transpose() * cache.x;
    grad.b_mid.row() += dz.colwise().sum();
    Matrix dx = dz * p.w_mid.matrix();
    check_finite(dx, "head.dx");
    return dx;
}

}  // namespace paai::nn
