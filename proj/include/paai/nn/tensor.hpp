#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "paai/error.hpp"

namespace paai::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Storage aligned like Eigen's own heap blocks, so vectorized reductions
/// over a tensor do not depend on where it was allocated.
using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

/// Dense float64 array, row-major. 1-D tensors are treated as column
/// vectors by matrix(), and as row vectors by row().
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : m_shape(std::move(shape)), m_values(count(m_shape), fill) {}

    Tensor(std::vector<std::size_t> shape, const std::vector<double>& values)
        : m_shape(std::move(shape)), m_values(values.begin(), values.end()) {
        detail::require(m_values.size() == count(m_shape), "Tensor: value count does not match shape");
    }

    const std::vector<std::size_t>& shape() const noexcept { return m_shape; }
    std::size_t size() const noexcept { return m_values.size(); }
    std::size_t rank() const noexcept { return m_shape.size(); }
    std::size_t rows() const noexcept { return m_shape.empty() ? 0 : m_shape[0]; }
    std::size_t cols() const noexcept { return m_shape.size() < 2 ? 1 : m_shape[1]; }

    Storage& values() noexcept { return m_values; }
    const Storage& values() const noexcept { return m_values; }
    double& operator[](std::size_t i) noexcept { return m_values[i]; }
    double operator[](std::size_t i) const noexcept { return m_values[i]; }

    Eigen::Map<Matrix> matrix() {
        return {m_values.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
    }
    Eigen::Map<const Matrix> matrix() const {
        return {m_values.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
    }
    Eigen::Map<RowVector> row() { return {m_values.data(), static_cast<Eigen::Index>(size())}; }
    Eigen::Map<const RowVector> row() const { return {m_values.data(), static_cast<Eigen::Index>(size())}; }

    void fill(double x) { std::fill(m_values.begin(), m_values.end(), x); }

    bool all_finite() const noexcept {
        for (double x : m_values) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    }

    double squared_norm() const noexcept {
        double acc = 0.0;
        for (double x : m_values) acc += x * x;
        return acc;
    }

    bool same_shape(const Tensor& other) const noexcept { return m_shape == other.m_shape; }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    }

private:
    std::vector<std::size_t> m_shape;
    Storage m_values;
};

/// Uniform(-bound, bound) fill.
template <class Rng>
void uniform_fill(Tensor& t, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : t.values()) x = dist(rng);
}

template <class M>
    requires requires(const M& m) { m.allFinite(); }
void check_finite(const M& m, const char* node) {
    if (!m.allFinite()) {
        throw NonFiniteError(node);
    }
}

inline void check_finite(const Tensor& t, const std::string& node) {
    if (!t.all_finite()) {
        throw NonFiniteError(node);
    }
}

/// A named learnable tensor and its gradient buffer.
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
};

// Linear map y = W x (single vector), with its reverse-mode rule
// dW += dy x^T, dx = W^T dy.
inline Vector matvec(const Tensor& w, const Vector& x) {
    detail::require(static_cast<std::size_t>(x.size()) == w.cols(), "matvec: shape mismatch");
    return w.matrix() * x;
}

inline Vector matvec_backward(const Tensor& w, const Vector& x, const Vector& dy, Tensor& dw) {
    detail::require(dw.same_shape(w), "matvec_backward: gradient shape mismatch");
    dw.matrix().noalias() += dy * x.transpose();
    return w.matrix().transpose() * dy;
}

inline double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace paai::nn
