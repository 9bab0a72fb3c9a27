#pragma once

// AdamW with decoupled weight decay:
//   p <- p - lr * wd * p
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps)

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "paai/nn/tensor.hpp"

namespace paai::nn {

struct AdamWOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

class AdamW {
public:
    AdamW() = default;
    explicit AdamW(AdamWOptions options) : m_options(options) {}

    const AdamWOptions& options() const noexcept { return m_options; }
    std::size_t step_count() const noexcept { return m_step; }

    /// Updates every `ref.value` in place from `ref.grad`. Moment buffers are
    /// created on the first call and must keep matching shapes afterwards.
    void step(std::span<const ParamRef> refs) {
        if (m_m.empty()) {
            for (const auto& r : refs) {
                m_m.emplace_back(r.value->shape());
                m_v.emplace_back(r.value->shape());
            }
        }
        detail::require(m_m.size() == refs.size(), "AdamW::step: parameter count changed");
        for (std::size_t k = 0; k < refs.size(); ++k) {
            detail::require(refs[k].value->same_shape(m_m[k]) && refs[k].grad->same_shape(m_m[k]),
                            "AdamW::step: shape mismatch");
        }

        ++m_step;
        const double lr = m_options.learning_rate;
        const double b1 = m_options.beta1;
        const double b2 = m_options.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(m_step));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(m_step));
        const double decay = 1.0 - lr * m_options.weight_decay;
        for (std::size_t k = 0; k < refs.size(); ++k) {
            auto& p = refs[k].value->values();
            const auto& g = refs[k].grad->values();
            auto& m = m_m[k].values();
            auto& v = m_v[k].values();
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                const double m_hat = m[i] / c1;
                const double v_hat = v[i] / c2;
                p[i] = p[i] * decay - lr * m_hat / (std::sqrt(v_hat) + m_options.epsilon);
            }
        }
    }

    void reset() {
        m_m.clear();
        m_v.clear();
        m_step = 0;
    }

private:
    AdamWOptions m_options;
    std::vector<Tensor> m_m;
    std::vector<Tensor> m_v;
    std::size_t m_step = 0;
};

}  // namespace paai::nn
