#pragma once

// Straightforward reference implementations used to cross-check the
// library. They share no code with it: plain loops over std::vector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major, rows x cols

/// Great-circle distance by the spherical law of cosines.
inline double law_of_cosines_distance(double lat1, double lon1, double lat2, double lon2,
                                      double radius = 6'371'000.0) {
    const double r = std::numbers::pi / 180.0;
    const double c = std::sin(lat1 * r) * std::sin(lat2 * r) +
                     std::cos(lat1 * r) * std::cos(lat2 * r) * std::cos((lon2 - lon1) * r);
    return radius * std::acos(std::min(1.0, std::max(-1.0, c)));
}

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline Vec matvec(const Mat& w, const Vec& x) {
    Vec y(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
        for (std::size_t j = 0; j < x.size(); ++j) y[i] += w[i][j] * x[j];
    }
    return y;
}

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// LSTM with gate blocks (i, f, g, o) stacked in w_x (4H x I), w_h (4H x H), b (4H).
inline Mat lstm(const Mat& w_x, const Mat& w_h, const Vec& b, const Mat& xs) {
    const std::size_t H = w_h.front().size();
    Vec h(H, 0.0), c(H, 0.0);
    Mat out;
    for (const auto& x : xs) {
        const Vec zx = matvec(w_x, x);
        const Vec zh = matvec(w_h, h);
        Vec h_new(H), c_new(H);
        for (std::size_t k = 0; k < H; ++k) {
            const double i = sigm(zx[k] + zh[k] + b[k]);
            const double f = sigm(zx[H + k] + zh[H + k] + b[H + k]);
            const double g = std::tanh(zx[2 * H + k] + zh[2 * H + k] + b[2 * H + k]);
            const double o = sigm(zx[3 * H + k] + zh[3 * H + k] + b[3 * H + k]);
            c_new[k] = f * c[k] + i * g;
            h_new[k] = o * std::tanh(c_new[k]);
        }
        h = h_new;
        c = c_new;
        out.push_back(h);
    }
    return out;
}

/// Scores e_t = w_a . relu(W_b h_t + b_b) + b_a, softmax over t, weighted sum.
inline std::pair<Vec, Vec> attention(const Mat& w_b, const Vec& b_b, const Vec& w_a, double b_a, const Mat& hs) {
    Vec e;
    for (const auto& h : hs) {
        const Vec z = matvec(w_b, h);
        double s = b_a;
        for (std::size_t k = 0; k < z.size(); ++k) s += w_a[k] * std::max(0.0, z[k] + b_b[k]);
        e.push_back(s);
    }
    double peak = e.front();
    for (double x : e) peak = std::max(peak, x);
    double total = 0.0;
    Vec w;
    for (double x : e) {
        w.push_back(std::exp(x - peak));
        total += w.back();
    }
    for (double& x : w) x /= total;
    Vec h_att(hs.front().size(), 0.0);
    for (std::size_t t = 0; t < hs.size(); ++t) {
        for (std::size_t k = 0; k < h_att.size(); ++k) h_att[k] += w[t] * hs[t][k];
    }
    return {w, h_att};
}

/// y = w_out . relu(W_mid x + b_mid) + b_out.
inline double head(const Mat& w_mid, const Vec& b_mid, const Vec& w_out, double b_out, const Vec& x) {
    const Vec z = matvec(w_mid, x);
    double y = b_out;
    for (std::size_t k = 0; k < z.size(); ++k) y += w_out[k] * std::max(0.0, z[k] + b_mid[k]);
    return y;
}

}  // namespace oracle
