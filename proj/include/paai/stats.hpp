#pragma once

// Descriptive statistics used to compare car-following records: summary
// statistics with IQR fences, Gaussian KDE, empirical CDFs with the two-sample
// KS distance, jerk / jerk-squared integral, and spacing autocorrelation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "paai/error.hpp"
#include "paai/ingest.hpp"

namespace paai::stats {

struct SummaryStats {
    double max = 0.0;
    double min = 0.0;
    double median = 0.0;
    double mean = 0.0;
    double std = 0.0;  // population (divisor n)
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
    std::size_t n = 0;
};

struct KdeConfig {
    double bandwidth = 0.0;
    std::vector<double> grid;
};

struct JerkProfile {
    std::vector<double> raw;
    std::vector<double> filtered;
    double jsi = 0.0;
};

struct AcfResult {
    std::vector<std::size_t> lags;
    std::vector<double> rho;
};

struct EcdfResult {
    std::vector<double> support;  // pooled sorted unique values
    std::vector<double> cdf_a;
    std::vector<double> cdf_b;
    double ks = 0.0;
};

/// Quantile by linear interpolation between order statistics at (n-1)p.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    detail::require(!sorted.empty(), "quantile_sorted: empty series");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline SummaryStats summarize(std::span<const double> series) {
    detail::require(!series.empty(), "summarize: empty series");
    std::vector<double> sorted(series.begin(), series.end());
    std::sort(sorted.begin(), sorted.end());

    SummaryStats out;
    out.n = sorted.size();
    out.min = sorted.front();
    out.max = sorted.back();
    out.q1 = quantile_sorted(sorted, 0.25);
    out.median = quantile_sorted(sorted, 0.5);
    out.q3 = quantile_sorted(sorted, 0.75);
    out.iqr = out.q3 - out.q1;

    // Sums over the sorted copy so the result does not depend on input order.
    double sum = 0.0;
    for (double x : sorted) sum += x;
    out.mean = sum / static_cast<double>(out.n);
    double ss = 0.0;
    for (double x : sorted) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(out.n));
    return out;
}

inline std::pair<double, double> outlier_fences(const SummaryStats& st) {
    return {st.q1 - 1.5 * st.iqr, st.q3 + 1.5 * st.iqr};
}

/// Silverman's rule of thumb, 0.9 min(sigma, IQR/1.34) n^(-1/5). Falls back to
/// sigma when the IQR is zero.
inline double silverman_bandwidth(std::span<const double> series) {
    const SummaryStats st = summarize(series);
    double spread = st.std;
    if (st.iqr > 0.0) {
        spread = std::min(spread, st.iqr / 1.34);
    }
    detail::require(spread > 0.0, "silverman_bandwidth: series has zero spread");
    return 0.9 * spread * std::pow(static_cast<double>(st.n), -0.2);
}

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    detail::require(count >= 2 && hi > lo, "linspace: need count >= 2 and hi > lo");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    out.back() = hi;
    return out;
}

inline std::vector<double> kde(std::span<const double> series, const KdeConfig& config) {
    detail::require(series.size() >= 2, "kde: need at least 2 samples");
    detail::require(config.bandwidth > 0.0, "kde: bandwidth must be positive");
    for (std::size_t i = 1; i < config.grid.size(); ++i) {
        detail::require(config.grid[i] > config.grid[i - 1], "kde: grid must be strictly increasing");
    }
    const double h = config.bandwidth;
    const double norm = 1.0 / (static_cast<double>(series.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    std::vector<double> density(config.grid.size());
    for (std::size_t g = 0; g < config.grid.size(); ++g) {
        double acc = 0.0;
        for (double x : series) {
            const double u = (config.grid[g] - x) / h;
            acc += std::exp(-0.5 * u * u);
        }
        density[g] = acc * norm;
    }
    return density;
}

/// Right-continuous empirical CDFs of both samples evaluated on the pooled
/// support, and KS = sup |F_a - F_b|.
inline EcdfResult ecdf_and_ks(std::span<const double> a, std::span<const double> b) {
    detail::require(!a.empty() && !b.empty(), "ecdf_and_ks: empty input");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());

    EcdfResult out;
    out.support.reserve(sa.size() + sb.size());
    std::merge(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(out.support));
    out.support.erase(std::unique(out.support.begin(), out.support.end()), out.support.end());

    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    std::size_t ia = 0;
    std::size_t ib = 0;
    for (double x : out.support) {
        while (ia < sa.size() && sa[ia] <= x) ++ia;
        while (ib < sb.size() && sb[ib] <= x) ++ib;
        const double fa = static_cast<double>(ia) / na;
        const double fb = static_cast<double>(ib) / nb;
        out.cdf_a.push_back(fa);
        out.cdf_b.push_back(fb);
        out.ks = std::max(out.ks, std::abs(fa - fb));
    }
    return out;
}

/// Trapezoidal integral of uniformly spaced samples.
inline double trapezoid(std::span<const double> ys, double dx) {
    if (ys.size() < 2) return 0.0;
    double acc = 0.5 * (ys.front() + ys.back());
    for (std::size_t i = 1; i + 1 < ys.size(); ++i) acc += ys[i];
    return acc * dx;
}

/// Forward-difference jerk (j[0] copies j[1], as in differentiate()), a
/// moving-average filtered copy, and JSI = trapezoid of the raw j^2. The
/// filter window must be odd; on short series it shrinks to the largest odd
/// length that fits.
inline JerkProfile jerk(std::span<const double> accel, double dt, std::size_t filter_window = 25) {
    detail::require(accel.size() >= 2, "jerk: need at least 2 samples");
    detail::require(filter_window >= 1 && filter_window % 2 == 1, "jerk: filter window must be odd and >= 1");
    JerkProfile out;
    out.raw = differentiate(accel, dt);
    std::size_t window = filter_window;
    if (window > out.raw.size()) window = out.raw.size() % 2 == 1 ? out.raw.size() : out.raw.size() - 1;
    out.filtered = smooth(out.raw, window);
    std::vector<double> squared(out.raw.size());
    for (std::size_t i = 0; i < out.raw.size(); ++i) squared[i] = out.raw[i] * out.raw[i];
    out.jsi = trapezoid(squared, dt);
    return out;
}

/// Biased ACF with the global mean: rho(k) = (1/n) sum (s_t - mu)(s_{t+k} - mu) / sigma^2.
/// A constant series has rho(0) = 1 and rho(k > 0) = 0.
inline AcfResult acf(std::span<const double> spacing, std::size_t max_lag) {
    detail::require(max_lag < spacing.size(), "acf: max_lag must be smaller than the series length");
    const std::size_t n = spacing.size();
    double mu = 0.0;
    for (double x : spacing) mu += x;
    mu /= static_cast<double>(n);
    std::vector<double> centered(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        centered[i] = spacing[i] - mu;
        var += centered[i] * centered[i];
    }

    AcfResult out;
    out.lags.resize(max_lag + 1);
    out.rho.assign(max_lag + 1, 0.0);
    for (std::size_t k = 0; k <= max_lag; ++k) out.lags[k] = k;
    out.rho[0] = 1.0;
    if (var == 0.0) {
        return out;
    }
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double acc = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) acc += centered[t] * centered[t + k];
        out.rho[k] = std::clamp(acc / var, -1.0, 1.0);
    }
    return out;
}

}  // namespace paai::stats
