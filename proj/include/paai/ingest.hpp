#pragma once

// Trajectory ingestion: delimited ACC logs -> uniform-timestep follower/lead
// series, plus smoothing, differentiation and the chronological split.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "paai/error.hpp"

namespace paai {

inline constexpr double kEarthRadiusM = 6'371'000.0;

struct RawSample {
    double timestamp = 0.0;
    std::optional<double> lead_lat, lead_lon, foll_lat, foll_lon;
    double lead_speed = 0.0;
    double foll_speed = 0.0;
    std::optional<double> spacing;

    bool has_positions() const noexcept {
        return lead_lat && lead_lon && foll_lat && foll_lon;
    }
};

/// Header names of the columns to read. Position columns are all-or-nothing.
struct ColumnMapping {
    std::string timestamp = "t";
    std::string lead_speed = "v_l";
    std::string foll_speed = "v";
    std::optional<std::string> lead_lat, lead_lon, foll_lat, foll_lon;
    std::optional<std::string> spacing;
    char delimiter = ',';
};

/// Uniformly sampled car-following record. `dv[i] == v_l[i] - v[i]` exactly;
/// `a` follows the backward-difference convention of differentiate().
struct Trajectory {
    double dt = 0.1;
    double t0 = 0.0;
    std::vector<double> v;
    std::vector<double> v_l;
    std::vector<double> s;
    std::vector<double> dv;
    std::vector<double> a;

    std::size_t size() const noexcept { return v.size(); }
    double time(std::size_t i) const noexcept { return t0 + static_cast<double>(i) * dt; }

    /// Half-open sub-range [begin, end).
    Trajectory slice(std::size_t begin, std::size_t end) const;

    /// Acceleration applied over [t_i, t_{i+1}), i.e. (v[i+1] - v[i]) / dt,
    /// with the last entry repeated. This is what a forward-Euler rollout
    /// records at step i.
    std::vector<double> forward_accel() const;
};

struct DatasetSplit {
    Trajectory train;
    Trajectory validation;
    Trajectory test;
};

// ---------------------------------------------------------------------------

inline double haversine_spacing(double lat1, double lon1, double lat2, double lon2) {
    auto valid = [](double lat, double lon) {
        return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
    };
    detail::require(valid(lat1, lon1) && valid(lat2, lon2),
                    "haversine_spacing: coordinate out of range");
    constexpr double rad = std::numbers::pi / 180.0;
    const double phi1 = lat1 * rad;
    const double phi2 = lat2 * rad;
    const double dphi = (lat2 - lat1) * rad;
    const double dlambda = (lon2 - lon1) * rad;
    const double sin_dphi = std::sin(dphi / 2.0);
    const double sin_dlambda = std::sin(dlambda / 2.0);
    double h = sin_dphi * sin_dphi + std::cos(phi1) * std::cos(phi2) * sin_dlambda * sin_dlambda;
    h = std::clamp(h, 0.0, 1.0);
    return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

inline std::vector<double> differentiate(std::span<const double> speed, double dt) {
    detail::require(speed.size() >= 2, "differentiate: need at least 2 samples");
    detail::require(dt > 0.0, "differentiate: dt must be positive");
    std::vector<double> accel(speed.size());
    for (std::size_t i = 1; i < speed.size(); ++i) {
        accel[i] = (speed[i] - speed[i - 1]) / dt;
    }
    accel[0] = accel[1];
    return accel;
}

/// Centered moving average; windows are truncated at the series ends.
inline std::vector<double> smooth(std::span<const double> series, std::size_t window) {
    detail::require(window >= 1 && window % 2 == 1, "smooth: window must be odd and >= 1");
    detail::require(window <= series.size(), "smooth: window longer than series");
    const std::size_t half = window / 2;
    const std::size_t n = series.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        double sum = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
            sum += series[j];
        }
        out[i] = sum / static_cast<double>(hi - lo + 1);
    }
    return out;
}

/// Builds a Trajectory from speed/spacing series, deriving dv and a.
inline Trajectory make_trajectory(double dt, double t0, std::vector<double> v,
                                  std::vector<double> v_l, std::vector<double> s) {
    detail::require(dt > 0.0, "make_trajectory: dt must be positive");
    detail::require(v.size() >= 2, "make_trajectory: need at least 2 samples");
    detail::require(v.size() == v_l.size() && v.size() == s.size(),
                    "make_trajectory: series lengths differ");
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(s[i] > 0.0)) {
            throw Error("make_trajectory: non-positive spacing at sample " + std::to_string(i));
        }
    }
    Trajectory traj;
    traj.dt = dt;
    traj.t0 = t0;
    traj.dv.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        traj.dv[i] = v_l[i] - v[i];
    }
    traj.a = differentiate(v, dt);
    traj.v = std::move(v);
    traj.v_l = std::move(v_l);
    traj.s = std::move(s);
    return traj;
}

inline Trajectory Trajectory::slice(std::size_t begin, std::size_t end) const {
    detail::require(begin < end && end <= size(), "Trajectory::slice: bad range");
    auto cut = [&](const std::vector<double>& xs) {
        return std::vector<double>(xs.begin() + static_cast<std::ptrdiff_t>(begin),
                                   xs.begin() + static_cast<std::ptrdiff_t>(end));
    };
    Trajectory out;
    out.dt = dt;
    out.t0 = time(begin);
    out.v = cut(v);
    out.v_l = cut(v_l);
    out.s = cut(s);
    out.dv = cut(dv);
    out.a = cut(a);
    return out;
}

inline std::vector<double> Trajectory::forward_accel() const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i + 1 < size(); ++i) {
        out[i] = a[i + 1];
    }
    if (!out.empty()) {
        out.back() = a.back();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Delimited input.

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char delim) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    for (auto& f : fields) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return fields;
}

inline std::optional<double> parse_double(std::string_view text) {
    if (text.empty()) {
        return std::nullopt;
    }
    std::string buf(text);
    char* end = nullptr;
    const double value = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

}  // namespace detail

inline std::vector<RawSample> parse_csv(std::istream& in, const ColumnMapping& mapping) {
    const bool want_pos = mapping.lead_lat || mapping.lead_lon || mapping.foll_lat || mapping.foll_lon;
    if (want_pos) {
        detail::require(mapping.lead_lat && mapping.lead_lon && mapping.foll_lat && mapping.foll_lon,
                        "ColumnMapping: position columns must all be mapped together");
    }

    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string_view> header;
    std::string header_line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line != "\r") {
            header_line = line;
            break;
        }
    }
    if (header_line.empty()) {
        throw ParseError(line_no, "missing header row");
    }
    header = detail::split_fields(header_line, mapping.delimiter);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) {
        index.emplace(std::string(header[i]), i);
    }
    auto column = [&](const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) {
            throw ParseError(1, "column '" + name + "' not found in header");
        }
        return it->second;
    };
    auto optional_column = [&](const std::optional<std::string>& name) -> std::optional<std::size_t> {
        if (!name) return std::nullopt;
        return column(*name);
    };

    const std::size_t c_t = column(mapping.timestamp);
    const std::size_t c_vl = column(mapping.lead_speed);
    const std::size_t c_v = column(mapping.foll_speed);
    const auto c_lat1 = optional_column(mapping.lead_lat);
    const auto c_lon1 = optional_column(mapping.lead_lon);
    const auto c_lat2 = optional_column(mapping.foll_lat);
    const auto c_lon2 = optional_column(mapping.foll_lon);
    const auto c_s = optional_column(mapping.spacing);

    std::vector<RawSample> samples;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto fields = detail::split_fields(line, mapping.delimiter);
        if (fields.size() != header.size()) {
            throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                          std::to_string(fields.size()));
        }
        auto number = [&](std::size_t col) {
            auto value = detail::parse_double(fields[col]);
            if (!value) {
                throw ParseError(line_no, "malformed number in column '" + std::string(header[col]) + "'");
            }
            return *value;
        };
        RawSample sample;
        sample.timestamp = number(c_t);
        sample.lead_speed = number(c_vl);
        sample.foll_speed = number(c_v);
        if (sample.lead_speed < 0.0 || sample.foll_speed < 0.0) {
            throw ParseError(line_no, "negative speed");
        }
        if (c_lat1) {
            sample.lead_lat = number(*c_lat1);
            sample.lead_lon = number(*c_lon1);
            sample.foll_lat = number(*c_lat2);
            sample.foll_lon = number(*c_lon2);
            if (std::abs(*sample.lead_lat) > 90.0 || std::abs(*sample.foll_lat) > 90.0 ||
                std::abs(*sample.lead_lon) > 180.0 || std::abs(*sample.foll_lon) > 180.0) {
                throw ParseError(line_no, "coordinate out of range");
            }
        }
        if (c_s) {
            sample.spacing = number(*c_s);
        }
        if (!samples.empty() && !(sample.timestamp > samples.back().timestamp)) {
            throw ParseError(line_no, "timestamp not strictly increasing");
        }
        samples.push_back(sample);
    }
    return samples;
}

inline std::vector<RawSample> load_csv(const std::string& path, const ColumnMapping& mapping) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path + "'");
    }
    return parse_csv(in, mapping);
}

/// Linear interpolation of the raw log onto t0 + k*dt, k = 0..floor(span/dt).
/// Spacing comes from positions when present, otherwise from the spacing
/// column. The result is not smoothed.
inline Trajectory resample(std::span<const RawSample> raw, double dt) {
    detail::require(raw.size() >= 2, "resample: need at least 2 samples");
    detail::require(dt > 0.0, "resample: dt must be positive");
    const double t0 = raw.front().timestamp;
    const double span = raw.back().timestamp - t0;
    if (span < dt) {
        throw Error("resample: time span shorter than dt");
    }

    std::vector<double> spacing(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto& r = raw[i];
        if (r.has_positions()) {
            spacing[i] = haversine_spacing(*r.lead_lat, *r.lead_lon, *r.foll_lat, *r.foll_lon);
        } else if (r.spacing) {
            spacing[i] = *r.spacing;
        } else {
            throw Error("resample: sample " + std::to_string(i) + " has neither positions nor spacing");
        }
    }

    const auto count = static_cast<std::size_t>(std::floor(span / dt + 1e-9)) + 1;
    std::vector<double> v(count), v_l(count), s(count);
    std::size_t j = 0;
    const double snap = 1e-9 * dt;
    for (std::size_t k = 0; k < count; ++k) {
        const double t = t0 + static_cast<double>(k) * dt;
        while (j + 2 < raw.size() && raw[j + 1].timestamp <= t) {
            ++j;
        }
        const auto& lo = raw[j];
        const auto& hi = raw[j + 1];
        if (std::abs(t - lo.timestamp) <= snap) {
            v[k] = lo.foll_speed;
            v_l[k] = lo.lead_speed;
            s[k] = spacing[j];
            continue;
        }
        if (std::abs(t - hi.timestamp) <= snap) {
            v[k] = hi.foll_speed;
            v_l[k] = hi.lead_speed;
            s[k] = spacing[j + 1];
            continue;
        }
        const double w = std::clamp((t - lo.timestamp) / (hi.timestamp - lo.timestamp), 0.0, 1.0);
        v[k] = lo.foll_speed + w * (hi.foll_speed - lo.foll_speed);
        v_l[k] = lo.lead_speed + w * (hi.lead_speed - lo.lead_speed);
        s[k] = spacing[j] + w * (spacing[j + 1] - spacing[j]);
    }
    return make_trajectory(dt, t0, std::move(v), std::move(v_l), std::move(s));
}

/// resample, then smooth speeds and spacing and re-derive dv and a.
inline Trajectory preprocess(std::span<const RawSample> raw, double dt, std::size_t smooth_window) {
    const Trajectory coarse = resample(raw, dt);
    return make_trajectory(dt, coarse.t0, smooth(coarse.v, smooth_window),
                           smooth(coarse.v_l, smooth_window), smooth(coarse.s, smooth_window));
}

/// Chronological 60/25/15 split; validation and test sizes are floored and
/// the remainder goes to training.
inline DatasetSplit split(const Trajectory& traj) {
    const std::size_t n = traj.size();
    if (n < 20) {
        throw Error("split: trajectory needs at least 20 samples");
    }
    const std::size_t n_val = n * 25 / 100;
    const std::size_t n_test = n * 15 / 100;
    const std::size_t n_train = n - n_val - n_test;
    return DatasetSplit{traj.slice(0, n_train), traj.slice(n_train, n_train + n_val),
                        traj.slice(n_train + n_val, n)};
}

// ---------------------------------------------------------------------------
// Canonical trajectory file: t,v,v_l,s,dv,a with 9 significant digits.

namespace detail {

inline std::string format_g9(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

}  // namespace detail

inline void write_trajectory(std::ostream& out, const Trajectory& traj) {
    out << "t,v,v_l,s,dv,a\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        out << detail::format_g9(traj.time(i)) << ',' << detail::format_g9(traj.v[i]) << ','
            << detail::format_g9(traj.v_l[i]) << ',' << detail::format_g9(traj.s[i]) << ','
            << detail::format_g9(traj.dv[i]) << ',' << detail::format_g9(traj.a[i]) << '\n';
    }
}

inline void save_trajectory(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write '" + path + "'");
    }
    write_trajectory(out, traj);
}

/// Reads the canonical format back. dt is recovered from the time column and
/// rounded to 9 significant digits; dv is recomputed from v and v_l.
inline Trajectory read_trajectory(std::istream& in) {
    ColumnMapping mapping;
    mapping.spacing = "s";
    const auto rows = parse_csv(in, mapping);
    if (rows.size() < 2) {
        throw Error("read_trajectory: need at least 2 rows");
    }
    const double raw_dt = (rows.back().timestamp - rows.front().timestamp) /
                          static_cast<double>(rows.size() - 1);
    const double dt = std::stod(detail::format_g9(raw_dt));
    std::vector<double> v, v_l, s;
    for (const auto& r : rows) {
        v.push_back(r.foll_speed);
        v_l.push_back(r.lead_speed);
        s.push_back(*r.spacing);
    }
    return make_trajectory(dt, rows.front().timestamp, std::move(v), std::move(v_l), std::move(s));
}

inline Trajectory load_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path + "'");
    }
    return read_trajectory(in);
}

}  // namespace paai
