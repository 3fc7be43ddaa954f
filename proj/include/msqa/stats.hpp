#pragma once

// Monte-Carlo bias/variance estimation over repeated trials, for any value
// space, plus percentile summaries across evaluation points.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "msqa/errors.hpp"
#include "msqa/geometry.hpp"

namespace msqa {

/// per_trial[t][k] is trial t's approximation at evaluation point k.
template <ValueSpace Space>
struct TrialEvaluations {
    using value_type = typename Space::value_type;

    std::vector<std::vector<value_type>> per_trial;
    std::vector<value_type> truth;

    std::size_t trials() const { return per_trial.size(); }
    std::size_t points() const { return truth.size(); }

    void validate() const {
        for (const auto& row : per_trial) {
            if (row.size() != truth.size()) throw ConfigError("trial row length differs from truth length");
        }
    }
};

struct PointMetrics {
    double mse = 0.0;
    double bias = 0.0;
    double variance = 0.0;
    double bias_ratio = 0.0;
};

/// Plug-in estimate of the expectation: arithmetic mean on the line, Karcher
/// mean on the manifold.
template <ValueSpace Space>
typename Space::value_type mean_estimate(std::span<const typename Space::value_type> values) {
    return Space::mean(values);
}

/// MSE, bias, variance and bias ratio of trial values against a noiseless
/// truth t, with m the mean estimate of the values:
///   mse = mean d(t, v)^2,  bias = d(m, t)^2,  var = mean d(m, v)^2.
/// The bias ratio is bias / mse, and 0 when mse is 0.
template <ValueSpace Space>
PointMetrics point_metrics(std::span<const typename Space::value_type> values, const typename Space::value_type& truth) {
    if (values.size() < 2) throw ConfigError("point metrics need at least two trials");
    const auto m = mean_estimate<Space>(values);
    const double n = static_cast<double>(values.size());
    PointMetrics out;
    for (const auto& v : values) {
        const double e = Space::dist(truth, v);
        const double d = Space::dist(m, v);
        out.mse += e * e;
        out.variance += d * d;
    }
    out.mse /= n;
    out.variance /= n;
    const double b = Space::dist(m, truth);
    out.bias = b * b;
    out.bias_ratio = out.mse > 0.0 ? out.bias / out.mse : 0.0;
    return out;
}

template <ValueSpace Space>
PointMetrics point_metrics(const TrialEvaluations<Space>& trials, std::size_t point) {
    std::vector<typename Space::value_type> column;
    column.reserve(trials.trials());
    for (const auto& row : trials.per_trial) column.push_back(row.at(point));
    return point_metrics<Space>(std::span<const typename Space::value_type>(column), trials.truth.at(point));
}

/// Percentile with linear interpolation between closest ranks: position
/// q (n - 1) in the sorted sample.
inline double percentile(std::span<const double> values, double q) {
    if (values.empty()) throw EmptyDataset("percentile of no values");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

struct PercentileSummary {
    double p25 = 0.0;
    double p50 = 0.0;
    double p75 = 0.0;
};

inline PercentileSummary summarize_values(std::span<const double> values) {
    PercentileSummary s{percentile(values, 0.25), percentile(values, 0.50), percentile(values, 0.75)};
    // Interpolation can round p50 a hair outside its neighbours when they are equal.
    s.p50 = std::clamp(s.p50, s.p25, s.p75);
    return s;
}

struct MetricSummaries {
    PercentileSummary mse;
    PercentileSummary bias;
    PercentileSummary variance;
    PercentileSummary bias_ratio;
};

inline MetricSummaries summarize(std::span<const PointMetrics> metrics) {
    if (metrics.empty()) throw EmptyDataset("summary of no points");
    auto column = [&](double PointMetrics::*field) {
        std::vector<double> v;
        v.reserve(metrics.size());
        for (const auto& m : metrics) v.push_back(m.*field);
        return summarize_values(v);
    };
    return {column(&PointMetrics::mse), column(&PointMetrics::bias), column(&PointMetrics::variance),
            column(&PointMetrics::bias_ratio)};
}

}  // namespace msqa
