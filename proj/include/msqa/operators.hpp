#pragma once

// Single-scale quasi-interpolation operators: Shepard (scalar and SPD-valued)
// and linear moving least squares.

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "msqa/errors.hpp"
#include "msqa/geometry.hpp"
#include "msqa/kernels.hpp"

namespace msqa {

/// Sites paired with samples of a function valued in Space.
template <ValueSpace Space>
class ScatteredDataset {
public:
    using space_type = Space;
    using value_type = typename Space::value_type;

    ScatteredDataset(std::vector<Point> sites, std::vector<value_type> values)
        : sites_(std::move(sites)), values_(std::move(values)) {
        if (sites_.empty()) throw EmptyDataset("dataset has no sites");
        if (sites_.size() != values_.size()) throw ConfigError("site and value counts differ");
    }

    std::size_t size() const { return sites_.size(); }
    std::span<const Point> sites() const { return sites_; }
    std::span<const value_type> values() const { return values_; }
    const Point& site(std::size_t i) const { return sites_[i]; }
    const value_type& value(std::size_t i) const { return values_[i]; }

    /// The sub-dataset restricted to the given indices, in the given order.
    ScatteredDataset subset(std::span<const std::size_t> indices) const {
        std::vector<Point> s;
        std::vector<value_type> v;
        s.reserve(indices.size());
        v.reserve(indices.size());
        for (std::size_t i : indices) {
            s.push_back(sites_[i]);
            v.push_back(values_[i]);
        }
        return ScatteredDataset(std::move(s), std::move(v));
    }

private:
    std::vector<Point> sites_;
    std::vector<value_type> values_;
};

using ScalarDataset = ScatteredDataset<ScalarLine>;
template <int N = 3>
using SpdDataset = ScatteredDataset<SpdManifold<N>>;

inline std::size_t nearest_site(std::span<const Point> sites, const Point& s) {
    if (sites.empty()) throw EmptyDataset("nearest site of no sites");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const double d = (sites[i] - s).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

/// Raw kernel weights K(|x_i - s| / delta).
inline std::vector<double> kernel_weights(std::span<const Point> sites, const KernelSpec& kernel, const Point& s) {
    std::vector<double> w(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) w[i] = kernel_weight(kernel, (sites[i] - s).norm());
    return w;
}

/// Normalized Shepard weights at s. When no site lies inside the kernel
/// support, all weight goes to the nearest site.
inline std::vector<double> shepard_weights(std::span<const Point> sites, const KernelSpec& kernel, const Point& s) {
    auto w = kernel_weights(sites, kernel, s);
    double sum = 0.0;
    for (double x : w) sum += x;
    if (sum > 0.0) {
        for (double& x : w) x /= sum;
    } else {
        w[nearest_site(sites, s)] = 1.0;
    }
    return w;
}

namespace detail {

/// sum k_i f_i / sum k_i evaluated as f_ref + sum k_i (f_i - f_ref) / sum k_i
/// around the heaviest sample, which reproduces constant data exactly.
/// Requires sum k_i > 0.
inline double centered_weighted_mean(std::span<const double> values, std::span<const double> k) {
    std::size_t ref = 0;
    double den = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        den += k[i];
        if (k[i] > k[ref]) ref = i;
    }
    const double base = values[ref];
    double num = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (k[i] != 0.0) num += k[i] * (values[i] - base);
    }
    return base + num / den;
}

inline double weight_sum(std::span<const double> k) {
    double s = 0.0;
    for (double x : k) s += x;
    return s;
}

}  // namespace detail

/// sum f_i K(r_i) / sum K(r_i), with the nearest-site fallback.
inline double shepard_eval(const ScalarDataset& data, const KernelSpec& kernel, const Point& s) {
    const auto k = kernel_weights(data.sites(), kernel, s);
    if (!(detail::weight_sum(k) > 0.0)) return data.value(nearest_site(data.sites(), s));
    return detail::centered_weighted_mean(data.values(), k);
}

/// Weighted Karcher mean of the values under the Shepard weights at s.
template <int N>
SpdPoint<N> shepard_eval_manifold(const SpdDataset<N>& data, const KernelSpec& kernel, const Point& s) {
    const auto w = shepard_weights(data.sites(), kernel, s);
    std::vector<SpdPoint<N>> pts;
    std::vector<double> ws;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0.0) continue;
        pts.push_back(data.value(i));
        ws.push_back(w[i]);
    }
    return karcher_mean(std::span<const SpdPoint<N>>(pts), std::span<const double>(ws));
}

/// Normal matrices whose smallest/largest eigenvalue ratio falls below this
/// are treated as rank deficient.
inline constexpr double kMlsConditionLimit = 1e12;
inline constexpr double kMlsRidge = 1e-12;

/// Value at s of the degree-1 polynomial minimizing the kernel-weighted
/// squared misfit, solved in the basis {1, x - s_x, y - s_y}. The system is
/// solved for deviations from the Shepard mean, with the linear terms scaled
/// by 1/delta; neither changes the fitted polynomial.
inline double mls_eval(const ScalarDataset& data, const KernelSpec& kernel, const Point& s) {
    auto w = kernel_weights(data.sites(), kernel, s);
    const double sum = detail::weight_sum(w);
    if (!(sum > 0.0)) return data.value(nearest_site(data.sites(), s));
    const double shepard = detail::centered_weighted_mean(data.values(), w);
    for (double& x : w) x /= sum;

    Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (w[i] == 0.0) continue;
        const Point d = (data.site(i) - s) / kernel.delta;
        const Eigen::Vector3d b(1.0, d.x(), d.y());
        normal.noalias() += w[i] * b * b.transpose();
        rhs.noalias() += w[i] * (data.value(i) - shepard) * b;
    }

    const Eigen::Vector3d eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(normal, Eigen::EigenvaluesOnly).eigenvalues();
    if (!(eig(0) * kMlsConditionLimit > eig(2))) return shepard;

    normal.diagonal().array() += kMlsRidge;
    const Eigen::Vector3d coef = normal.ldlt().solve(rhs);
    return shepard + coef(0);
}

enum class Method { Shepard, Mls };

/// A single-scale scalar quasi-interpolant Q_X f. Owns its data.
class ScalarApproximant {
public:
    ScalarApproximant(ScalarDataset data, KernelSpec kernel, Method method)
        : data_(std::move(data)), kernel_(kernel), method_(method) {}

    double eval(const Point& s) const {
        return method_ == Method::Shepard ? shepard_eval(data_, kernel_, s) : mls_eval(data_, kernel_, s);
    }

    const ScalarDataset& data() const { return data_; }
    const KernelSpec& kernel() const { return kernel_; }
    Method method() const { return method_; }

private:
    ScalarDataset data_;
    KernelSpec kernel_;
    Method method_;
};

/// Manifold Shepard quasi-interpolant.
template <int N = 3>
class SpdApproximant {
public:
    SpdApproximant(SpdDataset<N> data, KernelSpec kernel) : data_(std::move(data)), kernel_(kernel) {}

    SpdPoint<N> eval(const Point& s) const { return shepard_eval_manifold(data_, kernel_, s); }

    const SpdDataset<N>& data() const { return data_; }
    const KernelSpec& kernel() const { return kernel_; }

private:
    SpdDataset<N> data_;
    KernelSpec kernel_;
};

}  // namespace msqa
