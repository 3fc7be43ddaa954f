#pragma once

// Symmetric matrices, the SPD manifold under the affine-invariant metric, and
// the value-space abstraction shared by the scalar and manifold code paths.

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "msqa/errors.hpp"

namespace msqa {

template <int N>
using Matrix = Eigen::Matrix<double, N, N>;

template <int N>
using Vector = Eigen::Matrix<double, N, 1>;

/// Eigenvalues below or at this value disqualify a matrix from the SPD manifold.
inline constexpr double kSpdEigenFloor = 1e-12;

/// A real symmetric N x N matrix. Symmetry holds exactly: every constructor
/// goes through symmetrize().
template <int N = 3>
class SymMatrix {
public:
    static_assert(N >= 1);
    static constexpr int dim = N;

    SymMatrix() : m_(Matrix<N>::Zero()) {}

    /// (m + m^T) / 2. Idempotent, and the identity on symmetric input.
    static SymMatrix symmetrize(const Matrix<N>& m) {
        SymMatrix s;
        s.m_ = (m + m.transpose()) * 0.5;
        return s;
    }

    static SymMatrix zero() { return SymMatrix{}; }
    static SymMatrix identity() { return symmetrize(Matrix<N>::Identity()); }
    static SymMatrix diagonal(const Vector<N>& d) { return symmetrize(d.asDiagonal().toDenseMatrix()); }

    const Matrix<N>& matrix() const { return m_; }
    double operator()(int i, int j) const { return m_(i, j); }

    double frobenius_norm() const { return m_.norm(); }

    SymMatrix& operator+=(const SymMatrix& o) {
        m_ += o.m_;
        return *this;
    }
    SymMatrix& operator-=(const SymMatrix& o) {
        m_ -= o.m_;
        return *this;
    }
    SymMatrix& operator*=(double s) {
        m_ *= s;
        return *this;
    }

    friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
    friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
    friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
    friend SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
    friend bool operator==(const SymMatrix& a, const SymMatrix& b) { return a.m_ == b.m_; }

private:
    Matrix<N> m_;
};

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
template <int N>
struct SymEig {
    Vector<N> values;
    Matrix<N> vectors;
};

template <int N>
SymEig<N> sym_eig(const SymMatrix<N>& m) {
    Eigen::SelfAdjointEigenSolver<Matrix<N>> solver(m.matrix());
    if (solver.info() != Eigen::Success) {
        throw InternalError("symmetric eigensolver did not converge");
    }
    // Eigen sorts ascending.
    SymEig<N> out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    return out;
}

/// V diag(f(lambda)) V^T for the decomposition e.
template <int N, class F>
SymMatrix<N> spectral_apply(const SymEig<N>& e, F&& f) {
    Vector<N> mapped;
    for (int i = 0; i < N; ++i) mapped(i) = f(e.values(i));
    return SymMatrix<N>::symmetrize(e.vectors * mapped.asDiagonal() * e.vectors.transpose());
}

template <int N>
double min_eigenvalue(const SymMatrix<N>& m) {
    return sym_eig(m).values(N - 1);
}

namespace detail {
struct Unchecked {};
}  // namespace detail

/// A symmetric positive definite matrix: a point of the SPD manifold.
template <int N = 3>
class SpdPoint {
public:
    static constexpr int dim = N;

    /// Throws NotSpd unless every eigenvalue exceeds 1e-12.
    explicit SpdPoint(const SymMatrix<N>& m) : m_(m) {
        const double lo = min_eigenvalue(m);
        if (!(lo > kSpdEigenFloor)) {
            throw NotSpd("smallest eigenvalue " + std::to_string(lo));
        }
    }

    SpdPoint(const SymMatrix<N>& m, detail::Unchecked) : m_(m) {}

    static SpdPoint identity() { return SpdPoint(SymMatrix<N>::identity(), detail::Unchecked{}); }

    const SymMatrix<N>& sym() const { return m_; }
    const Matrix<N>& matrix() const { return m_.matrix(); }
    double operator()(int i, int j) const { return m_(i, j); }

    friend bool operator==(const SpdPoint& a, const SpdPoint& b) { return a.m_ == b.m_; }

private:
    SymMatrix<N> m_;
};

template <int N>
SpdPoint<N> mat_exp_sym(const SymMatrix<N>& v) {
    return SpdPoint<N>(spectral_apply(sym_eig(v), [](double x) { return std::exp(x); }), detail::Unchecked{});
}

template <int N>
SymMatrix<N> mat_log_spd(const SymMatrix<N>& p) {
    const auto e = sym_eig(p);
    if (!(e.values(N - 1) > kSpdEigenFloor)) {
        throw NotSpd("matrix logarithm of eigenvalue " + std::to_string(e.values(N - 1)));
    }
    return spectral_apply(e, [](double x) { return std::log(x); });
}

template <int N>
SymMatrix<N> mat_log_spd(const SpdPoint<N>& p) {
    return mat_log_spd(p.sym());
}

/// Square root and inverse square root of a base point; everything the
/// Riemannian maps need at that base.
template <int N>
struct SpdFrame {
    Matrix<N> sqrt;
    Matrix<N> inv_sqrt;

    explicit SpdFrame(const SpdPoint<N>& base) {
        const auto e = sym_eig(base.sym());
        if (!(e.values(N - 1) > kSpdEigenFloor)) {
            throw NotSpd("base point eigenvalue " + std::to_string(e.values(N - 1)));
        }
        sqrt = spectral_apply(e, [](double x) { return std::sqrt(x); }).matrix();
        inv_sqrt = spectral_apply(e, [](double x) { return 1.0 / std::sqrt(x); }).matrix();
    }

    /// base^{-1/2} m base^{-1/2}
    SymMatrix<N> whiten(const SymMatrix<N>& m) const {
        return SymMatrix<N>::symmetrize(inv_sqrt * m.matrix() * inv_sqrt);
    }
    /// base^{1/2} m base^{1/2}
    SymMatrix<N> color(const SymMatrix<N>& m) const { return SymMatrix<N>::symmetrize(sqrt * m.matrix() * sqrt); }
};

template <int N>
SpdPoint<N> spd_exp(const SpdPoint<N>& base, const SymMatrix<N>& v) {
    const SpdFrame<N> frame(base);
    return SpdPoint<N>(frame.color(mat_exp_sym(frame.whiten(v)).sym()), detail::Unchecked{});
}

template <int N>
SymMatrix<N> spd_log(const SpdPoint<N>& base, const SpdPoint<N>& target) {
    const SpdFrame<N> frame(base);
    return frame.color(mat_log_spd(frame.whiten(target.sym())));
}

/// Affine-invariant geodesic distance ||log(a^{-1/2} b a^{-1/2})||_F.
template <int N>
double spd_dist(const SpdPoint<N>& a, const SpdPoint<N>& b) {
    if (a == b) return 0.0;
    const SpdFrame<N> frame(a);
    const auto e = sym_eig(frame.whiten(b.sym()));
    if (!(e.values(N - 1) > kSpdEigenFloor)) {
        throw NotSpd("distance argument eigenvalue " + std::to_string(e.values(N - 1)));
    }
    double sum = 0.0;
    for (int i = 0; i < N; ++i) {
        const double l = std::log(e.values(i));
        sum += l * l;
    }
    return std::sqrt(sum);
}

/// Riemannian norm of tangent vector v at base.
template <int N>
double spd_tangent_norm(const SpdPoint<N>& base, const SymMatrix<N>& v) {
    return SpdFrame<N>(base).whiten(v).frobenius_norm();
}

/// Validates weights and rescales them to sum to exactly one. A sum that is
/// off by more than 1e-9 is rejected.
inline std::vector<double> normalized_weights(std::span<const double> weights) {
    if (weights.empty()) throw BadWeights("no weights");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw BadWeights("negative or NaN weight");
        sum += w;
    }
    if (!(sum > 0.0)) throw BadWeights("weights sum to zero");
    if (std::abs(sum - 1.0) > 1e-9) throw BadWeights("weights sum to " + std::to_string(sum) + ", expected 1");
    std::vector<double> out(weights.begin(), weights.end());
    if (sum != 1.0) {
        for (double& w : out) w /= sum;
    }
    return out;
}

template <int N>
struct KarcherResult {
    SpdPoint<N> mean;
    double residual;  // Riemannian norm of the last tangent update
    int iterations;
};

struct KarcherOptions {
    double tolerance = 1e-10;
    int max_iterations = 100;
};

/// Weighted Karcher mean by the fixed-point iteration
///   mu <- exp_mu( sum_i w_i log_mu(p_i) ),
/// started from the heaviest point (lowest index on ties).
template <int N>
KarcherResult<N> karcher_mean_detailed(std::span<const SpdPoint<N>> points, std::span<const double> weights,
                                       KarcherOptions opts = {}) {
    if (points.empty()) throw BadWeights("Karcher mean of no points");
    if (points.size() != weights.size()) throw BadWeights("point and weight counts differ");
    const auto w = normalized_weights(weights);

    std::size_t start = 0;
    for (std::size_t i = 1; i < w.size(); ++i) {
        if (w[i] > w[start]) start = i;
    }
    SpdPoint<N> mu = points[start];
    bool all_equal = true;
    for (std::size_t i = 0; i < points.size() && all_equal; ++i) all_equal = w[i] == 0.0 || points[i] == mu;
    if (all_equal) return {mu, 0.0, 0};

    double residual = 0.0;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        const SpdFrame<N> frame(mu);
        // The update is accumulated in whitened coordinates, where the
        // Riemannian norm at mu is the plain Frobenius norm.
        SymMatrix<N> step;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (w[i] == 0.0) continue;
            step += w[i] * mat_log_spd(frame.whiten(points[i].sym()));
        }
        residual = step.frobenius_norm();
        mu = SpdPoint<N>(frame.color(mat_exp_sym(step).sym()), detail::Unchecked{});
        if (residual <= opts.tolerance) return {mu, residual, it};
    }
    return {mu, residual, opts.max_iterations};
}

template <int N>
SpdPoint<N> karcher_mean(std::span<const SpdPoint<N>> points, std::span<const double> weights) {
    return karcher_mean_detailed(points, weights).mean;
}

// ---------------------------------------------------------------------------
// Value spaces

template <class S>
concept ValueSpace = requires(const typename S::value_type& a, const typename S::tangent_type& v,
                              std::span<const typename S::value_type> values, std::span<const double> w) {
    { S::dist(a, a) } -> std::convertible_to<double>;
    { S::log_at(a, a) } -> std::convertible_to<typename S::tangent_type>;
    { S::exp_at(a, v) } -> std::convertible_to<typename S::value_type>;
    { S::weighted_mean(values, w) } -> std::convertible_to<typename S::value_type>;
    { S::mean(values) } -> std::convertible_to<typename S::value_type>;
};

/// The real line with ordinary arithmetic.
struct ScalarLine {
    using value_type = double;
    using tangent_type = double;

    static double dist(double a, double b) { return std::abs(a - b); }
    static double log_at(double base, double target) { return target - base; }
    static double exp_at(double base, double v) { return base + v; }

    static double weighted_mean(std::span<const double> values, std::span<const double> weights) {
        if (values.empty() || values.size() != weights.size()) throw BadWeights("value and weight counts differ");
        const auto w = normalized_weights(weights);
        double acc = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) acc += w[i] * values[i];
        return acc;
    }

    static double mean(std::span<const double> values) {
        if (values.empty()) throw EmptyDataset("mean of no values");
        // Centered on the first value so that identical inputs come back unchanged.
        double dev = 0.0;
        for (double v : values) dev += v - values[0];
        return values[0] + dev / static_cast<double>(values.size());
    }
};

/// SPD matrices with the affine-invariant metric.
template <int N = 3>
struct SpdManifold {
    using value_type = SpdPoint<N>;
    using tangent_type = SymMatrix<N>;

    static double dist(const value_type& a, const value_type& b) { return spd_dist(a, b); }
    static tangent_type log_at(const value_type& base, const value_type& target) { return spd_log(base, target); }
    static value_type exp_at(const value_type& base, const tangent_type& v) { return spd_exp(base, v); }

    static value_type weighted_mean(std::span<const value_type> values, std::span<const double> weights) {
        return karcher_mean(values, weights);
    }

    static value_type mean(std::span<const value_type> values) {
        if (values.empty()) throw EmptyDataset("mean of no values");
        const std::vector<double> w(values.size(), 1.0 / static_cast<double>(values.size()));
        return karcher_mean(values, std::span<const double>(w));
    }
};

static_assert(ValueSpace<ScalarLine>);
static_assert(ValueSpace<SpdManifold<3>>);

}  // namespace msqa
