#pragma once

// Nested random hierarchies and the iterative multiscale error-correction
// scheme
//   M_i = M_{i-1} + Q_i E_{i-1},   E_i = E_{i-1} - Q_i E_{i-1},
//   M_0 = 0, E_0 f = f,
// for scalar data and, with exp/log in place of +/-, for SPD-valued data.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msqa/errors.hpp"
#include "msqa/geometry.hpp"
#include "msqa/kernels.hpp"
#include "msqa/operators.hpp"

namespace msqa {

struct HierarchySpec {
    int levels = 3;
    double lambda = 0.8;

    void validate() const {
        if (levels < 1) throw ConfigError("levels must be >= 1, got " + std::to_string(levels));
        if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in (0, 1], got " + std::to_string(lambda));
    }
};

/// Index sets X_1 c X_2 c ... c X_n = {0..N-1}, each sorted ascending.
struct Hierarchy {
    std::vector<std::vector<std::size_t>> subsets;

    int levels() const { return static_cast<int>(subsets.size()); }
    std::span<const std::size_t> level(int i) const { return subsets[static_cast<std::size_t>(i)]; }
};

/// Size of X_{i-1} given |X_i|: round(lambda |X_i|), at least 1.
inline std::size_t coarser_size(std::size_t finer, double lambda) {
    const auto k = static_cast<std::size_t>(std::llround(lambda * static_cast<double>(finer)));
    return std::clamp<std::size_t>(k, 1, finer);
}

template <class Rng>
Hierarchy build_hierarchy(std::size_t n, const HierarchySpec& spec, Rng& rng) {
    spec.validate();
    if (n == 0) throw EmptyDataset("hierarchy over no sites");
    Hierarchy h;
    h.subsets.resize(static_cast<std::size_t>(spec.levels));
    auto& top = h.subsets.back();
    top.resize(n);
    std::iota(top.begin(), top.end(), std::size_t{0});

    for (int i = spec.levels - 1; i > 0; --i) {
        std::vector<std::size_t> pool = h.subsets[static_cast<std::size_t>(i)];
        const std::size_t k = coarser_size(pool.size(), spec.lambda);
        // Partial Fisher-Yates: the first k entries become a uniform sample.
        for (std::size_t j = 0; j < k; ++j) {
            std::uniform_int_distribution<std::size_t> pick(j, pool.size() - 1);
            std::swap(pool[j], pool[pick(rng)]);
        }
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        h.subsets[static_cast<std::size_t>(i - 1)] = std::move(pool);
    }
    return h;
}

/// Chooses the kernel of a level from that level's sites:
/// delta = mesh_factor * mesh_norm(sites), unless a fixed delta is set.
struct KernelRule {
    KernelFamily family = KernelFamily::Wendland;
    double mesh_factor = 3.0;
    std::optional<double> fixed_delta;

    KernelSpec for_sites(std::span<const Point> sites) const {
        if (fixed_delta) return KernelSpec(family, *fixed_delta);
        return KernelSpec(family, mesh_factor * mesh_norm(sites));
    }
};

// ---------------------------------------------------------------------------
// Scalar

class ScalarMultiscale {
public:
    explicit ScalarMultiscale(std::vector<ScalarApproximant> levels) : levels_(std::move(levels)) {
        if (levels_.empty()) throw ConfigError("multiscale approximant needs at least one level");
    }

    /// M_n f (s) = sum of all level corrections.
    double eval(const Point& s) const { return eval_partial(s, levels()); }

    /// M_k f (s) for 1 <= k <= n.
    double eval_partial(const Point& s, int k) const {
        double acc = levels_[0].eval(s);
        for (int i = 1; i < k; ++i) acc += levels_[static_cast<std::size_t>(i)].eval(s);
        return acc;
    }

    int levels() const { return static_cast<int>(levels_.size()); }
    const ScalarApproximant& level(int i) const { return levels_[static_cast<std::size_t>(i)]; }

private:
    std::vector<ScalarApproximant> levels_;
};

struct ScalarMultiscaleFit {
    ScalarMultiscale approximant;
    /// residuals[i][j] = (E_i f)(x_j) for i = 0..n at every site j.
    std::vector<std::vector<double>> residuals;
    /// max_j |(E_i f)(x_j)| over j in X_i, for i = 1..n.
    std::vector<double> max_level_residual;
};

inline ScalarMultiscaleFit ms_fit_scalar(const ScalarDataset& data, const Hierarchy& hierarchy, const KernelRule& rule,
                                         Method method) {
    if (hierarchy.levels() < 1) throw ConfigError("empty hierarchy");
    if (hierarchy.subsets.back().size() != data.size()) throw ConfigError("hierarchy does not cover the dataset");

    std::vector<std::vector<double>> residuals;
    residuals.emplace_back(data.values().begin(), data.values().end());
    std::vector<ScalarApproximant> levels;
    std::vector<double> max_res;

    for (int i = 0; i < hierarchy.levels(); ++i) {
        const auto idx = hierarchy.level(i);
        const auto& e = residuals.back();
        std::vector<Point> sites;
        std::vector<double> values;
        sites.reserve(idx.size());
        values.reserve(idx.size());
        for (std::size_t j : idx) {
            sites.push_back(data.site(j));
            values.push_back(e[j]);
        }
        const KernelSpec kernel = rule.for_sites(sites);
        levels.emplace_back(ScalarDataset(std::move(sites), std::move(values)), kernel, method);

        const auto& q = levels.back();
        std::vector<double> next(e.size());
        for (std::size_t j = 0; j < e.size(); ++j) next[j] = e[j] - q.eval(data.site(j));
        double m = 0.0;
        for (std::size_t j : idx) m = std::max(m, std::abs(next[j]));
        max_res.push_back(m);
        residuals.push_back(std::move(next));
    }
    return {ScalarMultiscale(std::move(levels)), std::move(residuals), std::move(max_res)};
}

inline double ms_eval_scalar(const ScalarMultiscale& approx, const Point& s) { return approx.eval(s); }

// ---------------------------------------------------------------------------
// SPD-valued

/// How residual tangent vectors at different base points are brought into
/// one space before interpolation.
enum class TangentFrame {
    /// Whitened at the base point, c^{-1/2} v c^{-1/2}: parallel transport of
    /// log_c(f) to the identity along the geodesic, and back at evaluation.
    Identity,
    /// Raw log_c(f), read as a plain symmetric matrix.
    Ambient,
};

/// Entrywise Shepard interpolation of a symmetric-matrix field.
template <int N>
class TangentShepard {
public:
    TangentShepard(std::vector<Point> sites, std::vector<SymMatrix<N>> values, KernelSpec kernel)
        : sites_(std::move(sites)), values_(std::move(values)), kernel_(kernel) {
        if (sites_.empty()) throw EmptyDataset("tangent field with no sites");
    }

    SymMatrix<N> eval(const Point& s) const {
        const auto w = shepard_weights(sites_, kernel_, s);
        SymMatrix<N> acc;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] != 0.0) acc += w[i] * values_[i];
        }
        return acc;
    }

    std::span<const Point> sites() const { return sites_; }
    std::span<const SymMatrix<N>> values() const { return values_; }
    const KernelSpec& kernel() const { return kernel_; }

private:
    std::vector<Point> sites_;
    std::vector<SymMatrix<N>> values_;
    KernelSpec kernel_;
};

template <int N>
SpdPoint<N> apply_tangent(const SpdPoint<N>& base, const SymMatrix<N>& v, TangentFrame frame) {
    if (frame == TangentFrame::Ambient) return spd_exp(base, v);
    const SpdFrame<N> f(base);
    return SpdPoint<N>(f.color(mat_exp_sym(v).sym()), detail::Unchecked{});
}

template <int N>
SymMatrix<N> residual_tangent(const SpdPoint<N>& base, const SpdPoint<N>& target, TangentFrame frame) {
    if (frame == TangentFrame::Ambient) return spd_log(base, target);
    const SpdFrame<N> f(base);
    return mat_log_spd(f.whiten(target.sym()));
}

template <int N = 3>
class SpdMultiscale {
public:
    SpdMultiscale(SpdApproximant<N> base, std::vector<TangentShepard<N>> corrections, TangentFrame frame)
        : base_(std::move(base)), corrections_(std::move(corrections)), frame_(frame) {}

    SpdPoint<N> eval(const Point& s) const { return eval_partial(s, levels()); }

    SpdPoint<N> eval_partial(const Point& s, int k) const {
        SpdPoint<N> p = base_.eval(s);
        for (int i = 1; i < k; ++i) p = apply_tangent(p, corrections_[static_cast<std::size_t>(i - 1)].eval(s), frame_);
        return p;
    }

    int levels() const { return 1 + static_cast<int>(corrections_.size()); }
    const SpdApproximant<N>& base() const { return base_; }
    const TangentShepard<N>& correction(int level) const { return corrections_[static_cast<std::size_t>(level - 1)]; }
    TangentFrame frame() const { return frame_; }

private:
    SpdApproximant<N> base_;
    std::vector<TangentShepard<N>> corrections_;
    TangentFrame frame_;
};

template <int N>
struct SpdMultiscaleFit {
    SpdMultiscale<N> approximant;
    /// approximations[i][j] = (M_{i+1} f)(x_j) at every site j.
    std::vector<std::vector<SpdPoint<N>>> approximations;
};

template <int N>
SpdMultiscaleFit<N> ms_fit_manifold(const SpdDataset<N>& data, const Hierarchy& hierarchy, const KernelRule& rule,
                                    TangentFrame frame = TangentFrame::Identity) {
    if (hierarchy.levels() < 1) throw ConfigError("empty hierarchy");
    if (hierarchy.subsets.back().size() != data.size()) throw ConfigError("hierarchy does not cover the dataset");

    auto first = data.subset(hierarchy.level(0));
    const KernelSpec k0 = rule.for_sites(first.sites());
    SpdApproximant<N> base(std::move(first), k0);

    std::vector<std::vector<SpdPoint<N>>> history;
    std::vector<SpdPoint<N>> current;
    current.reserve(data.size());
    for (std::size_t j = 0; j < data.size(); ++j) current.push_back(base.eval(data.site(j)));
    history.push_back(current);

    std::vector<TangentShepard<N>> corrections;
    for (int i = 1; i < hierarchy.levels(); ++i) {
        const auto idx = hierarchy.level(i);
        std::vector<Point> sites;
        std::vector<SymMatrix<N>> tangents;
        for (std::size_t j : idx) {
            sites.push_back(data.site(j));
            tangents.push_back(residual_tangent(current[j], data.value(j), frame));
        }
        const KernelSpec kernel = rule.for_sites(sites);
        corrections.emplace_back(std::move(sites), std::move(tangents), kernel);
        const auto& t = corrections.back();
        for (std::size_t j = 0; j < data.size(); ++j) current[j] = apply_tangent(current[j], t.eval(data.site(j)), frame);
        history.push_back(current);
    }
    return {SpdMultiscale<N>(std::move(base), std::move(corrections), frame), std::move(history)};
}

template <int N>
SpdPoint<N> ms_eval_manifold(const SpdMultiscale<N>& approx, const Point& s) {
    return approx.eval(s);
}

}  // namespace msqa
