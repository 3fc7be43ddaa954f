#pragma once

// Target functions, noise models and the Monte-Carlo drivers comparing a
// single-scale operator against its multiscale counterpart.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "msqa/errors.hpp"
#include "msqa/geometry.hpp"
#include "msqa/kernels.hpp"
#include "msqa/multiscale.hpp"
#include "msqa/operators.hpp"
#include "msqa/stats.hpp"

namespace msqa {

// ---------------------------------------------------------------------------
// Targets

/// exp(x^2 + y^2) + 3
inline double target_smooth(double x, double y) { return std::exp(x * x + y * y) + 3.0; }

/// sin(2 pi x) cos(4 pi y) (1 + nu p); nu = 0 gives the noiseless truth.
inline double target_wave(double x, double y, double nu, double p) {
    using std::numbers::pi;
    return std::sin(2.0 * pi * x) * std::cos(4.0 * pi * y) * (1.0 + nu * p);
}

/// The symmetric matrix field behind the SPD target.
inline SymMatrix<3> spd_field(double x, double y) {
    using std::numbers::pi;
    Matrix<3> a;
    a << std::sin(2.0 * pi * y) * std::cos(2.0 * pi * x), y * y, x * y,  //
        y * y, 1.0, 0.0,                                                 //
        x * y, 0.0, std::cos(pi * x);
    return SymMatrix<3>::symmetrize(a);
}

/// exp(sym(A (I + p Sigma))). The product is not symmetric in general and is
/// symmetrized before exponentiation; at p = 0 this is exp(A).
inline SpdPoint<3> target_spd(double x, double y, const SymMatrix<3>& sigma, double p) {
    const Matrix<3> a = spd_field(x, y).matrix();
    const Matrix<3> b = a * (Matrix<3>::Identity() + p * sigma.matrix());
    return mat_exp_sym(SymMatrix<3>::symmetrize(b));
}

// ---------------------------------------------------------------------------
// Random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

enum class StreamTag : std::uint64_t { Sites = 1, Noise = 2, Hierarchy = 3, Snr = 4 };

using Rng = std::mt19937_64;

/// Independent stream for (master seed, sweep index, trial index, purpose),
/// so results do not depend on which worker runs a trial.
inline Rng derive_stream(std::uint64_t seed, std::uint64_t sweep, std::uint64_t trial, StreamTag tag) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ sweep);
    h = splitmix64(h ^ (trial * 0x100000001b3ULL));
    h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return Rng(seq);
}

template <class R>
std::vector<Point> sample_sites(std::size_t count, R& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double x = u(rng);
        const double y = u(rng);
        out.emplace_back(x, y);
    }
    return out;
}

/// Symmetric matrix with i.i.d. N(0,1) upper triangle (diagonal included),
/// mirrored below.
template <int N, class R>
SymMatrix<N> draw_symmetric_normal(R& rng, std::normal_distribution<double>& g) {
    Matrix<N> m;
    for (int i = 0; i < N; ++i) {
        for (int j = i; j < N; ++j) {
            m(i, j) = g(rng);
            m(j, i) = m(i, j);
        }
    }
    return SymMatrix<N>::symmetrize(m);
}

template <int N, class R>
SymMatrix<N> draw_symmetric_normal(R& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    return draw_symmetric_normal<N>(rng, g);
}

/// Mean over a grid x grid lattice on [0,1]^2 and `draws` fresh Sigma per
/// lattice point of ||A||_F^2 / ||A Sigma||_F^2.
template <int N, class Field, class R>
double mean_frobenius_snr(Field&& field, int grid, int draws, R& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    double acc = 0.0;
    std::size_t count = 0;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            const double x = grid > 1 ? static_cast<double>(i) / (grid - 1) : 0.5;
            const double y = grid > 1 ? static_cast<double>(j) / (grid - 1) : 0.5;
            const Matrix<N> a = field(x, y);
            const double num = a.squaredNorm();
            for (int k = 0; k < draws; ++k) {
                const auto sigma = draw_symmetric_normal<N>(rng, gauss);
                acc += num / (a * sigma.matrix()).squaredNorm();
                ++count;
            }
        }
    }
    return acc / static_cast<double>(count);
}

inline constexpr int kSnrGrid = 50;
inline constexpr int kSnrDraws = 1000;

/// Numerical SNR of the SPD target. The ratio does not involve p; p only
/// has to be positive.
template <class R>
double snr_numeric_spd(double p, R& rng) {
    if (!(p > 0.0)) throw ConfigError("snr_numeric_spd needs p > 0");
    return mean_frobenius_snr<3>([](double x, double y) { return spd_field(x, y).matrix(); }, kSnrGrid, kSnrDraws, rng);
}

/// Noise scale for a signal-to-noise ratio: SNR = 1 / p^2.
inline double noise_scale_from_snr(double snr) {
    if (!(snr > 0.0)) throw ConfigError("SNR must be positive");
    return 1.0 / std::sqrt(snr);
}

// ---------------------------------------------------------------------------
// Parallel execution

/// Runs fn(i) for i in [0, count) on `workers` threads (0 = hardware
/// concurrency). The first exception thrown is rethrown after all threads join.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
    std::size_t n = workers > 0 ? static_cast<std::size_t>(workers) : std::max(1u, std::thread::hardware_concurrency());
    n = std::min(n, count);
    if (n <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(n);
        for (std::size_t w = 0; w < n; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        next = count;
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Experiment driver

enum class ExperimentKind { MlsSize, ShepardSnr, SpdSnr };

inline std::string experiment_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::MlsSize: return "mls-size";
        case ExperimentKind::ShepardSnr: return "shepard-snr";
        case ExperimentKind::SpdSnr: return "spd-snr";
    }
    return "";
}

inline std::optional<ExperimentKind> parse_experiment(const std::string& s) {
    if (s == "mls-size") return ExperimentKind::MlsSize;
    if (s == "shepard-snr") return ExperimentKind::ShepardSnr;
    if (s == "spd-snr") return ExperimentKind::SpdSnr;
    return std::nullopt;
}

inline std::string param_name(ExperimentKind k) { return k == ExperimentKind::MlsSize ? "size" : "snr"; }

inline std::vector<double> default_sweep(ExperimentKind k) {
    if (k == ExperimentKind::MlsSize) return {100, 200, 400, 800};
    return {0.25, 0.5, 1, 2, 4, 8, 16};
}

inline constexpr std::size_t kWaveSites = 196;  // 14^2
inline constexpr std::size_t kSpdSites = 121;   // 11^2

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::ShepardSnr;
    int trials = 100;
    int levels = 3;
    double lambda = 0.8;
    std::uint64_t seed = 42;
    std::vector<double> sweep;  // empty: default_sweep(experiment)
    int grid = 21;              // evaluation lattice is grid x grid on [0.05, 0.95]^2
    int workers = 0;            // 0: hardware concurrency
    /// Reuse trial 0's sites and hierarchy in every trial; only noise varies.
    bool frozen_design = false;
    TangentFrame frame = TangentFrame::Identity;

    std::vector<double> effective_sweep() const { return sweep.empty() ? default_sweep(experiment) : sweep; }

    void validate() const {
        if (trials < 2) throw ConfigError("trials must be >= 2");
        HierarchySpec{levels, lambda}.validate();
        if (grid < 1) throw ConfigError("grid must be >= 1");
        if (workers < 0) throw ConfigError("workers must be >= 0");
        const auto s = effective_sweep();
        if (s.empty()) throw ConfigError("sweep is empty");
        for (double v : s) {
            if (experiment == ExperimentKind::MlsSize) {
                if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("dataset sizes must be positive integers");
            } else if (!(v > 0.0) || !std::isfinite(v)) {
                throw ConfigError("SNR values must be positive");
            }
        }
    }
};

inline std::vector<Point> evaluation_grid(int n) {
    std::vector<Point> out;
    out.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double x = n > 1 ? 0.05 + 0.9 * i / (n - 1) : 0.5;
            const double y = n > 1 ? 0.05 + 0.9 * j / (n - 1) : 0.5;
            out.emplace_back(x, y);
        }
    }
    return out;
}

struct MethodResult {
    std::vector<PointMetrics> points;
    MetricSummaries summary;
};

struct SweepResult {
    double param_value = 0.0;
    double noise_scale = 0.0;  // p; 0 for the noiseless size sweep
    MethodResult single;
    MethodResult multi;
};

struct MetricsTable {
    ExperimentKind experiment;
    std::vector<SweepResult> rows;
    std::optional<double> spd_snr_ratio;  // mean ||A||^2 / ||A Sigma||^2 for spd-snr
};

namespace detail {

template <ValueSpace Space>
MethodResult reduce_trials(const TrialEvaluations<Space>& evals, int workers) {
    evals.validate();
    MethodResult r;
    r.points.resize(evals.points());
    parallel_for(evals.points(), workers, [&](std::size_t k) { r.points[k] = point_metrics(evals, k); });
    r.summary = summarize(r.points);
    return r;
}

struct TrialStreams {
    Rng sites;
    Rng noise;
    Rng hierarchy;
};

inline TrialStreams trial_streams(const ExperimentConfig& cfg, std::size_t sweep, std::size_t trial) {
    const std::size_t design = cfg.frozen_design ? 0 : trial;
    return {derive_stream(cfg.seed, sweep, design, StreamTag::Sites), derive_stream(cfg.seed, sweep, trial, StreamTag::Noise),
            derive_stream(cfg.seed, sweep, design, StreamTag::Hierarchy)};
}

inline SweepResult run_scalar_sweep(const ExperimentConfig& cfg, std::size_t sweep_index, double value) {
    const bool size_sweep = cfg.experiment == ExperimentKind::MlsSize;
    const std::size_t n_sites = size_sweep ? static_cast<std::size_t>(value) : kWaveSites;
    const double p = size_sweep ? 0.0 : noise_scale_from_snr(value);
    const Method method = size_sweep ? Method::Mls : Method::Shepard;
    const KernelRule rule{size_sweep ? KernelFamily::Gaussian : KernelFamily::Wendland, 3.0, std::nullopt};
    const HierarchySpec hspec{cfg.levels, cfg.lambda};
    const auto grid = evaluation_grid(cfg.grid);

    TrialEvaluations<ScalarLine> single, multi;
    single.per_trial.resize(static_cast<std::size_t>(cfg.trials));
    multi.per_trial.resize(static_cast<std::size_t>(cfg.trials));
    for (const Point& s : grid) single.truth.push_back(size_sweep ? target_smooth(s.x(), s.y()) : target_wave(s.x(), s.y(), 0.0, 0.0));
    multi.truth = single.truth;

    parallel_for(static_cast<std::size_t>(cfg.trials), cfg.workers, [&](std::size_t t) {
        try {
            auto streams = trial_streams(cfg, sweep_index, t);
            auto sites = sample_sites(n_sites, streams.sites);
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::vector<double> values;
            values.reserve(sites.size());
            for (const Point& x : sites) {
                values.push_back(size_sweep ? target_smooth(x.x(), x.y()) : target_wave(x.x(), x.y(), gauss(streams.noise), p));
            }
            const ScalarDataset data(std::move(sites), std::move(values));
            const auto hierarchy = build_hierarchy(data.size(), hspec, streams.hierarchy);

            const ScalarApproximant q(data, rule.for_sites(data.sites()), method);
            const auto fit = ms_fit_scalar(data, hierarchy, rule, method);

            auto& srow = single.per_trial[t];
            auto& mrow = multi.per_trial[t];
            srow.reserve(grid.size());
            mrow.reserve(grid.size());
            for (const Point& s : grid) {
                srow.push_back(q.eval(s));
                mrow.push_back(fit.approximant.eval(s));
            }
        } catch (const std::exception& e) {
            throw Error(experiment_name(cfg.experiment) + " value " + std::to_string(value) + " trial " + std::to_string(t) +
                        ": " + e.what());
        }
    });

    return {value, p, reduce_trials(single, cfg.workers), reduce_trials(multi, cfg.workers)};
}

inline SweepResult run_spd_sweep(const ExperimentConfig& cfg, std::size_t sweep_index, double value) {
    const double p = noise_scale_from_snr(value);
    const KernelRule rule{KernelFamily::Wendland, 3.0, std::nullopt};
    const HierarchySpec hspec{cfg.levels, cfg.lambda};
    const auto grid = evaluation_grid(cfg.grid);
    using Space = SpdManifold<3>;

    TrialEvaluations<Space> single, multi;
    single.per_trial.resize(static_cast<std::size_t>(cfg.trials));
    multi.per_trial.resize(static_cast<std::size_t>(cfg.trials));
    for (const Point& s : grid) single.truth.push_back(target_spd(s.x(), s.y(), SymMatrix<3>::zero(), 0.0));
    multi.truth = single.truth;

    parallel_for(static_cast<std::size_t>(cfg.trials), cfg.workers, [&](std::size_t t) {
        try {
            auto streams = trial_streams(cfg, sweep_index, t);
            auto sites = sample_sites(kSpdSites, streams.sites);
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::vector<SpdPoint<3>> values;
            values.reserve(sites.size());
            for (const Point& x : sites) {
                const auto sigma = draw_symmetric_normal<3>(streams.noise, gauss);
                values.push_back(target_spd(x.x(), x.y(), sigma, p));
            }
            const SpdDataset<3> data(std::move(sites), std::move(values));
            const auto hierarchy = build_hierarchy(data.size(), hspec, streams.hierarchy);

            const SpdApproximant<3> q(data, rule.for_sites(data.sites()));
            const auto fit = ms_fit_manifold(data, hierarchy, rule, cfg.frame);

            auto& srow = single.per_trial[t];
            auto& mrow = multi.per_trial[t];
            srow.reserve(grid.size());
            mrow.reserve(grid.size());
            for (const Point& s : grid) {
                srow.push_back(q.eval(s));
                mrow.push_back(fit.approximant.eval(s));
            }
        } catch (const std::exception& e) {
            throw Error(experiment_name(cfg.experiment) + " value " + std::to_string(value) + " trial " + std::to_string(t) +
                        ": " + e.what());
        }
    });

    return {value, p, reduce_trials(single, cfg.workers), reduce_trials(multi, cfg.workers)};
}

}  // namespace detail

/// Runs every sweep value of the experiment. Within a trial the single-scale
/// and multiscale operators see the same sites and the same noise.
inline MetricsTable run_experiment(const ExperimentConfig& cfg,
                                   const std::function<void(const std::string&)>& progress = {}) {
    cfg.validate();
    MetricsTable table{cfg.experiment, {}, std::nullopt};
    const auto sweep = cfg.effective_sweep();
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        if (cfg.experiment == ExperimentKind::SpdSnr) {
            table.rows.push_back(detail::run_spd_sweep(cfg, i, sweep[i]));
        } else {
            table.rows.push_back(detail::run_scalar_sweep(cfg, i, sweep[i]));
        }
        if (progress) {
            progress(experiment_name(cfg.experiment) + " " + param_name(cfg.experiment) + "=" + std::to_string(sweep[i]) +
                     " done");
        }
    }
    if (cfg.experiment == ExperimentKind::SpdSnr) {
        auto rng = derive_stream(cfg.seed, 0, 0, StreamTag::Snr);
        table.spd_snr_ratio = snr_numeric_spd(1.0, rng);
    }
    return table;
}

}  // namespace msqa
