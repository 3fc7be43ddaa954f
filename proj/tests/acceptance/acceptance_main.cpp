// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Optional arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "msqa/csv.hpp"
#include "msqa/experiments.hpp"
#include "msqa/geometry.hpp"
#include "msqa/multiscale.hpp"
#include "msqa/operators.hpp"
#include "msqa/stats.hpp"
#include "test_support.hpp"

namespace {

using namespace msqa;
using Clock = std::chrono::steady_clock;
using testing::Rng;

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::vector<Point> random_sites(Rng& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point> s;
    for (std::size_t i = 0; i < n; ++i) s.emplace_back(u(rng), u(rng));
    return s;
}

// 1 ---------------------------------------------------------------------------

Outcome bvt_identity() {
    Outcome o;
    Rng rng(101);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> trials(2, 60);
    double worst = 0.0;
    for (int set = 0; set < 1000; ++set) {
        std::vector<double> v(static_cast<std::size_t>(trials(rng)));
        const double offset = 2.0 * g(rng), spread = std::exp(g(rng));
        for (double& x : v) x = offset + spread * g(rng);
        const double truth = g(rng);
        const auto m = point_metrics<ScalarLine>(std::span<const double>(v), truth);
        const double gap = std::abs(m.mse - (m.bias + m.variance));
        worst = std::max(worst, gap);
        if (!(gap <= 1e-10)) o.fail("mse - bias - variance = " + fmt("%.3e", gap));
        if (!(m.bias_ratio >= 0.0 && m.bias_ratio <= 1.0)) o.fail("bias ratio " + fmt("%.17g", m.bias_ratio));
    }
    if (o.pass) o.detail = "max |mse-bias-var| " + fmt("%.2e", worst);
    return o;
}

// 2 ---------------------------------------------------------------------------

Outcome telescoping() {
    Outcome o;
    Rng rng(202);
    std::uniform_int_distribution<std::size_t> size(5, 200);
    std::uniform_int_distribution<int> levels(1, 5);
    std::uniform_real_distribution<double> lam(0.3, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    int cases = 0;
    for (int t = 0; t < 40; ++t) {
        const auto sites = random_sites(rng, size(rng));
        std::vector<double> f;
        for (const auto& s : sites) f.push_back(std::sin(5 * s.x()) * std::cos(3 * s.y()) + 0.3 * g(rng));
        const ScalarDataset data(sites, f);
        const HierarchySpec spec{levels(rng), lam(rng)};
        for (Method method : {Method::Shepard, Method::Mls}) {
            const KernelRule rule{method == Method::Mls ? KernelFamily::Gaussian : KernelFamily::Wendland, 3.0, {}};
            const auto h = build_hierarchy(data.size(), spec, rng);
            const auto fit = ms_fit_scalar(data, h, rule, method);
            for (int i = 1; i <= h.levels(); ++i) {
                for (std::size_t j = 0; j < data.size(); ++j) {
                    const double m = fit.approximant.eval_partial(data.site(j), i);
                    const double gap = std::abs(m + fit.residuals[static_cast<std::size_t>(i)][j] - f[j]);
                    worst = std::max(worst, gap);
                    if (!(gap <= 1e-10)) o.fail("M_i + E_i - f = " + fmt("%.3e", gap));
                }
            }

            const auto h1 = build_hierarchy(data.size(), HierarchySpec{1, spec.lambda}, rng);
            const auto one = ms_fit_scalar(data, h1, rule, method);
            const auto x1 = data.subset(h1.level(0));
            const ScalarApproximant single(x1, rule.for_sites(x1.sites()), method);
            for (const auto& q : random_sites(rng, 50)) {
                if (one.approximant.eval(q) != single.eval(q)) o.fail("levels=1 differs from single-scale");
            }
            ++cases;
        }
    }
    if (o.pass) o.detail = std::to_string(cases) + " fits, max gap " + fmt("%.2e", worst);
    return o;
}

// 3 ---------------------------------------------------------------------------

Outcome reproduction() {
    Outcome o;
    Rng rng(303);
    std::normal_distribution<double> g(0.0, 2.0);
    std::uniform_int_distribution<std::size_t> size(10, 200);
    std::uniform_real_distribution<double> delta(0.05, 0.6);
    double worst_c = 0.0, worst_l = 0.0;
    for (int t = 0; t < 100; ++t) {
        const auto sites = random_sites(rng, size(rng));

        const double c = g(rng);
        const ScalarDataset cdata(sites, std::vector<double>(sites.size(), c));
        const KernelSpec wk(KernelFamily::Wendland, delta(rng));
        std::vector<double> f;
        for (std::size_t i = 0; i < sites.size(); ++i) f.push_back(g(rng));
        const ScalarDataset fdata(sites, f);
        const double lo = *std::min_element(f.begin(), f.end()), hi = *std::max_element(f.begin(), f.end());

        const double a = g(rng), b = g(rng), d = g(rng);
        std::vector<double> lin;
        for (const auto& s : sites) lin.push_back(a + b * s.x() + d * s.y());
        const ScalarDataset ldata(sites, lin);
        const KernelSpec gk(KernelFamily::Gaussian, 3.0 * mesh_norm(sites));

        for (const auto& q : random_sites(rng, 20)) {
            const double ec = std::abs(shepard_eval(cdata, wk, q) - c);
            worst_c = std::max(worst_c, ec);
            if (!(ec <= 1e-12 * std::max(1.0, std::abs(c)))) o.fail("Shepard constant error " + fmt("%.3e", ec));
            const double v = shepard_eval(fdata, wk, q);
            if (!(v >= lo && v <= hi)) o.fail("Shepard value outside data range");
            const double el = std::abs(mls_eval(ldata, gk, q) - (a + b * q.x() + d * q.y()));
            worst_l = std::max(worst_l, el);
            if (!(el <= 1e-8)) o.fail("MLS linear error " + fmt("%.3e", el));
        }
    }
    if (o.pass) o.detail = "Shepard const err " + fmt("%.2e", worst_c) + ", MLS linear err " + fmt("%.2e", worst_l);
    return o;
}

// 4 ---------------------------------------------------------------------------

double karcher_objective(const SpdPoint<3>& mu, std::span<const SpdPoint<3>> pts, std::span<const double> w) {
    double f = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d = spd_dist(mu, pts[i]);
        f += w[i] * d * d;
    }
    return f;
}

Outcome spd_geometry() {
    Outcome o;
    Rng rng(404);
    double worst_rt = 0.0, worst_aff = 0.0, worst_comm = 0.0;

    for (int t = 0; t < 100; ++t) {
        const auto p = testing::random_spd(rng), q = testing::random_spd(rng);
        const auto s = testing::random_symmetric(rng, 0.8);
        const double e1 = testing::frob(mat_exp_sym(mat_log_spd(p)).matrix(), p.matrix());
        const double e2 = (mat_log_spd(mat_exp_sym(s)).matrix() - s.matrix()).norm();
        const double e3 = testing::frob(spd_exp(p, spd_log(p, q)).matrix(), q.matrix());
        const double e4 = (spd_log(p, spd_exp(p, s)).matrix() - s.matrix()).norm();
        const double rt = std::max({e1, e2, e3, e4});
        worst_rt = std::max(worst_rt, rt);
        if (!(rt <= 1e-8)) o.fail("round trip error " + fmt("%.3e", rt));

        const auto gm = testing::random_invertible(rng);
        const double aff =
            std::abs(spd_dist(testing::congruence(gm, p), testing::congruence(gm, q)) - spd_dist(p, q));
        worst_aff = std::max(worst_aff, aff);
        if (!(aff <= 1e-8)) o.fail("affine invariance error " + fmt("%.3e", aff));
    }

    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int t = 0; t < 20; ++t) {
        const int n = 2 + t % 6;
        std::vector<SpdPoint<3>> pts;
        std::vector<double> w;
        Vector<3> logmean = Vector<3>::Zero();
        double wsum = 0.0;
        for (int i = 0; i < n; ++i) w.push_back(u(rng)), wsum += w.back();
        for (int i = 0; i < n; ++i) {
            w[static_cast<std::size_t>(i)] /= wsum;
            const Vector<3> l(g(rng), g(rng), g(rng));
            logmean += w[static_cast<std::size_t>(i)] * l;
            pts.push_back(mat_exp_sym(SymMatrix<3>::diagonal(l)));
        }
        const auto mu = karcher_mean(std::span<const SpdPoint<3>>(pts), std::span<const double>(w));
        const Matrix<3> expect = logmean.array().exp().matrix().asDiagonal();
        const double e = testing::frob(mu.matrix(), expect);
        worst_comm = std::max(worst_comm, e);
        if (!(e <= 1e-8)) o.fail("commuting Karcher error " + fmt("%.3e", e));
    }

    std::vector<SpdPoint<3>> pts;
    std::vector<double> w;
    for (int i = 0; i < 7; ++i) {
        pts.push_back(testing::random_spd(rng));
        w.push_back(u(rng));
    }
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= wsum;
    const auto mu = karcher_mean(std::span<const SpdPoint<3>>(pts), std::span<const double>(w));
    const double f0 = karcher_objective(mu, pts, w);
    int worse = 0;
    for (int t = 0; t < 100; ++t) {
        const double eps = std::pow(10.0, -1.0 - 2.0 * (t % 3));
        const auto v = testing::random_symmetric(rng);
        const auto moved = spd_exp(mu, eps * (1.0 / spd_tangent_norm(mu, v)) * v);
        if (!(karcher_objective(moved, pts, w) >= f0)) ++worse;
    }
    if (worse > 0) o.fail(std::to_string(worse) + " perturbations lowered the Karcher objective");

    if (o.pass) {
        o.detail = "round trip " + fmt("%.2e", worst_rt) + ", affine " + fmt("%.2e", worst_aff) + ", commuting " +
                   fmt("%.2e", worst_comm);
    }
    return o;
}

// 5-8 -------------------------------------------------------------------------

struct Run {
    MetricsTable table;
    std::string csv;
    double seconds;
};

Run run(ExperimentKind kind, int workers) {
    ExperimentConfig cfg;
    cfg.experiment = kind;
    cfg.workers = workers;
    const auto t0 = Clock::now();
    auto table = run_experiment(cfg);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::ostringstream out;
    write_csv(out, to_rows(table));
    return {std::move(table), out.str(), secs};
}

std::string row_label(const SweepResult& r) { return fmt("%g", r.param_value); }

Outcome mls_size_trend(const Run& r) {
    Outcome o;
    for (const auto& row : r.table.rows) {
        const auto &s = row.single.summary, &m = row.multi.summary;
        if (!(m.bias_ratio.p50 < s.bias_ratio.p50)) o.fail("size " + row_label(row) + ": multi BR not below single");
        if (!(m.mse.p50 < s.mse.p50)) o.fail("size " + row_label(row) + ": multi MSE not below single");
    }
    const auto& last = r.table.rows.back().single.summary;
    if (!(last.bias_ratio.p50 > 0.9)) o.fail("single BR at largest size " + fmt("%.4f", last.bias_ratio.p50));
    if (r.seconds >= 600.0) o.fail("runtime " + fmt("%.0f s", r.seconds));
    if (o.pass) {
        o.detail = "single BR@800 " + fmt("%.4f", last.bias_ratio.p50) + ", multi BR@800 " +
                   fmt("%.4f", r.table.rows.back().multi.summary.bias_ratio.p50);
    }
    return o;
}

Outcome shepard_snr_trend(const Run& r) {
    Outcome o;
    for (const auto& row : r.table.rows) {
        const auto &s = row.single.summary, &m = row.multi.summary;
        if (!(m.bias_ratio.p50 < s.bias_ratio.p50)) o.fail("SNR " + row_label(row) + ": multi BR not below single");
        if (row.param_value > 0.5 && !(m.mse.p50 < s.mse.p50)) o.fail("SNR " + row_label(row) + ": multi MSE not below single");
        if (row.param_value == 0.25 && !(m.mse.p25 <= s.mse.p75 && s.mse.p25 <= m.mse.p75)) {
            o.fail("SNR 0.25: MSE bands do not overlap");
        }
    }
    if (r.seconds >= 600.0) o.fail("runtime " + fmt("%.0f s", r.seconds));
    return o;
}

Outcome spd_snr_trend(const Run& r) {
    Outcome o;
    double worst = 0.0;
    for (const auto& row : r.table.rows) {
        if (!(row.multi.summary.bias_ratio.p50 < row.single.summary.bias_ratio.p50)) {
            o.fail("SNR " + row_label(row) + ": multi BR not below single");
        }
        for (const auto* m : {&row.single, &row.multi}) {
            for (const auto& p : m->points) {
                worst = std::max(worst, p.bias_ratio);
                if (!(p.bias_ratio <= 1.0 + 1e-8)) o.fail("point bias ratio " + fmt("%.17g", p.bias_ratio));
            }
        }
    }
    if (r.seconds >= 1800.0) o.fail("runtime " + fmt("%.0f s", r.seconds));
    if (o.pass) o.detail = "max point BR " + fmt("%.6f", worst);
    return o;
}

void report(int id, const Outcome& o, double secs) {
    std::printf("[%s] criterion %d (%.2f s)%s%s\n", o.pass ? "PASS" : "FAIL", id, secs, o.detail.empty() ? "" : ": ",
                o.detail.c_str());
    std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    auto want = [&](int id) { return wanted.empty() || wanted.count(id) > 0; };
    bool ok = true;

    auto timed = [&](int id, double limit, const std::function<Outcome()>& fn) {
        if (!want(id)) return;
        const auto t0 = Clock::now();
        Outcome o = fn();
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        if (secs >= limit) o.fail("runtime " + fmt("%.2f s", secs) + " over " + fmt("%.0f s", limit));
        report(id, o, secs);
        ok = ok && o.pass;
    };
    timed(1, 1.0, bvt_identity);
    timed(2, 5.0, telescoping);
    timed(3, 5.0, reproduction);
    timed(4, 10.0, spd_geometry);

    const bool need_runs = want(5) || want(6) || want(7) || want(8);
    if (!need_runs) return ok ? 0 : 1;

    const std::vector<ExperimentKind> kinds{ExperimentKind::MlsSize, ExperimentKind::ShepardSnr, ExperimentKind::SpdSnr};
    std::map<ExperimentKind, Run> first;
    for (auto kind : kinds) {
        const int id = 5 + static_cast<int>(kind);
        if (!want(id) && !want(8)) continue;
        first.emplace(kind, run(kind, 0));
        const Run& r = first.at(kind);
        if (!want(id)) continue;
        const Outcome o = kind == ExperimentKind::MlsSize      ? mls_size_trend(r)
                          : kind == ExperimentKind::ShepardSnr ? shepard_snr_trend(r)
                                                               : spd_snr_trend(r);
        report(id, o, r.seconds);
        ok = ok && o.pass;
    }

    if (want(8)) {
        Outcome o;
        const auto t0 = Clock::now();
        const int other = static_cast<int>(std::max(1u, std::thread::hardware_concurrency())) + 1;
        for (auto kind : kinds) {
            const std::string& base = first.at(kind).csv;
            if (run(kind, 0).csv != base) o.fail(experiment_name(kind) + ": same-seed rerun differs");
            if (run(kind, other).csv != base) o.fail(experiment_name(kind) + ": rerun with " + std::to_string(other) + " workers differs");
        }
        if (o.pass) o.detail = "same seed and " + std::to_string(other) + " workers byte-identical";
        report(8, o, std::chrono::duration<double>(Clock::now() - t0).count());
        ok = ok && o.pass;
    }
    return ok ? 0 : 1;
}
