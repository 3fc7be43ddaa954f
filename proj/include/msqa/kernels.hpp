#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "msqa/errors.hpp"

namespace msqa {

/// A data site or query location in the unit square.
using Point = Eigen::Vector2d;

enum class KernelFamily { Gaussian, Wendland };

/// Radial kernel on the normalized radius u = r / delta.
struct KernelSpec {
    KernelFamily family = KernelFamily::Wendland;
    double delta = 1.0;

    KernelSpec() = default;
    KernelSpec(KernelFamily f, double d) : family(f), delta(d) {
        if (!(d > 0.0)) throw ConfigError("kernel delta must be positive, got " + std::to_string(d));
    }
};

/// Gaussian: exp(-2 u^2). Wendland: (1-u)_+^4 (4u + 1).
inline double kernel_eval(KernelFamily family, double u) {
    if (u < 0.0) throw NegativeRadius("u = " + std::to_string(u));
    switch (family) {
        case KernelFamily::Gaussian:
            return std::exp(-2.0 * u * u);
        case KernelFamily::Wendland: {
            if (u >= 1.0) return 0.0;
            const double t = 1.0 - u;
            const double t2 = t * t;
            return t2 * t2 * (4.0 * u + 1.0);
        }
    }
    return 0.0;
}

inline double kernel_eval(const KernelSpec& spec, double u) { return kernel_eval(spec.family, u); }

/// Kernel weight of a site at Euclidean distance r from the query.
inline double kernel_weight(const KernelSpec& spec, double r) { return kernel_eval(spec.family, r / spec.delta); }

/// Resolution of the candidate grid used by mesh_norm.
inline constexpr int kMeshNormGrid = 101;

/// Fill distance of the sites in [0,1]^2, i.e. the largest distance from a
/// domain point to its nearest site, maximized over a 101 x 101 grid.
inline double mesh_norm(std::span<const Point> sites) {
    if (sites.empty()) throw EmptyDataset("mesh norm of no sites");
    const double step = 1.0 / (kMeshNormGrid - 1);
    double best = 0.0;  // squared
    for (int i = 0; i < kMeshNormGrid; ++i) {
        const double gx = i * step;
        for (int j = 0; j < kMeshNormGrid; ++j) {
            const double gy = j * step;
            double nearest = std::numeric_limits<double>::infinity();
            for (const Point& p : sites) {
                const double dx = p.x() - gx;
                const double dy = p.y() - gy;
                nearest = std::min(nearest, dx * dx + dy * dy);
                // This grid point cannot raise the maximum any more.
                if (nearest <= best) break;
            }
            best = std::max(best, nearest);
        }
    }
    return std::sqrt(best);
}

}  // namespace msqa
