#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "difflab/latent.hpp"

namespace difflab {

/// Edited latents paired with the source latents they are driven toward.
struct ParticleSet {
    std::vector<Latent> edited;
    std::vector<Latent> source;

    std::size_t count() const { return edited.size(); }

    void validate() const {
        if (edited.empty() || edited.size() != source.size()) {
            throw std::invalid_argument("ParticleSet: edited and source must be equal-length and non-empty");
        }
        const std::size_t dim = edited.front().size();
        for (const auto& v : edited) {
            if (v.size() != dim) throw std::invalid_argument("ParticleSet: mixed dimensions");
        }
        for (const auto& v : source) {
            if (v.size() != dim) throw std::invalid_argument("ParticleSet: mixed dimensions");
        }
    }
};

struct BandwidthPolicy {
    enum class Kind { median_heuristic, fixed };

    Kind kind = Kind::median_heuristic;
    double h = 1.0;

    static BandwidthPolicy median() { return {Kind::median_heuristic, 0.0}; }
    static BandwidthPolicy fixed(double h) {
        if (!(h > 0.0)) throw std::invalid_argument("BandwidthPolicy::fixed: h must be positive");
        return {Kind::fixed, h};
    }
};

struct TCSConfig {
    double eta = 0.5;
    int iterations = 50;
    BandwidthPolicy bandwidth = BandwidthPolicy::median();

    void validate() const {
        if (!(eta > 0.0)) throw std::invalid_argument("TCSConfig: eta must be positive");
        if (iterations < 1) throw std::invalid_argument("TCSConfig: iterations must be >= 1");
    }
};

struct KernelEval {
    double value = 0.0;
    Latent grad_x;  // gradient with respect to the first argument
};

/// RBF kernel exp(-||x-y||^2 / (2 h^2)) and its first-argument gradient.
inline KernelEval rbf_kernel(const Latent& x, const Latent& y, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("rbf_kernel: h must be positive");
    require_same_dim(x, y, "rbf_kernel");
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sq += d * d;
    }
    KernelEval out;
    out.value = std::exp(-sq / (2.0 * h * h));
    out.grad_x.resize(x.size());
    const double c = -out.value / (h * h);
    for (std::size_t i = 0; i < x.size(); ++i) out.grad_x[i] = c * (x[i] - y[i]);
    return out;
}

/// Median pairwise distance scaled by 1/sqrt(2 ln(N+1)), floored at 1e-8.
inline double median_bandwidth(const std::vector<Latent>& points) {
    if (points.size() < 2) throw std::invalid_argument("median_bandwidth: need at least 2 points");
    std::vector<double> dists;
    dists.reserve(points.size() * (points.size() - 1) / 2);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            dists.push_back(distance(points[i], points[j]));
        }
    }
    std::sort(dists.begin(), dists.end());
    const std::size_t m = dists.size();
    const double median = (m % 2 == 1) ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
    const double n = static_cast<double>(points.size());
    const double h = median / std::sqrt(2.0 * std::log(n + 1.0));
    return std::max(h, 1e-8);
}

/// Update direction at `query`:
///   phi(z) = (1/N) sum_j [ K(edited_j, z) * (edited_j - source_j) + grad_1 K(edited_j, z) ].
/// The first term is the kernel-weighted pull toward the source samples, the
/// second the repulsive term that keeps particles from collapsing.
inline Latent phi_hat(const ParticleSet& set, const Latent& query, double h) {
    set.validate();
    if (!(h > 0.0)) throw std::invalid_argument("phi_hat: h must be positive");
    const std::size_t n = set.count();
    Latent acc = zeros(query.size());
    for (std::size_t j = 0; j < n; ++j) {
        const KernelEval k = rbf_kernel(set.edited[j], query, h);
        for (std::size_t i = 0; i < query.size(); ++i) {
            acc[i] += k.value * (set.edited[j][i] - set.source[j][i]) + k.grad_x[i];
        }
    }
    return scaled(acc, 1.0 / static_cast<double>(n));
}

namespace detail {

inline double tcs_bandwidth(const ParticleSet& set, const BandwidthPolicy& policy) {
    if (policy.kind == BandwidthPolicy::Kind::fixed) return policy.h;
    std::vector<Latent> pool;
    pool.reserve(set.count() * 2);
    pool.insert(pool.end(), set.edited.begin(), set.edited.end());
    pool.insert(pool.end(), set.source.begin(), set.source.end());
    if (pool.size() < 2) return 1e-8;
    return median_bandwidth(pool);
}

}  // namespace detail

/// One synchronous SVGD sweep: phi is evaluated at every particle against the
/// pre-update states, then all particles move at once.
inline void tcs_iterate(ParticleSet& set, double eta, double h) {
    const std::size_t n = set.count();
    std::vector<Latent> phis(n);
    for (std::size_t i = 0; i < n; ++i) phis[i] = phi_hat(set, set.edited[i], h);
    for (std::size_t i = 0; i < n; ++i) axpy(-eta, phis[i], set.edited[i]);
}

/// Run the full update: `iterations` sweeps, bandwidth recomputed per sweep
/// under the policy. The source set is never modified. The observer, when
/// given, sees the set after every sweep (iteration index is 1-based).
inline ParticleSet tcs_update(const ParticleSet& input, const TCSConfig& config,
                              const std::function<void(int, const ParticleSet&)>& observer = {}) {
    input.validate();
    config.validate();
    ParticleSet set = input;
    for (int it = 1; it <= config.iterations; ++it) {
        const double h = detail::tcs_bandwidth(set, config.bandwidth);
        tcs_iterate(set, config.eta, h);
        if (observer) observer(it, set);
    }
    return set;
}

}  // namespace difflab
