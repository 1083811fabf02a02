#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "difflab/latent.hpp"

namespace difflab {

/// Diffusion-time bookkeeping: cumulative signal coefficients alpha[0..T]
/// with alpha[0] = 1 and alpha strictly decreasing, built from a linear
/// beta ramp, plus the per-step betas for exact recurrence checks.
class NoiseSchedule {
public:
    NoiseSchedule(std::vector<double> alpha, std::vector<double> beta)
        : alpha_(std::move(alpha)), beta_(std::move(beta)) {
        validate();
    }

    // Construct directly from an alpha sequence (tests, custom schedules).
    static NoiseSchedule from_alphas(std::vector<double> alpha) {
        std::vector<double> beta(alpha.size() > 0 ? alpha.size() - 1 : 0, 0.0);
        for (std::size_t t = 1; t < alpha.size(); ++t) beta[t - 1] = 1.0 - alpha[t] / alpha[t - 1];
        return NoiseSchedule(std::move(alpha), std::move(beta));
    }

    int steps() const { return static_cast<int>(alpha_.size()) - 1; }

    double alpha(int t) const {
        if (t < 0 || t > steps()) throw std::out_of_range("NoiseSchedule::alpha: t out of range");
        return alpha_[static_cast<std::size_t>(t)];
    }

    // beta(t) for t in 1..T
    double beta(int t) const {
        if (t < 1 || t > steps()) throw std::out_of_range("NoiseSchedule::beta: t out of range");
        return beta_[static_cast<std::size_t>(t - 1)];
    }

private:
    void validate() const {
        if (alpha_.size() < 2) throw std::invalid_argument("NoiseSchedule: need at least one step");
        if (alpha_[0] != 1.0) throw std::invalid_argument("NoiseSchedule: alpha[0] must be exactly 1");
        for (std::size_t t = 1; t < alpha_.size(); ++t) {
            if (!(alpha_[t] > 0.0 && alpha_[t] <= 1.0)) throw std::invalid_argument("NoiseSchedule: alpha out of (0,1]");
            if (!(alpha_[t] < alpha_[t - 1])) throw std::invalid_argument("NoiseSchedule: alpha not strictly decreasing");
        }
    }

    std::vector<double> alpha_;
    std::vector<double> beta_;
};

/// Linear beta ramp from beta_start to beta_end over T steps; alpha[t] is the
/// running product of (1 - beta_s).
inline NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw std::invalid_argument("make_schedule: need 0 < beta_start <= beta_end < 1");
    }
    std::vector<double> alpha(static_cast<std::size_t>(T) + 1);
    std::vector<double> beta(static_cast<std::size_t>(T));
    alpha[0] = 1.0;
    for (int s = 1; s <= T; ++s) {
        const double frac = T > 1 ? static_cast<double>(s - 1) / static_cast<double>(T - 1) : 0.0;
        beta[static_cast<std::size_t>(s - 1)] = beta_start + (beta_end - beta_start) * frac;
        alpha[static_cast<std::size_t>(s)] =
            alpha[static_cast<std::size_t>(s - 1)] * (1.0 - beta[static_cast<std::size_t>(s - 1)]);
    }
    return NoiseSchedule(std::move(alpha), std::move(beta));
}

/// Noise-amplitude policy for a sampling step. `zero` is deterministic DDIM,
/// `consistency` sets sigma so the step's adjustment term vanishes, `ddim_eta`
/// is the usual eta-scaled variance.
struct SigmaPolicy {
    enum class Kind { zero, ddim_eta, consistency };

    Kind kind = Kind::zero;
    double eta = 0.0;

    static SigmaPolicy zero() { return {Kind::zero, 0.0}; }
    static SigmaPolicy consistency() { return {Kind::consistency, 0.0}; }
    static SigmaPolicy ddim_eta(double eta) {
        if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("SigmaPolicy::ddim_eta: eta must be in [0,1]");
        return {Kind::ddim_eta, eta};
    }
};

/// Sigma for a step landing on timestep t_to, taken from t_from. The adjacent
/// case (t, t-1) is the textbook formula; subsampled steps substitute the
/// actual target step for t-1.
inline double sigma_for_step(const NoiseSchedule& schedule, const SigmaPolicy& policy, int t_from, int t_to) {
    if (t_from < 1 || t_from > schedule.steps()) throw std::out_of_range("sigma_for_step: t_from out of range");
    if (t_to < 0 || t_to >= t_from) throw std::out_of_range("sigma_for_step: t_to must be in [0, t_from)");
    const double a_from = schedule.alpha(t_from);
    const double a_to = schedule.alpha(t_to);
    switch (policy.kind) {
        case SigmaPolicy::Kind::zero:
            return 0.0;
        case SigmaPolicy::Kind::consistency:
            return std::sqrt(1.0 - a_to);
        case SigmaPolicy::Kind::ddim_eta:
            return policy.eta * std::sqrt((1.0 - a_to) / (1.0 - a_from)) * std::sqrt(1.0 - a_from / a_to);
    }
    throw std::logic_error("sigma_for_step: unreachable");
}

inline double sigma_at(const NoiseSchedule& schedule, const SigmaPolicy& policy, int t) {
    return sigma_for_step(schedule, policy, t, t - 1);
}

/// Strictly decreasing timestep list from T_full down, uniform stride with
/// floor rounding: t_k = T_full - floor(k * T_full / n_steps).
inline std::vector<int> subsample_timesteps(int T_full, int n_steps) {
    if (T_full < 1 || n_steps < 1 || n_steps > T_full) {
        throw std::invalid_argument("subsample_timesteps: need 1 <= n_steps <= T_full");
    }
    std::vector<int> steps(static_cast<std::size_t>(n_steps));
    for (int k = 0; k < n_steps; ++k) {
        const std::int64_t off = static_cast<std::int64_t>(k) * T_full / n_steps;
        steps[static_cast<std::size_t>(k)] = T_full - static_cast<int>(off);
    }
    return steps;
}

/// Reproducible Gaussian stream. A (seed, stream) pair fully determines the
/// draw sequence; the generator and Box-Muller transform are pinned here so
/// results do not depend on library internals.
class SeededNoiseSource {
public:
    explicit SeededNoiseSource(std::uint64_t seed, std::uint64_t stream = 0)
        : engine_(mix(seed, stream)) {}

    double uniform01() {
        // 53-bit mantissa in [0, 1)
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        // splitmix64 over the pair, so nearby (seed, stream) values decorrelate
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline Latent draw_noise(SeededNoiseSource& source, std::size_t dim) {
    if (dim < 1) throw std::invalid_argument("draw_noise: dim must be >= 1");
    Latent z(dim);
    for (std::size_t i = 0; i < dim; ++i) z[i] = source.gaussian();
    return z;
}

}  // namespace difflab
