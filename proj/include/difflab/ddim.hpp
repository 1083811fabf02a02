#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "difflab/denoiser.hpp"
#include "difflab/latent.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

/// One visited state of a sampling or inversion run. z is the latent *before*
/// the step taken at timestep t, eps_hat the prediction used for that step.
struct TrajectoryPoint {
    int t = 0;
    double alpha = 1.0;
    Latent z;
    Latent eps_hat;
    Latent z0_pred;  // (z - sqrt(1-alpha) * eps_hat) / sqrt(alpha)
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    Latent final_z;           // latent after the last step
    int final_t = 0;          // 0 for sampling runs, top timestep for inversion runs
    double final_alpha = 1.0;
    bool stochastic = false;  // true if any step used sigma > 0
};

namespace detail {

// sqrt(1 - alpha_to - sigma^2) computed as sqrt((r - sigma)(r + sigma)) with
// r = sqrt(1 - alpha_to). When sigma equals r bit-for-bit (the consistency
// policy) the factor is exactly zero instead of sqrt of a roundoff residue.
inline double adjustment_coeff(double alpha_to, double sigma) {
    const double root = std::sqrt(1.0 - alpha_to);
    double lo = root - sigma;
    if (lo < 0.0) {
        if (lo < -1e-12) throw std::domain_error("ddim_step: 1 - alpha_prev - sigma^2 is negative");
        lo = 0.0;
    }
    return std::sqrt(lo) * std::sqrt(root + sigma);
}

inline Latent predicted_clean(const Latent& z, double alpha_t, const Latent& eps_hat) {
    return scaled(sub(z, scaled(eps_hat, std::sqrt(1.0 - alpha_t))), 1.0 / std::sqrt(alpha_t));
}

}  // namespace detail

/// One reverse step between arbitrary schedule positions:
///   z_to = sqrt(a_to) * z0_pred + sqrt(1 - a_to - sigma^2) * eps_hat + sigma * noise.
inline Latent ddim_step_between(const Latent& z, int t_from, int t_to, const Latent& eps_hat,
                                const NoiseSchedule& schedule, double sigma, const Latent* noise = nullptr) {
    if (t_from < 1 || t_from > schedule.steps() || t_to < 0 || t_to >= t_from) {
        throw std::out_of_range("ddim_step_between: bad timestep pair");
    }
    require_same_dim(z, eps_hat, "ddim_step_between");
    const double a_from = schedule.alpha(t_from);
    const double a_to = schedule.alpha(t_to);
    const Latent z0_pred = detail::predicted_clean(z, a_from, eps_hat);
    const double adj = detail::adjustment_coeff(a_to, sigma);
    Latent out = lincomb(std::sqrt(a_to), z0_pred, adj, eps_hat);
    if (sigma != 0.0) {
        if (noise == nullptr) throw std::invalid_argument("ddim_step_between: sigma > 0 requires a noise draw");
        axpy(sigma, *noise, out);
    }
    return out;
}

/// Adjacent-step form: z_{t-1} from z_t.
inline Latent ddim_step(const Latent& z_t, int t, const Latent& eps_hat, const NoiseSchedule& schedule,
                        double sigma_t, const Latent* noise = nullptr) {
    return ddim_step_between(z_t, t, t - 1, eps_hat, schedule, sigma_t, noise);
}

/// Run the sampler over a strictly decreasing timestep list, finishing at t=0.
/// With SigmaPolicy::zero the run is deterministic and `source` may be null.
inline std::pair<Latent, Trajectory> ddim_sample(const Denoiser& model, const Latent& z_top,
                                                 const NoiseSchedule& schedule, const std::vector<int>& steps,
                                                 const SigmaPolicy& policy, const Conditioning& cond,
                                                 SeededNoiseSource* source = nullptr) {
    if (steps.empty()) throw std::invalid_argument("ddim_sample: empty step list");
    for (std::size_t k = 1; k < steps.size(); ++k) {
        if (steps[k] >= steps[k - 1]) throw std::invalid_argument("ddim_sample: steps must be strictly decreasing");
    }
    Trajectory traj;
    traj.points.reserve(steps.size());
    Latent z = z_top;
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const int t_from = steps[k];
        const int t_to = (k + 1 < steps.size()) ? steps[k + 1] : 0;
        const Latent eps_hat = predict_noise(model, z, t_from, cond);
        const double a_from = schedule.alpha(t_from);
        const double sigma = sigma_for_step(schedule, policy, t_from, t_to);
        traj.points.push_back({t_from, a_from, z, eps_hat, detail::predicted_clean(z, a_from, eps_hat)});
        if (sigma != 0.0) {
            traj.stochastic = true;
            if (source == nullptr) throw std::invalid_argument("ddim_sample: stochastic policy requires a noise source");
            const Latent noise = draw_noise(*source, z.size());
            z = ddim_step_between(z, t_from, t_to, eps_hat, schedule, sigma, &noise);
        } else {
            z = ddim_step_between(z, t_from, t_to, eps_hat, schedule, 0.0);
        }
    }
    traj.final_z = z;
    traj.final_t = 0;
    traj.final_alpha = schedule.alpha(0);
    return {z, traj};
}

/// Whether the approximate prediction during naive inversion is evaluated at
/// the target timestep (as the substitution is written) or the source one.
enum class InversionEpsTime { target, source };

/// Naive inversion: run the deterministic recursion upward, substituting the
/// previous latent into the noise prediction. `steps` is strictly increasing
/// and ends at the top timestep; the walk starts at t=0 with z_0.
inline std::pair<Latent, Trajectory> ddim_invert_naive(const Denoiser& model, const Latent& z_0,
                                                       const NoiseSchedule& schedule, const std::vector<int>& steps,
                                                       const Conditioning& cond,
                                                       InversionEpsTime eps_time = InversionEpsTime::target) {
    if (steps.empty()) throw std::invalid_argument("ddim_invert_naive: empty step list");
    for (std::size_t k = 1; k < steps.size(); ++k) {
        if (steps[k] <= steps[k - 1]) throw std::invalid_argument("ddim_invert_naive: steps must be strictly increasing");
    }
    if (steps.front() < 1 || steps.back() > schedule.steps()) {
        throw std::out_of_range("ddim_invert_naive: steps out of schedule range");
    }
    Trajectory traj;
    traj.points.reserve(steps.size());
    Latent z = z_0;
    int t_from = 0;
    for (int t_to : steps) {
        const int t_eval = (eps_time == InversionEpsTime::target) ? t_to : std::max(1, t_from);
        const Latent eps_hat = predict_noise(model, z, t_eval, cond);
        const double a_from = schedule.alpha(t_from);
        const double a_to = schedule.alpha(t_to);
        const Latent z0_est = detail::predicted_clean(z, a_from, eps_hat);
        traj.points.push_back({t_from, a_from, z, eps_hat, z0_est});
        // z_to = sqrt(a_to) * (z_from - sqrt(1-a_from) eps) / sqrt(a_from) + sqrt(1-a_to) eps
        z = lincomb(std::sqrt(a_to), z0_est, std::sqrt(1.0 - a_to), eps_hat);
        t_from = t_to;
    }
    traj.final_z = z;
    traj.final_t = steps.back();
    traj.final_alpha = schedule.alpha(steps.back());
    traj.stochastic = false;
    return {z, traj};
}

/// Ground-truth inversion of a deterministic sampling trajectory: replay the
/// stored predictions backwards through the step algebra, which is then exact.
inline Latent invert_exact_from_trajectory(const Trajectory& traj) {
    if (traj.stochastic) throw std::invalid_argument("invert_exact_from_trajectory: trajectory has sigma > 0");
    if (traj.points.empty()) throw std::invalid_argument("invert_exact_from_trajectory: empty trajectory");
    for (std::size_t k = 1; k < traj.points.size(); ++k) {
        if (traj.points[k].t >= traj.points[k - 1].t) {
            throw std::invalid_argument("invert_exact_from_trajectory: expected a sampling trajectory");
        }
    }
    Latent z = traj.final_z;
    double a_low = traj.final_alpha;
    for (std::size_t i = traj.points.size(); i-- > 0;) {
        const TrajectoryPoint& pt = traj.points[i];
        // The forward step from pt produced the state at a_low using pt.eps_hat;
        // solve it for the upper latent.
        const Latent z0_est = detail::predicted_clean(z, a_low, pt.eps_hat);
        z = lincomb(std::sqrt(pt.alpha), z0_est, std::sqrt(1.0 - pt.alpha), pt.eps_hat);
        a_low = pt.alpha;
    }
    return z;
}

/// Round-trip diagnostics for a clean latent: invert naively, resample, and
/// compare against the exact replay of the inversion's own predictions.
struct RoundtripReport {
    double naive_mse = 0.0;
    double exact_mse = 0.0;
    std::vector<double> per_step_drift;  // ||eps(z_t, t) - eps(z_{t-1}, t)|| per inversion step
};

inline RoundtripReport roundtrip_error(const Denoiser& model, const Latent& z_0, const NoiseSchedule& schedule,
                                       const std::vector<int>& steps_decreasing, const Conditioning& cond) {
    std::vector<int> up(steps_decreasing.rbegin(), steps_decreasing.rend());

    auto [z_top, inv_traj] = ddim_invert_naive(model, z_0, schedule, up, cond);

    auto sampled = ddim_sample(model, z_top, schedule, steps_decreasing, SigmaPolicy::zero(), cond);

    RoundtripReport report;
    report.naive_mse = mse(sampled.first, z_0);

    // Exact route: undo each inversion step using its own stored prediction.
    Latent z = z_top;
    double a_hi = inv_traj.final_alpha;
    for (std::size_t i = inv_traj.points.size(); i-- > 0;) {
        const TrajectoryPoint& pt = inv_traj.points[i];
        const Latent z0_est = detail::predicted_clean(z, a_hi, pt.eps_hat);
        z = lincomb(std::sqrt(pt.alpha), z0_est, std::sqrt(1.0 - pt.alpha), pt.eps_hat);
        a_hi = pt.alpha;
    }
    report.exact_mse = mse(z, z_0);

    // Drift between the substituted prediction and the one the exact recursion
    // would have wanted, measured after each inversion step.
    report.per_step_drift.reserve(inv_traj.points.size());
    for (std::size_t i = 0; i < inv_traj.points.size(); ++i) {
        const int t_to = (i + 1 < inv_traj.points.size()) ? inv_traj.points[i + 1].t : inv_traj.final_t;
        const Latent& z_to = (i + 1 < inv_traj.points.size()) ? inv_traj.points[i + 1].z : inv_traj.final_z;
        const Latent eps_true = predict_noise(model, z_to, t_to, cond);
        report.per_step_drift.push_back(distance(eps_true, inv_traj.points[i].eps_hat));
    }
    return report;
}

}  // namespace difflab
