#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "difflab/ddim.hpp"
#include "difflab/denoiser.hpp"
#include "difflab/gridprompt.hpp"
#include "difflab/latent.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

/// How the two lower-quadrant companion latents evolve alongside the sampler.
///
/// source_anchored: both companions are the source latent re-noised with the
/// step's shared draw; the edited side differs only through its conditioning.
/// parallel_ddim: both companions run their own deterministic sampling
/// recursion from a shared initial draw. Kept for comparison; with an analytic
/// predictor its denoising difference collapses toward zero and the edit
/// direction never reaches the output.
enum class CompanionMode { source_anchored, parallel_ddim };

struct CCSConfig {
    int n_steps = 30;
    double lambda2 = 1.2;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    CompanionMode companion = CompanionMode::source_anchored;
    // Evaluate the denoising difference at the step being produced (default)
    // or at the step being left.
    bool delta_at_from_step = false;

    void validate() const {
        if (n_steps < 1) throw std::invalid_argument("CCSConfig: n_steps must be >= 1");
        if (lambda2 < 0.0) throw std::invalid_argument("CCSConfig: lambda2 must be >= 0");
    }
};

/// Companion latents for the denoising difference.
struct CompanionPair {
    Latent z_edit;  // lower-right region latent
    Latent z_src;   // lower-left region latent
};

struct CCSState {
    int t = 0;
    Latent z_hat;    // re-noised latent at t
    Latent z0_out;   // per-step output
    Latent eps_c;    // consistency noise at t
    CompanionPair companion;
};

/// Noise that makes the consistency map reproduce the source latent:
/// eps_c = (z_hat_t - sqrt(alpha_t) * z0_src) / sqrt(1 - alpha_t).
inline Latent consistency_noise(const Latent& z_hat_t, int t, const Latent& z0_src, const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.steps()) throw std::out_of_range("consistency_noise: t out of range");
    require_same_dim(z_hat_t, z0_src, "consistency_noise");
    const double a = schedule.alpha(t);
    if (a >= 1.0) throw std::domain_error("consistency_noise: alpha[t] must be < 1");
    const double inv = 1.0 / std::sqrt(1.0 - a);
    return lincomb(inv, z_hat_t, -std::sqrt(a) * inv, z0_src);
}

/// Consistency map: f_hat(z, t, eps) = (z - sqrt(1-alpha_t) * eps) / sqrt(alpha_t).
inline Latent f_hat(const Latent& z_hat_t, int t, const Latent& eps_c, const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.steps()) throw std::out_of_range("f_hat: t out of range");
    require_same_dim(z_hat_t, eps_c, "f_hat");
    const double a = schedule.alpha(t);
    const double inv = 1.0 / std::sqrt(a);
    return lincomb(inv, z_hat_t, -std::sqrt(1.0 - a) * inv, eps_c);
}

/// Per-step denoising difference between the edited and source regions.
inline Latent denoising_difference(const Denoiser& model, const CCSState& state, int t,
                                   const Conditioning& cond_edit, const Conditioning& cond_src) {
    if (state.companion.z_edit.empty() || state.companion.z_src.empty()) {
        throw std::invalid_argument("denoising_difference: companion latents not populated");
    }
    const Latent eps_edit = predict_noise(model, state.companion.z_edit, t, cond_edit);
    const Latent eps_src = predict_noise(model, state.companion.z_src, t, cond_src);
    return sub(eps_edit, eps_src);
}

/// Calibrated consistency map: the consistency noise is recomputed from the
/// current latent, so without the guidance term this returns z0_src exactly.
inline Latent f_hat_calibrated(const Latent& z_hat_t, int t, const Latent& z0_src, const Latent& delta_eps,
                               double lambda2, const NoiseSchedule& schedule) {
    const Latent eps_c = consistency_noise(z_hat_t, t, z0_src, schedule);
    const Latent guided = lincomb(1.0, eps_c, lambda2, delta_eps);
    return f_hat(z_hat_t, t, guided, schedule);
}

struct CCSStepRecord {
    int t = 0;
    Latent z0_out;
    double delta_eps_norm = 0.0;
    double dist_to_src = 0.0;
};

struct CCSResult {
    Latent final_z;
    std::vector<CCSStepRecord> steps;
};

/// Multi-step consistency sampling anchored to the source latent. The first
/// step emits the source; each later step re-noises the previous output,
/// recomputes the consistency noise against the source, and applies the
/// lambda2-scaled denoising difference as guidance.
inline CCSResult ccs_sample(const Denoiser& model, const Latent& z0_src, const GridState& grid,
                            const PromptVector& prompt, const CCSConfig& config, const NoiseSchedule& schedule,
                            const Embedder& embedder) {
    config.validate();
    if (z0_src != grid.quad_ll) throw std::invalid_argument("ccs_sample: z0_src must be the grid query quadrant");
    if (z0_src.size() != model.dim()) throw std::invalid_argument("ccs_sample: dimension mismatch");

    const std::vector<int> steps = subsample_timesteps(schedule.steps(), config.n_steps);
    SeededNoiseSource source(config.seed, config.stream);

    Conditioning cond_edit;
    cond_edit.prompt = prompt;
    cond_edit.edit_shift = embedder.decode(prompt.p);
    const Conditioning cond_src = Conditioning::none();

    CCSResult result;
    result.steps.reserve(steps.size());

    // Anchor: the first timestep emits the source latent.
    Latent z0_prev = z0_src;
    result.steps.push_back({steps.front(), z0_prev, 0.0, 0.0});

    CompanionPair parallel;
    if (config.companion == CompanionMode::parallel_ddim) {
        const Latent init = draw_noise(source, z0_src.size());
        parallel.z_edit = init;
        parallel.z_src = init;
    }

    for (std::size_t k = 1; k < steps.size(); ++k) {
        const int t_prev = steps[k - 1];
        const int t = steps[k];
        const double a = schedule.alpha(t);

        const Latent noise = draw_noise(source, z0_src.size());
        // Re-noise the previous output down to t.
        Latent z_hat = lincomb(std::sqrt(a), z0_prev, std::sqrt(1.0 - a), noise);

        CCSState state;
        state.t = t;
        state.z_hat = z_hat;
        state.eps_c = consistency_noise(z_hat, t, z0_src, schedule);

        if (config.companion == CompanionMode::source_anchored) {
            // Both lower regions carry the source content at this noise level,
            // sharing the step's draw; only the conditioning differs.
            Latent z_src_t = lincomb(std::sqrt(a), z0_src, std::sqrt(1.0 - a), noise);
            state.companion.z_src = z_src_t;
            state.companion.z_edit = std::move(z_src_t);
        } else {
            // Advance both parallel trajectories one deterministic step.
            const Latent eps_e = predict_noise(model, parallel.z_edit, t_prev, cond_edit);
            const Latent eps_s = predict_noise(model, parallel.z_src, t_prev, cond_src);
            parallel.z_edit = ddim_step_between(parallel.z_edit, t_prev, t, eps_e, schedule, 0.0);
            parallel.z_src = ddim_step_between(parallel.z_src, t_prev, t, eps_s, schedule, 0.0);
            state.companion = parallel;
        }

        const int t_delta = config.delta_at_from_step ? t_prev : t;
        const Latent delta_eps = denoising_difference(model, state, t_delta, cond_edit, cond_src);

        state.z0_out = f_hat_calibrated(z_hat, t, z0_src, delta_eps, config.lambda2, schedule);
        z0_prev = state.z0_out;
        result.steps.push_back({t, z0_prev, norm(delta_eps), distance(z0_prev, z0_src)});
    }

    result.final_z = z0_prev;
    return result;
}

}  // namespace difflab
