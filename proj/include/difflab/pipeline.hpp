#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "difflab/ccs.hpp"
#include "difflab/ddim.hpp"
#include "difflab/denoiser.hpp"
#include "difflab/gridprompt.hpp"
#include "difflab/latent.hpp"
#include "difflab/schedule.hpp"
#include "difflab/tcs.hpp"

namespace difflab {

struct FrameSequence {
    std::vector<Latent> frames;

    std::size_t count() const { return frames.size(); }

    void validate() const {
        if (frames.empty()) throw std::invalid_argument("FrameSequence: empty");
        for (const auto& f : frames) {
            if (f.size() != frames.front().size()) throw std::invalid_argument("FrameSequence: mixed dimensions");
        }
    }
};

/// Ground-truth edit: a latent displacement applied to frame content.
struct ToyEdit {
    Latent delta;
    std::string description;
};

// Jitter above the drift spacing keeps pairwise frame distances near-uniform;
// the SVGD stage at its default step size and iteration budget is only well
// behaved when cross-frame kernel weights stay small.
struct VideoParams {
    int n_frames = 16;
    double drift = 6.0;
    double jitter = 0.65;
};

struct EditParams {
    double scale = 7.0;
    // "mixture": along the direction between the first two mixture means;
    // "random": seeded unit direction.
    std::string direction = "mixture";
};

struct ScheduleParams {
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
};

struct PipelineConfig {
    ScheduleParams schedule;
    MixtureParams mixture;
    VideoParams video;
    EditParams edit;
    double lambda1 = 0.7;
    std::string embedder = "identity";  // or "projection"
    CCSConfig ccs;
    TCSConfig tcs;
    std::uint64_t seed = 20240501;
    int threads = 1;
};

// Stream layout: low ids are reserved, frame i (1-based) samples on stream i,
// the no-CCS ablation draws fresh noise on 1000 + i, round-trip sweeps use
// 2000 + seed index.
inline constexpr std::uint64_t kStreamVideo = 0;
inline constexpr std::uint64_t kStreamEdit = 1;
inline constexpr std::uint64_t kStreamFreshBase = 1000;
inline constexpr std::uint64_t kStreamRoundtripBase = 2000;

// Two narrow modes 0.45 apart. Narrow components keep the noise-prediction
// difference responsive at the last sampling step; the small separation keeps
// mode responsibilities in their smooth regime at that step's noise level.
inline MixtureParams default_mixture(std::size_t dim = 64) {
    MixtureParams mix;
    mix.dim = dim;
    MixtureComponent c0;
    c0.weight = 0.7;
    c0.mean = zeros(dim);
    c0.std = 0.05;
    MixtureComponent c1;
    c1.weight = 0.3;
    c1.mean = zeros(dim);
    if (dim >= 2) {
        c1.mean[0] = 0.45 / 1.4142135623730951;
        c1.mean[1] = 0.45 / 1.4142135623730951;
    } else {
        c1.mean[0] = 0.45;
    }
    c1.std = 0.05;
    mix.components = {c0, c1};
    return mix;
}

inline PipelineConfig default_pipeline_config() {
    PipelineConfig cfg;
    cfg.mixture = default_mixture(64);
    return cfg;
}

/// Smooth latent trajectory with known ground truth: a linear drift away from
/// the first mixture mean plus per-frame jitter.
inline FrameSequence gen_toy_video(const PipelineConfig& config, SeededNoiseSource& source) {
    if (config.video.n_frames < 1) throw std::invalid_argument("gen_toy_video: n_frames must be >= 1");
    const std::size_t dim = config.mixture.dim;
    const Latent base = config.mixture.components.front().mean;
    const Latent direction = normalized(draw_noise(source, dim));
    FrameSequence video;
    video.frames.reserve(static_cast<std::size_t>(config.video.n_frames));
    const int n = config.video.n_frames;
    for (int i = 1; i <= n; ++i) {
        const double progress = (n > 1) ? static_cast<double>(i - 1) / static_cast<double>(n - 1) : 0.0;
        Latent frame = lincomb(1.0, base, config.video.drift * progress, direction);
        if (config.video.jitter != 0.0) {
            const Latent eps = draw_noise(source, dim);
            axpy(config.video.jitter, eps, frame);
        }
        video.frames.push_back(std::move(frame));
    }
    return video;
}

inline Latent apply_toy_edit(const Latent& frame, const ToyEdit& edit) {
    require_same_dim(frame, edit.delta, "apply_toy_edit");
    return add(frame, edit.delta);
}

inline ToyEdit make_toy_edit(const PipelineConfig& config) {
    ToyEdit edit;
    const std::size_t dim = config.mixture.dim;
    if (config.edit.direction == "mixture" && config.mixture.components.size() >= 2) {
        const Latent d = sub(config.mixture.components[1].mean, config.mixture.components[0].mean);
        if (norm(d) > 0.0) {
            edit.delta = scaled(normalized(d), config.edit.scale);
            edit.description = "shift toward the second mixture mode";
            return edit;
        }
    }
    SeededNoiseSource source(config.seed, kStreamEdit);
    edit.delta = scaled(normalized(draw_noise(source, dim)), config.edit.scale);
    edit.description = "seeded random shift";
    return edit;
}

/// Mean distance to the ground-truth edited frames, normalized by sqrt(dim).
inline double metric_content(const FrameSequence& edited, const FrameSequence& src, const ToyEdit& edit) {
    edited.validate();
    src.validate();
    if (edited.count() != src.count()) throw std::invalid_argument("metric_content: frame count mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < src.count(); ++i) {
        sum += rms_distance(edited.frames[i], apply_toy_edit(src.frames[i], edit));
    }
    return sum / static_cast<double>(src.count());
}

/// Mean adjacent-frame distance, normalized by sqrt(dim); 0 for single frames.
inline double metric_roughness(const FrameSequence& seq) {
    seq.validate();
    if (seq.count() < 2) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < seq.count(); ++i) {
        sum += rms_distance(seq.frames[i + 1], seq.frames[i]);
    }
    return sum / static_cast<double>(seq.count() - 1);
}

/// Squared MMD with an RBF kernel, V-statistic form: zero when the two sample
/// lists coincide and never below roundoff.
inline double metric_mmd(const std::vector<Latent>& a, const std::vector<Latent>& b, double h) {
    if (a.empty() || b.empty()) throw std::invalid_argument("metric_mmd: empty sample set");
    if (!(h > 0.0)) throw std::invalid_argument("metric_mmd: h must be positive");
    const double m = static_cast<double>(a.size());
    const double n = static_cast<double>(b.size());
    double aa = 0.0, bb = 0.0, ab = 0.0;
    for (const auto& x : a) {
        for (const auto& y : a) aa += rbf_kernel(x, y, h).value;
    }
    for (const auto& x : b) {
        for (const auto& y : b) bb += rbf_kernel(x, y, h).value;
    }
    for (const auto& x : a) {
        for (const auto& y : b) ab += rbf_kernel(x, y, h).value;
    }
    return aa / (m * m) + bb / (n * n) - 2.0 * ab / (m * n);
}

struct TCSTracePoint {
    int iteration = 0;
    double mmd = 0.0;
    double roughness = 0.0;
};

struct FrameTrace {
    int frame = 0;  // 1-based
    std::vector<CCSStepRecord> steps;
};

struct EditReport {
    double content_ccs = 0.0;
    double content_final = 0.0;
    double roughness_src = 0.0;
    double roughness_ccs = 0.0;
    double roughness_final = 0.0;
    double mmd_initial = 0.0;
    double mmd_final = 0.0;
    double mmd_bandwidth = 0.0;
    ToyEdit edit;
    std::vector<TCSTracePoint> tcs_trace;
    std::vector<FrameTrace> ccs_traces;
};

struct EditResult {
    FrameSequence ccs_out;
    FrameSequence final;
    EditReport report;
};

namespace detail {

inline std::unique_ptr<Embedder> make_embedder(const PipelineConfig& config) {
    if (config.embedder == "identity") return std::make_unique<IdentityEmbedder>();
    if (config.embedder == "projection") {
        return std::make_unique<ProjectionEmbedder>(config.mixture.dim, config.seed);
    }
    throw std::invalid_argument("unknown embedder kind: " + config.embedder);
}

template <typename Fn>
inline void parallel_frames(std::size_t count, int threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int workers = std::min<int>(threads, static_cast<int>(count));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::size_t i = static_cast<std::size_t>(w); i < count; i += static_cast<std::size_t>(workers)) {
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Per-frame CCS propagation. Frame 1 passes through untouched; every later
/// frame is queried against the (source, edited) example pair.
inline FrameSequence propagate_ccs(const FrameSequence& src, const Latent& first_edit,
                                   const PipelineConfig& config, const Denoiser& model,
                                   const NoiseSchedule& schedule, const Embedder& embedder,
                                   const PromptVector& prompt, std::vector<FrameTrace>* traces = nullptr) {
    src.validate();
    FrameSequence out;
    out.frames.resize(src.count());
    out.frames[0] = first_edit;
    if (traces) traces->resize(src.count() > 1 ? src.count() - 1 : 0);
    detail::parallel_frames(src.count() - 1, config.threads, [&](std::size_t k) {
        const std::size_t i = k + 1;  // 0-based frame index
        GridState grid = compose_grid(src.frames[0], first_edit, src.frames[i]);
        CCSConfig ccs_cfg = config.ccs;
        ccs_cfg.seed = config.seed;
        ccs_cfg.stream = static_cast<std::uint64_t>(i + 1);  // 1-based frame id
        CCSResult res = ccs_sample(model, src.frames[i], grid, prompt, ccs_cfg, schedule, embedder);
        out.frames[i] = std::move(res.final_z);
        if (traces) (*traces)[k] = FrameTrace{static_cast<int>(i + 1), std::move(res.steps)};
    });
    return out;
}

/// Ablation stand-in for CCS: plain deterministic sampling from fresh noise,
/// conditioned on the prompt.
inline FrameSequence propagate_plain_ddim(const FrameSequence& src, const Latent& first_edit,
                                          const PipelineConfig& config, const Denoiser& model,
                                          const NoiseSchedule& schedule, const Embedder& embedder,
                                          const PromptVector& prompt) {
    src.validate();
    Conditioning cond = prompt_conditioning(embedder, prompt);
    const std::vector<int> steps = subsample_timesteps(schedule.steps(), config.ccs.n_steps);
    FrameSequence out;
    out.frames.resize(src.count());
    out.frames[0] = first_edit;
    detail::parallel_frames(src.count() - 1, config.threads, [&](std::size_t k) {
        const std::size_t i = k + 1;
        SeededNoiseSource source(config.seed, kStreamFreshBase + i + 1);
        const Latent z_top = draw_noise(source, src.frames[i].size());
        out.frames[i] = ddim_sample(model, z_top, schedule, steps, SigmaPolicy::zero(), cond).first;
    });
    return out;
}

/// SVGD stage over frames 2..N. Frame 1 stays the user's edit; the remaining
/// edited frames are the particles, their sources the matching source frames.
inline FrameSequence run_tcs_stage(const FrameSequence& edited, const FrameSequence& src,
                                   const PipelineConfig& config, std::vector<TCSTracePoint>* trace = nullptr,
                                   double* mmd_bandwidth = nullptr) {
    edited.validate();
    src.validate();
    if (edited.count() != src.count()) throw std::invalid_argument("run_tcs_stage: frame count mismatch");
    FrameSequence out = edited;
    if (edited.count() < 2) return out;

    ParticleSet set;
    set.edited.assign(edited.frames.begin() + 1, edited.frames.end());
    set.source.assign(src.frames.begin() + 1, src.frames.end());

    // Trace bandwidth is frozen at the initial geometry so the MMD sequence is
    // comparable across iterations.
    std::vector<Latent> pool = set.edited;
    pool.insert(pool.end(), set.source.begin(), set.source.end());
    const double h0 = (pool.size() >= 2) ? median_bandwidth(pool) : 1.0;
    if (mmd_bandwidth) *mmd_bandwidth = h0;

    auto observer = [&](int iteration, const ParticleSet& current) {
        if (!trace) return;
        FrameSequence snapshot = out;
        for (std::size_t i = 0; i < current.edited.size(); ++i) snapshot.frames[i + 1] = current.edited[i];
        trace->push_back({iteration, metric_mmd(current.edited, current.source, h0), metric_roughness(snapshot)});
    };

    ParticleSet result = tcs_update(set, config.tcs, trace ? observer : std::function<void(int, const ParticleSet&)>{});
    for (std::size_t i = 0; i < result.edited.size(); ++i) out.frames[i + 1] = result.edited[i];
    return out;
}

/// Full pipeline: per-frame CCS, then the TCS stage, with latent-space metrics
/// against the ground-truth edit.
inline EditResult edit_video(const FrameSequence& src, const Latent& first_edit, const PipelineConfig& config) {
    src.validate();
    require_same_dim(src.frames.front(), first_edit, "edit_video");

    const NoiseSchedule schedule = make_schedule(config.schedule.T, config.schedule.beta_start, config.schedule.beta_end);
    const AnalyticMixtureDenoiser model(config.mixture, schedule);
    const std::unique_ptr<Embedder> embedder = detail::make_embedder(config);
    const PromptVector prompt = edit_prompt(*embedder, first_edit, src.frames.front(), config.lambda1);

    EditResult result;
    result.report.edit.delta = sub(first_edit, src.frames.front());
    result.report.edit.description = "first-frame displacement";

    result.ccs_out = propagate_ccs(src, first_edit, config, model, schedule, *embedder, prompt, &result.report.ccs_traces);
    result.final = run_tcs_stage(result.ccs_out, src, config, &result.report.tcs_trace, &result.report.mmd_bandwidth);

    const ToyEdit& edit = result.report.edit;
    result.report.content_ccs = metric_content(result.ccs_out, src, edit);
    result.report.content_final = metric_content(result.final, src, edit);
    result.report.roughness_src = metric_roughness(src);
    result.report.roughness_ccs = metric_roughness(result.ccs_out);
    result.report.roughness_final = metric_roughness(result.final);
    if (!result.report.tcs_trace.empty()) {
        result.report.mmd_initial = [&] {
            ParticleSet set;
            set.edited.assign(result.ccs_out.frames.begin() + 1, result.ccs_out.frames.end());
            set.source.assign(src.frames.begin() + 1, src.frames.end());
            return metric_mmd(set.edited, set.source, result.report.mmd_bandwidth);
        }();
        result.report.mmd_final = result.report.tcs_trace.back().mmd;
    }
    return result;
}

struct AblationRow {
    std::string variant;
    double content = 0.0;
    double roughness = 0.0;
    double mmd_to_src = 0.0;
};

/// Side-by-side metrics for full / no-tcs / no-ccs variants on one input.
inline std::vector<AblationRow> run_ablation(const FrameSequence& src, const Latent& first_edit,
                                             const PipelineConfig& config) {
    src.validate();
    const NoiseSchedule schedule = make_schedule(config.schedule.T, config.schedule.beta_start, config.schedule.beta_end);
    const AnalyticMixtureDenoiser model(config.mixture, schedule);
    const std::unique_ptr<Embedder> embedder = detail::make_embedder(config);
    const PromptVector prompt = edit_prompt(*embedder, first_edit, src.frames.front(), config.lambda1);

    ToyEdit edit;
    edit.delta = sub(first_edit, src.frames.front());

    const FrameSequence ccs_out = propagate_ccs(src, first_edit, config, model, schedule, *embedder, prompt);
    const FrameSequence plain_out = propagate_plain_ddim(src, first_edit, config, model, schedule, *embedder, prompt);
    const FrameSequence full = run_tcs_stage(ccs_out, src, config);
    const FrameSequence no_ccs = run_tcs_stage(plain_out, src, config);

    auto mmd_vs_src = [&](const FrameSequence& seq) {
        if (seq.count() < 2) return 0.0;
        std::vector<Latent> a(seq.frames.begin() + 1, seq.frames.end());
        std::vector<Latent> b(src.frames.begin() + 1, src.frames.end());
        std::vector<Latent> pool = a;
        pool.insert(pool.end(), b.begin(), b.end());
        return metric_mmd(a, b, median_bandwidth(pool));
    };

    std::vector<AblationRow> rows;
    rows.push_back({"full", metric_content(full, src, edit), metric_roughness(full), mmd_vs_src(full)});
    rows.push_back({"no-tcs", metric_content(ccs_out, src, edit), metric_roughness(ccs_out), mmd_vs_src(ccs_out)});
    rows.push_back({"no-ccs", metric_content(no_ccs, src, edit), metric_roughness(no_ccs), mmd_vs_src(no_ccs)});
    return rows;
}

}  // namespace difflab
