#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "difflab/config.hpp"
#include "difflab/pipeline.hpp"

namespace difflab {

namespace detail {

inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

struct RoundtripRow {
    int steps = 0;
    int seed = 0;
    double naive_mse = 0.0;
    double exact_mse = 0.0;
};

/// Round-trip sweep over step counts and seeds on the single-Gaussian toy.
/// Each seed draws its own clean latent from the toy distribution.
inline std::vector<RoundtripRow> run_roundtrip_sweep(const LabConfig& cfg) {
    const auto& r = cfg.roundtrip;
    const NoiseSchedule schedule =
        make_schedule(cfg.pipeline.schedule.T, cfg.pipeline.schedule.beta_start, cfg.pipeline.schedule.beta_end);
    MixtureParams mix;
    mix.dim = r.dim;
    mix.components = {{1.0, r.mean, r.std}};
    mix.validate();
    const AnalyticMixtureDenoiser model(mix, schedule);

    std::vector<RoundtripRow> rows;
    rows.reserve(r.step_counts.size() * static_cast<std::size_t>(r.seeds));
    for (int n_steps : r.step_counts) {
        const std::vector<int> steps = subsample_timesteps(schedule.steps(), n_steps);
        for (int s = 0; s < r.seeds; ++s) {
            SeededNoiseSource source(cfg.pipeline.seed, kStreamRoundtripBase + static_cast<std::uint64_t>(s));
            Latent z0 = r.mean;
            axpy(r.std, draw_noise(source, r.dim), z0);
            const RoundtripReport rep = roundtrip_error(model, z0, schedule, steps, Conditioning::none());
            rows.push_back({n_steps, s, rep.naive_mse, rep.exact_mse});
        }
    }
    return rows;
}

inline std::string roundtrip_csv(const std::vector<RoundtripRow>& rows) {
    std::string out = "steps,seed,naive_mse,exact_mse\n";
    for (const auto& row : rows) {
        out += std::to_string(row.steps) + "," + std::to_string(row.seed) + "," + detail::csv_num(row.naive_mse) +
               "," + detail::csv_num(row.exact_mse) + "\n";
    }
    return out;
}

inline std::string frames_csv(const FrameSequence& seq) {
    std::string out = "frame";
    if (!seq.frames.empty()) {
        for (std::size_t c = 0; c < seq.frames.front().size(); ++c) out += ",c" + std::to_string(c);
    }
    out += "\n";
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        out += std::to_string(i + 1);
        for (double v : seq.frames[i]) out += "," + detail::csv_num(v);
        out += "\n";
    }
    return out;
}

inline std::string ccs_trace_csv(const std::vector<FrameTrace>& traces) {
    std::string out = "frame,step_index,t,dist_to_src,delta_eps_norm\n";
    for (const auto& tr : traces) {
        for (std::size_t k = 0; k < tr.steps.size(); ++k) {
            const auto& s = tr.steps[k];
            out += std::to_string(tr.frame) + "," + std::to_string(k) + "," + std::to_string(s.t) + "," +
                   detail::csv_num(s.dist_to_src) + "," + detail::csv_num(s.delta_eps_norm) + "\n";
        }
    }
    return out;
}

inline std::string tcs_trace_csv(const std::vector<TCSTracePoint>& trace) {
    std::string out = "iteration,mmd,roughness\n";
    for (const auto& p : trace) {
        out += std::to_string(p.iteration) + "," + detail::csv_num(p.mmd) + "," + detail::csv_num(p.roughness) + "\n";
    }
    return out;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "variant,content,roughness,mmd_to_src\n";
    for (const auto& row : rows) {
        out += row.variant + "," + detail::csv_num(row.content) + "," + detail::csv_num(row.roughness) + "," +
               detail::csv_num(row.mmd_to_src) + "\n";
    }
    return out;
}

inline std::string edit_report_text(const EditReport& report) {
    std::ostringstream os;
    os << "content_ccs = " << detail::csv_num(report.content_ccs) << "\n";
    os << "content_final = " << detail::csv_num(report.content_final) << "\n";
    os << "roughness_src = " << detail::csv_num(report.roughness_src) << "\n";
    os << "roughness_ccs = " << detail::csv_num(report.roughness_ccs) << "\n";
    os << "roughness_final = " << detail::csv_num(report.roughness_final) << "\n";
    os << "mmd_initial = " << detail::csv_num(report.mmd_initial) << "\n";
    os << "mmd_final = " << detail::csv_num(report.mmd_final) << "\n";
    os << "mmd_bandwidth = " << detail::csv_num(report.mmd_bandwidth) << "\n";
    os << "edit_norm = " << detail::csv_num(norm(report.edit.delta)) << "\n";
    return os.str();
}

/// Everything the edit command needs, generated in one deterministic pass.
struct EditRunOutputs {
    FrameSequence src;
    Latent first_edit;
    EditResult result;
    std::string report_text;
    std::string frames_final;
    std::string frames_ccs;
    std::string ccs_trace;
    std::string tcs_trace;
};

inline EditRunOutputs run_edit_pipeline(const LabConfig& cfg) {
    EditRunOutputs out;
    SeededNoiseSource video_source(cfg.pipeline.seed, kStreamVideo);
    out.src = gen_toy_video(cfg.pipeline, video_source);
    const ToyEdit edit = make_toy_edit(cfg.pipeline);
    out.first_edit = apply_toy_edit(out.src.frames.front(), edit);
    out.result = edit_video(out.src, out.first_edit, cfg.pipeline);
    out.report_text = edit_report_text(out.result.report);
    out.frames_final = frames_csv(out.result.final);
    out.frames_ccs = frames_csv(out.result.ccs_out);
    out.ccs_trace = ccs_trace_csv(out.result.report.ccs_traces);
    out.tcs_trace = tcs_trace_csv(out.result.report.tcs_trace);
    return out;
}

}  // namespace difflab
