#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "difflab/acceptance.hpp"
#include "difflab/config.hpp"
#include "difflab/manifest.hpp"
#include "difflab/reports.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::int64_t> seed;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "configuration file (key = value sections)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "override the master seed");
    cmd->add_option("--threads", opts.threads, "override the worker thread count");
}

difflab::LabConfig effective_config(const CommonOpts& opts) {
    difflab::LabConfig cfg;
    if (!opts.config_path.empty()) cfg = difflab::load_config_file(opts.config_path);
    if (opts.seed) cfg.pipeline.seed = static_cast<std::uint64_t>(*opts.seed);
    if (opts.threads) cfg.pipeline.threads = *opts.threads;
    return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

void finish_run(const CommonOpts& opts, const std::string& command, const difflab::LabConfig& cfg,
                const std::vector<std::pair<std::string, std::string>>& files) {
    const std::filesystem::path dir(opts.out_dir);
    std::filesystem::create_directories(dir);
    const std::string snapshot = difflab::serialize_config(cfg);
    std::vector<std::string> names;
    for (const auto& [name, content] : files) {
        write_file(dir / name, content);
        names.push_back(name);
    }
    write_file(dir / "config_snapshot.ini", snapshot);
    names.push_back("config_snapshot.ini");
    const difflab::RunManifest manifest = difflab::make_manifest(command, snapshot, names);
    write_file(dir / "manifest.txt", manifest.to_text());
    std::cout << command << ": wrote " << names.size() + 1 << " files to " << dir.string()
              << " (config " << manifest.config_hash.substr(0, 12) << ")\n";
}

int cmd_roundtrip(const CommonOpts& opts) {
    const difflab::LabConfig cfg = effective_config(opts);
    const auto rows = difflab::run_roundtrip_sweep(cfg);
    finish_run(opts, "roundtrip", cfg, {{"roundtrip.csv", difflab::roundtrip_csv(rows)}});
    return 0;
}

int cmd_edit(const CommonOpts& opts) {
    const difflab::LabConfig cfg = effective_config(opts);
    const difflab::EditRunOutputs run = difflab::run_edit_pipeline(cfg);
    std::cout << run.report_text;
    finish_run(opts, "edit", cfg,
               {{"report.txt", run.report_text},
                {"frames_src.csv", difflab::frames_csv(run.src)},
                {"frames_ccs.csv", run.frames_ccs},
                {"frames_final.csv", run.frames_final},
                {"ccs_trace.csv", run.ccs_trace},
                {"tcs_trace.csv", run.tcs_trace}});
    return 0;
}

int cmd_ablate(const CommonOpts& opts, const std::string& which) {
    const difflab::LabConfig cfg = effective_config(opts);
    difflab::SeededNoiseSource video_source(cfg.pipeline.seed, difflab::kStreamVideo);
    const difflab::FrameSequence src = difflab::gen_toy_video(cfg.pipeline, video_source);
    const difflab::ToyEdit edit = difflab::make_toy_edit(cfg.pipeline);
    const difflab::Latent first_edit = difflab::apply_toy_edit(src.frames.front(), edit);
    auto rows = difflab::run_ablation(src, first_edit, cfg.pipeline);
    if (which != "all") {
        std::vector<difflab::AblationRow> filtered;
        for (const auto& row : rows) {
            if (row.variant == which) filtered.push_back(row);
        }
        if (filtered.empty()) throw std::runtime_error("unknown ablation variant: " + which);
        rows = filtered;
    }
    const std::string csv = difflab::ablation_csv(rows);
    std::cout << csv;
    finish_run(opts, "ablate", cfg, {{"ablate.csv", csv}});
    return 0;
}

int cmd_accept(const CommonOpts& opts) {
    const difflab::LabConfig cfg = effective_config(opts);
    const auto results = difflab::run_acceptance(cfg);
    const bool ok = difflab::print_acceptance(results, std::cout);
    finish_run(opts, "accept", cfg, {{"acceptance.csv", difflab::acceptance_csv(results)}});
    return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"difflab: diffusion sampling laboratory (DDIM inversion error analysis, "
                 "content-consistency sampling, SVGD temporal alignment)"};
    app.require_subcommand(1);

    CommonOpts roundtrip_opts, edit_opts, ablate_opts, accept_opts;
    std::string ablate_which = "all";

    CLI::App* roundtrip = app.add_subcommand("roundtrip", "inversion round-trip error sweep, CSV output");
    add_common(roundtrip, roundtrip_opts);

    CLI::App* edit = app.add_subcommand("edit", "run the full edit-propagation pipeline on the toy video");
    add_common(edit, edit_opts);

    CLI::App* ablate = app.add_subcommand("ablate", "compare full / no-ccs / no-tcs variants");
    add_common(ablate, ablate_opts);
    ablate->add_option("--which", ablate_which, "variant: full, no-ccs, no-tcs or all")
        ->check(CLI::IsMember({"full", "no-ccs", "no-tcs", "all"}));

    CLI::App* accept = app.add_subcommand("accept", "run the acceptance suite");
    add_common(accept, accept_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (roundtrip->parsed()) return cmd_roundtrip(roundtrip_opts);
        if (edit->parsed()) return cmd_edit(edit_opts);
        if (ablate->parsed()) return cmd_ablate(ablate_opts, ablate_which);
        if (accept->parsed()) return cmd_accept(accept_opts);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
