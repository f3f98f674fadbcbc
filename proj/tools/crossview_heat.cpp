// crossview-heat: end-to-end driver for the cross-view attribute pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "crossview/pipeline.hpp"
#include "crossview/synth.hpp"

namespace {

struct Overrides {
    std::optional<uint64_t> seed;
    std::optional<int> jobs;
    std::optional<bool> deterministic;
    std::optional<double> max_distance;
    std::optional<double> pad_deg;
    std::optional<int> folds;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, std::string& config_path, Overrides& ov) {
    cmd->add_option("--config", config_path, "run configuration JSON")->required();
    cmd->add_option("--seed", ov.seed, "override the run seed");
    cmd->add_option("--jobs", ov.jobs, "worker concurrency cap");
    cmd->add_flag("--deterministic,!--no-deterministic", ov.deterministic,
                  "bit-reproducible mode");
    cmd->add_option("--max-distance", ov.max_distance, "pairing distance cutoff in meters");
    cmd->add_option("--pad-deg", ov.pad_deg, "facade window padding in degrees");
    cmd->add_option("--folds", ov.folds, "spatial cross-validation fold count");
    cmd->add_option("--out", ov.out, "override output directory");
}

int run_stages(const std::string& config_path, const Overrides& ov,
               const std::vector<std::string>& stages) {
    crossview::RunConfig cfg = crossview::load_run_config(config_path);
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.jobs) cfg.jobs = *ov.jobs;
    if (ov.deterministic) cfg.deterministic = *ov.deterministic;
    if (ov.max_distance) cfg.pairing.max_match_distance_m = *ov.max_distance;
    if (ov.pad_deg) cfg.pairing.pad_deg = *ov.pad_deg;
    if (ov.folds) cfg.train.folds = *ov.folds;
    if (ov.out) cfg.output_dir = *ov.out;
    cfg.train.opt.seed = cfg.seed;
    cfg.train.opt.deterministic = cfg.deterministic;

    const auto manifest = crossview::pipeline::run_pipeline(cfg, stages);
    for (const auto& s : manifest.stages) {
        std::fprintf(stderr, "[%s] %s (%.1fs)%s%s\n", s.name.c_str(), s.status.c_str(),
                     s.seconds, s.message.empty() ? "" : ": ", s.message.c_str());
        if (s.status == "failed") {
            std::fprintf(stderr, "error: stage '%s' failed\n", s.name.c_str());
            return 2;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-view building attribute and heat association pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic test scene");
    crossview::synth::SynthSpec spec;
    std::string synth_out = "scene";
    synth_cmd->add_option("--out", synth_out, "scene output directory");
    synth_cmd->add_option("--buildings", spec.n_buildings, "number of regular buildings");
    synth_cmd->add_option("--seed", spec.seed, "scene seed");
    synth_cmd->add_option("--residential-pct", spec.pct_residential,
                          "fraction of residential buildings");
    synth_cmd->add_option("--too-far", spec.n_too_far, "extra out-of-range buildings");
    synth_cmd->add_option("--obstructed", spec.n_obstructed, "extra obstructed buildings");
    synth_cmd->add_flag("--complementary-veg", spec.complementary_vegetation_cues,
                        "split vegetation cues between the two views");
    synth_cmd->add_option("--pano-width", spec.pano_width_px, "panorama width in pixels");
    synth_cmd->add_option("--pano-height", spec.pano_height_px, "panorama height in pixels");

    struct Sub {
        CLI::App* cmd;
        std::vector<std::string> stages;
        std::string config_path;
        Overrides ov;
    };
    std::vector<Sub> subs;
    subs.reserve(8);  // CLI11 keeps pointers into elements; no reallocation allowed
    auto add_stage_cmd = [&](const char* name, const char* desc,
                             std::vector<std::string> stages) {
        Sub s;
        s.cmd = app.add_subcommand(name, desc);
        s.stages = std::move(stages);
        subs.push_back(std::move(s));
        add_common(subs.back().cmd, subs.back().config_path, subs.back().ov);
    };
    add_stage_cmd("pair", "construct cross-view pairs", {"ingest", "pair"});
    add_stage_cmd("features", "compute per-building features",
                  {"ingest", "pair", "features"});
    add_stage_cmd("train", "train the classifier ablation set", {"ingest", "pair", "train"});
    add_stage_cmd("eval", "evaluate on the held-out spatial fold",
                  {"ingest", "pair", "train", "eval"});
    add_stage_cmd("associate", "attribute vs thermal association tests",
                  {"ingest", "pair", "features", "train", "eval", "associate"});
    add_stage_cmd("run-all", "full pipeline",
                  {"ingest", "pair", "features", "train", "eval", "associate"});

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth_cmd->parsed()) {
            const auto scene = crossview::synth::generate_synthetic_scene(spec, synth_out);
            std::printf("scene: %d buildings, %d captures -> %s\n", scene.n_buildings,
                        scene.n_captures, scene.dir.c_str());
            return 0;
        }
        for (const auto& s : subs)
            if (s.cmd->parsed()) return run_stages(s.config_path, s.ov, s.stages);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
