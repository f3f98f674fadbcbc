#include "crossview/pipeline.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include "crossview/csv.hpp"
#include "crossview/features.hpp"
#include "crossview/metrics.hpp"
#include "crossview/stats.hpp"
#include "crossview/training.hpp"

namespace crossview::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PipelineError("cannot read " + path);
    uint64_t h = 1469598103934665603ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

namespace {

std::string hash_strings(const std::vector<std::string>& parts) {
    uint64_t h = 1469598103934665603ull;
    for (const auto& s : parts)
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

struct PipelineState {
    std::vector<BuildingFootprint> footprints;
    std::map<std::string, const BuildingFootprint*> footprint_by_id;
    std::vector<CaptureSample> captures;
    std::map<std::string, AttributeLabelSet> labels;
    std::optional<geo::Raster> uav;
    std::optional<geo::Raster> tir;

    pairing::DatasetResult dataset;
    std::vector<features::FeatureRecord> feature_records;
    std::vector<training::LabeledPair> labeled_pairs;
    training::SpatialFoldPlan folds;
    std::set<std::string> heldout_ids;
    std::map<model::Modality, std::unique_ptr<model::Cgcvit>> trained;
    std::map<model::Modality, std::map<Task, std::vector<int>>> heldout_preds;
    std::map<Task, std::vector<int>> heldout_truths;
};

class PanoramaCache {
public:
    explicit PanoramaCache(std::size_t capacity = 8) : cap_(capacity) {}
    cv::Mat get(const CaptureSample& cap) {
        for (auto& [id, img] : entries_)
            if (id == cap.id) return img;
        cv::Mat img = cv::imread(cap.image_ref, cv::IMREAD_COLOR);
        if (img.empty())
            throw pairing::PairingError("cannot read panorama: " + cap.image_ref);
        entries_.emplace_back(cap.id, img);
        if (entries_.size() > cap_) entries_.pop_front();
        return img;
    }

private:
    std::size_t cap_;
    std::deque<std::pair<std::string, cv::Mat>> entries_;
};

void stage_ingest(const RunConfig& cfg, PipelineState& st, StageRecord& rec,
                  const std::string& out_dir) {
    FootprintLoadOptions fopts;
    fopts.crs_spec = cfg.footprints.crs;
    fopts.residential_field = cfg.footprints.residential_field;
    auto freport = load_footprints(cfg.footprints.path, fopts);
    st.footprints = std::move(freport.footprints);
    for (const auto& fp : st.footprints) st.footprint_by_id[fp.id] = &fp;

    CaptureLoadOptions copts;
    copts.require_image_files = cfg.captures.require_image_files;
    auto creport = load_capture_index(cfg.captures.path, copts);
    st.captures = std::move(creport.captures);

    st.labels = load_labels(cfg.labels_path);
    st.uav = geo::Raster::load_image(cfg.uav_raster_path);
    if (!cfg.tir_raster_path.empty())
        st.tir = geo::Raster::load_ascii_grid(cfg.tir_raster_path);

    rec.counts["footprints"] = static_cast<long>(st.footprints.size());
    rec.counts["footprints_dropped_invalid"] = freport.dropped_invalid;
    rec.counts["captures"] = static_cast<long>(st.captures.size());
    rec.counts["captures_dropped_missing_heading"] = creport.dropped_missing_heading;
    rec.counts["labels"] = static_cast<long>(st.labels.size());

    json summary;
    for (const auto& row : summarize_labels(st.labels))
        summary[task_name(row.task)][row.cls] = {{"count", row.count},
                                                 {"percent", row.percent}};
    const std::string path = (fs::path(out_dir) / "ingest_summary.json").string();
    std::ofstream(path) << summary.dump(2) << "\n";
    rec.artifacts.push_back(path);
}

void load_cached_pairs(PipelineState& st, const std::string& pairs_dir) {
    csv::Table t = csv::read_file((fs::path(pairs_dir) / "pairs_manifest.csv").string());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string status = t.cell(r, "status");
        pairing::VisibilityVerdict v;
        v.building_id = t.cell(r, "building_id");
        if (status == "usable") {
            v.status = pairing::Visibility::Usable;
            pairing::CrossViewPair p;
            p.building_id = v.building_id;
            p.capture_id = t.cell(r, "capture_id");
            p.match_distance_m = std::stod(t.cell(r, "match_distance_m"));
            p.mask_fraction_top = std::stod(t.cell(r, "mask_fraction_top"));
            p.mask_fraction_facade = std::stod(t.cell(r, "mask_fraction_facade"));
            p.top_chip =
                cv::imread((fs::path(pairs_dir) / (p.building_id + "_top.png")).string());
            p.facade_chip =
                cv::imread((fs::path(pairs_dir) / (p.building_id + "_facade.png")).string());
            if (p.top_chip.empty() || p.facade_chip.empty())
                throw PipelineError("cached chip missing for " + p.building_id);
            st.dataset.census.usable++;
            st.dataset.pairs.push_back(std::move(p));
        } else if (status == "too_far") {
            v.status = pairing::Visibility::TooFar;
            st.dataset.census.too_far++;
        } else if (status == "obstructed") {
            v.status = pairing::Visibility::Obstructed;
            st.dataset.census.obstructed++;
        } else if (status == "non_residential") {
            v.status = pairing::Visibility::NonResidential;
            st.dataset.census.non_residential++;
        } else {
            st.dataset.census.chip_failures++;
            continue;
        }
        st.dataset.verdicts.push_back(std::move(v));
    }
}

void stage_pair(const RunConfig& cfg, PipelineState& st, StageRecord& rec,
                const std::string& out_dir) {
    const std::string pairs_dir = (fs::path(out_dir) / "pairs").string();
    const std::string hash_path = (fs::path(out_dir) / "pairs.hash").string();
    const std::string want_hash = hash_strings(
        {hash_file(cfg.footprints.path), hash_file(cfg.captures.path),
         hash_file(cfg.uav_raster_path), std::to_string(cfg.pairing.max_match_distance_m),
         std::to_string(cfg.pairing.pad_deg), std::to_string(cfg.pairing.chip_size),
         std::to_string(cfg.pairing.min_mask_fraction),
         std::to_string(cfg.pairing.obstruction_rays),
         std::to_string(static_cast<int>(cfg.pairing.convention))});

    std::string have_hash;
    if (std::ifstream in(hash_path); in) std::getline(in, have_hash);
    if (have_hash == want_hash &&
        fs::exists(fs::path(pairs_dir) / "pairs_manifest.csv")) {
        load_cached_pairs(st, pairs_dir);
        rec.status = "cached";
    } else {
        pairing::CaptureIndex index(st.captures);
        PanoramaCache cache;
        st.dataset = pairing::build_dataset(
            st.footprints, index, *st.uav,
            [&cache](const CaptureSample& c) { return cache.get(c); }, cfg.pairing);
        fs::create_directories(pairs_dir);
        pairing::write_dataset(st.dataset, pairs_dir);
        std::ofstream(hash_path) << want_hash << "\n";
    }
    rec.counts["usable"] = st.dataset.census.usable;
    rec.counts["too_far"] = st.dataset.census.too_far;
    rec.counts["obstructed"] = st.dataset.census.obstructed;
    rec.counts["non_residential"] = st.dataset.census.non_residential;
    rec.counts["chip_failures"] = st.dataset.census.chip_failures;
    rec.artifacts.push_back((fs::path(pairs_dir) / "pairs_manifest.csv").string());
    if (st.dataset.pairs.empty()) throw PipelineError("no usable cross-view pairs");
}

void stage_features(const RunConfig& cfg, PipelineState& st, StageRecord& rec,
                    const std::string& out_dir) {
    const auto residential = residential_subset(st.footprints);
    for (const auto& p : st.dataset.pairs) {
        auto it = st.footprint_by_id.find(p.building_id);
        if (it == st.footprint_by_id.end()) continue;
        const BuildingFootprint& fp = *it->second;
        features::FeatureRecord fr;
        fr.building_id = p.building_id;
        fr.roof_brightness = features::brightness(p.top_chip, cfg.pairing.fill_value);
        fr.wall_brightness = features::brightness(p.facade_chip, cfg.pairing.fill_value);
        fr.mean_dist_4nn_m = features::mean_dist_4nn(fp, residential);
        if (st.tir) {
            auto [v, ok] = features::zonal_tir(*st.tir, fp);
            fr.tir_value = v;
            fr.tir_valid = ok;
        }
        st.feature_records.push_back(std::move(fr));
    }
    csv::Table t;
    t.header = {"building_id", "roof_brightness", "wall_brightness", "mean_dist_4nn_m",
                "tir_value", "tir_valid"};
    for (const auto& fr : st.feature_records)
        t.rows.push_back({fr.building_id, std::to_string(fr.roof_brightness),
                          std::to_string(fr.wall_brightness),
                          fr.mean_dist_4nn_m ? std::to_string(*fr.mean_dist_4nn_m) : "",
                          std::to_string(fr.tir_value), fr.tir_valid ? "1" : "0"});
    const std::string path = (fs::path(out_dir) / "features.csv").string();
    csv::write_file(path, t);
    rec.counts["feature_rows"] = static_cast<long>(st.feature_records.size());
    rec.counts["tir_valid"] =
        std::count_if(st.feature_records.begin(), st.feature_records.end(),
                      [](const auto& f) { return f.tir_valid; });
    rec.artifacts.push_back(path);
}

void build_labeled_pairs(PipelineState& st) {
    for (const auto& p : st.dataset.pairs) {
        auto lit = st.labels.find(p.building_id);
        auto fit = st.footprint_by_id.find(p.building_id);
        if (lit == st.labels.end() || fit == st.footprint_by_id.end()) continue;
        training::LabeledPair lp;
        lp.building_id = p.building_id;
        lp.top_chip = p.top_chip;
        lp.facade_chip = p.facade_chip;
        lp.labels = lit->second;
        lp.centroid = fit->second->centroid;
        st.labeled_pairs.push_back(std::move(lp));
    }
}

void stage_train(const RunConfig& cfg, PipelineState& st, StageRecord& rec,
                 const std::string& out_dir) {
    build_labeled_pairs(st);
    if (st.labeled_pairs.size() < static_cast<std::size_t>(cfg.train.folds))
        throw PipelineError("not enough labeled pairs for " +
                            std::to_string(cfg.train.folds) + "-fold blocking");

    st.folds = training::make_spatial_folds(st.labeled_pairs, cfg.train.folds,
                                            cfg.train.block_size_m);
    std::vector<training::LabeledPair> remaining;
    for (const auto& lp : st.labeled_pairs) {
        if (st.folds.fold_of(lp.building_id) == cfg.train.eval_fold)
            st.heldout_ids.insert(lp.building_id);
        else
            remaining.push_back(lp);
    }
    if (st.heldout_ids.empty() || remaining.empty())
        throw PipelineError("degenerate fold split (empty train or eval partition)");

    const auto split = training::make_split(
        remaining, {1.0 - cfg.train.val_fraction, cfg.train.val_fraction, 0.0},
        cfg.train.block_size_m, cfg.seed);

    rec.counts["train"] = static_cast<long>(split.train.size());
    rec.counts["val"] = static_cast<long>(split.val.size());
    rec.counts["heldout"] = static_cast<long>(st.heldout_ids.size());

    for (model::Modality m :
         {model::Modality::Multi, model::Modality::SvOnly, model::Modality::UavOnly}) {
        training::TrainConfig tc = cfg.train.opt;
        tc.focal_gamma = cfg.model.focal_gamma;
        auto result = training::train(st.labeled_pairs, split.train, split.val, cfg.model, m, tc);

        const std::string tag = model::modality_name(m);
        const std::string ckpt = (fs::path(out_dir) / ("ckpt_" + tag + ".bin")).string();
        model::save_checkpoint(ckpt, *result.model, result.best_epoch,
                               std::to_string(cfg.seed));
        csv::Table curve;
        curve.header = {"epoch", "train_loss", "val_loss", "val_f1_mean"};
        for (const auto& e : result.curves)
            curve.rows.push_back({std::to_string(e.epoch), std::to_string(e.train_loss),
                                  std::to_string(e.val_loss), std::to_string(e.val_f1_mean)});
        const std::string curve_path =
            (fs::path(out_dir) / ("loss_curve_" + tag + ".csv")).string();
        csv::write_file(curve_path, curve);
        rec.artifacts.push_back(ckpt);
        rec.artifacts.push_back(curve_path);
        rec.counts["epochs_" + tag] = static_cast<long>(result.curves.size());
        st.trained[m] = std::move(result.model);
    }
}

void stage_eval(const RunConfig& cfg, PipelineState& st, StageRecord& rec,
                const std::string& out_dir) {
    std::vector<const training::LabeledPair*> heldout;
    for (const auto& lp : st.labeled_pairs)
        if (st.heldout_ids.count(lp.building_id)) heldout.push_back(&lp);
    if (heldout.empty()) throw PipelineError("empty held-out fold");

    st.heldout_truths = training::truths_of(heldout);
    for (auto& [m, net] : st.trained)
        st.heldout_preds[m] =
            training::predict(*net, heldout, m, cfg.train.opt.batch_size);

    const auto report = training::ablation_report(st.heldout_preds, st.heldout_truths);
    const std::string json_path = (fs::path(out_dir) / "eval_report.json").string();
    std::ofstream(json_path) << training::eval_report_to_json(report) << "\n";
    const std::string table_path = (fs::path(out_dir) / "eval_table.txt").string();
    std::ofstream(table_path) << training::eval_report_to_table(report);

    csv::Table preds;
    preds.header = {"building_id", "modality"};
    for (Task t : kAllTasks) preds.header.push_back(task_name(t));
    for (const auto& [m, by_task] : st.heldout_preds)
        for (std::size_t i = 0; i < heldout.size(); ++i) {
            std::vector<std::string> row = {heldout[i]->building_id, model::modality_name(m)};
            for (Task t : kAllTasks)
                row.push_back(task_vocabulary(t)[static_cast<std::size_t>(
                    by_task.at(t)[i])]);
            preds.rows.push_back(std::move(row));
        }
    const std::string preds_path = (fs::path(out_dir) / "predictions.csv").string();
    csv::write_file(preds_path, preds);

    rec.counts["eval_size"] = report.eval_size;
    rec.artifacts = {json_path, table_path, preds_path};
}

void stage_associate(const RunConfig& cfg, PipelineState& st, StageRecord& rec,
                     const std::string& out_dir) {
    if (!st.tir) {
        rec.status = "skipped";
        rec.message = "no tir_raster configured";
        return;
    }
    auto multi_it = st.trained.find(model::Modality::Multi);
    if (multi_it == st.trained.end()) throw PipelineError("no trained multi-modality model");

    // Predicted attributes over every labeled pair, fused modality.
    std::vector<const training::LabeledPair*> all_pairs;
    for (const auto& lp : st.labeled_pairs) all_pairs.push_back(&lp);
    const auto preds = training::predict(*multi_it->second, all_pairs, model::Modality::Multi,
                                         cfg.train.opt.batch_size);

    std::map<std::string, const features::FeatureRecord*> feat_by_id;
    for (const auto& fr : st.feature_records) feat_by_id[fr.building_id] = &fr;

    std::vector<stats::AssociationRecord> records;
    for (std::size_t i = 0; i < all_pairs.size(); ++i) {
        auto fit = feat_by_id.find(all_pairs[i]->building_id);
        if (fit == feat_by_id.end()) continue;
        stats::AssociationRecord r;
        r.building_id = all_pairs[i]->building_id;
        for (std::size_t t = 0; t < kAllTasks.size(); ++t)
            r.predicted[t] = preds.at(kAllTasks[t])[i];
        r.roof_brightness = fit->second->roof_brightness;
        r.wall_brightness = fit->second->wall_brightness;
        r.mean_dist_4nn_m = fit->second->mean_dist_4nn_m;
        r.tir_value = fit->second->tir_value;
        r.tir_valid = fit->second->tir_valid;
        records.push_back(std::move(r));
    }

    const auto results = stats::run_association_suite(records, cfg.associate);
    const std::string assoc_dir = (fs::path(out_dir) / "association").string();
    fs::create_directories(assoc_dir);
    stats::write_association_report(results, records, assoc_dir);

    rec.counts["records"] = static_cast<long>(records.size());
    rec.counts["tests"] =
        std::count_if(results.begin(), results.end(), [](const auto& t) { return !t.skipped; });
    rec.counts["significant"] = std::count_if(results.begin(), results.end(),
                                              [](const auto& t) { return t.significant; });
    rec.artifacts.push_back((fs::path(assoc_dir) / "association_results.json").string());
}

}  // namespace

std::string RunManifest::to_json() const {
    json doc;
    doc["ok"] = ok;
    doc["stages"] = json::array();
    for (const auto& s : stages) {
        json js = {{"name", s.name},
                   {"status", s.status},
                   {"seconds", s.seconds},
                   {"counts", s.counts},
                   {"artifacts", s.artifacts}};
        if (!s.message.empty()) js["message"] = s.message;
        doc["stages"].push_back(std::move(js));
    }
    return doc.dump(2);
}

RunManifest run_pipeline(const RunConfig& cfg, const std::vector<std::string>& stages) {
    cfg.validate();
    fs::create_directories(cfg.output_dir);
    std::ofstream(fs::path(cfg.output_dir) / "config_echo.json")
        << run_config_to_json(cfg) << "\n";

    const std::set<std::string> requested(stages.begin(), stages.end());
    for (const auto& s : requested)
        if (std::find(kStageOrder.begin(), kStageOrder.end(), s) == kStageOrder.end())
            throw PipelineError("unknown stage '" + s + "'");

    PipelineState st;
    RunManifest manifest;
    bool upstream_failed = false;
    std::string failed_stage;

    using StageFn = std::function<void(const RunConfig&, PipelineState&, StageRecord&,
                                       const std::string&)>;
    const std::vector<std::pair<std::string, StageFn>> table = {
        {"ingest", stage_ingest}, {"pair", stage_pair},   {"features", stage_features},
        {"train", stage_train},   {"eval", stage_eval},   {"associate", stage_associate}};

    for (const auto& [name, fn] : table) {
        if (!requested.count(name)) continue;
        StageRecord rec;
        rec.name = name;
        if (upstream_failed) {
            rec.status = "skipped";
            rec.message = "upstream stage '" + failed_stage + "' failed";
            manifest.stages.push_back(std::move(rec));
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        try {
            rec.status = "ok";  // stage functions may override with cached/skipped
            fn(cfg, st, rec, cfg.output_dir);
        } catch (const std::exception& e) {
            rec.status = "failed";
            rec.message = e.what();
            manifest.ok = false;
            upstream_failed = true;
            failed_stage = name;
        }
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        manifest.stages.push_back(std::move(rec));
    }

    std::ofstream(fs::path(cfg.output_dir) / "run_manifest.json") << manifest.to_json() << "\n";
    return manifest;
}

}  // namespace crossview::pipeline
