#include "crossview/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>

namespace crossview {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown config key '" + where + it.key() + "'");
}

template <typename T>
void take(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

pairing::PanoramaConvention convention_from_name(const std::string& name) {
    if (name == "heading_start") return pairing::PanoramaConvention::HeadingStart;
    if (name == "heading_center") return pairing::PanoramaConvention::HeadingCenter;
    if (name == "north_start") return pairing::PanoramaConvention::NorthStart;
    throw ConfigError("unknown panorama convention '" + name + "'");
}

std::string convention_name(pairing::PanoramaConvention c) {
    switch (c) {
        case pairing::PanoramaConvention::HeadingStart: return "heading_start";
        case pairing::PanoramaConvention::HeadingCenter: return "heading_center";
        default: return "north_start";
    }
}

}  // namespace

void RunConfig::validate() const {
    if (footprints.path.empty()) throw ConfigError("footprints.path is required");
    if (captures.path.empty()) throw ConfigError("captures.path is required");
    if (labels_path.empty()) throw ConfigError("labels.path is required");
    if (uav_raster_path.empty()) throw ConfigError("uav_raster.path is required");
    if (output_dir.empty()) throw ConfigError("output_dir is required");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (train.folds < 2) throw ConfigError("train.folds must be >= 2");
    if (train.eval_fold < 0 || train.eval_fold >= train.folds)
        throw ConfigError("train.eval_fold out of range");
    if (train.val_fraction <= 0.0 || train.val_fraction >= 1.0)
        throw ConfigError("train.val_fraction must be in (0, 1)");
    if (pairing.max_match_distance_m <= 0.0)
        throw ConfigError("pairing.max_distance_m must be positive");
    if (associate.alpha <= 0.0 || associate.alpha >= 1.0)
        throw ConfigError("associate.alpha must be in (0, 1)");
    if (model.chip_size != pairing.chip_size)
        throw ConfigError("model.chip_size must match pairing.chip_size");
    model.validate();
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");

    reject_unknown(doc,
                   {"seed", "deterministic", "jobs", "output_dir", "footprints", "captures",
                    "labels", "uav_raster", "tir_raster", "pairing", "model", "train",
                    "associate"},
                   "");

    RunConfig cfg;
    take(doc, "seed", cfg.seed);
    take(doc, "deterministic", cfg.deterministic);
    take(doc, "jobs", cfg.jobs);
    take(doc, "output_dir", cfg.output_dir);

    if (doc.contains("footprints")) {
        const json& j = doc["footprints"];
        reject_unknown(j, {"path", "crs", "residential_field"}, "footprints.");
        take(j, "path", cfg.footprints.path);
        take(j, "crs", cfg.footprints.crs);
        take(j, "residential_field", cfg.footprints.residential_field);
    }
    if (doc.contains("captures")) {
        const json& j = doc["captures"];
        reject_unknown(j, {"path", "require_image_files"}, "captures.");
        take(j, "path", cfg.captures.path);
        take(j, "require_image_files", cfg.captures.require_image_files);
    }
    if (doc.contains("labels")) {
        const json& j = doc["labels"];
        reject_unknown(j, {"path"}, "labels.");
        take(j, "path", cfg.labels_path);
    }
    if (doc.contains("uav_raster")) {
        const json& j = doc["uav_raster"];
        reject_unknown(j, {"path"}, "uav_raster.");
        take(j, "path", cfg.uav_raster_path);
    }
    if (doc.contains("tir_raster")) {
        const json& j = doc["tir_raster"];
        reject_unknown(j, {"path"}, "tir_raster.");
        take(j, "path", cfg.tir_raster_path);
    }
    if (doc.contains("pairing")) {
        const json& j = doc["pairing"];
        reject_unknown(j,
                       {"max_distance_m", "pad_deg", "chip_size", "min_mask_fraction",
                        "elevation_band_lo", "elevation_band_hi", "convention",
                        "obstruction_rays"},
                       "pairing.");
        take(j, "max_distance_m", cfg.pairing.max_match_distance_m);
        take(j, "pad_deg", cfg.pairing.pad_deg);
        take(j, "chip_size", cfg.pairing.chip_size);
        take(j, "min_mask_fraction", cfg.pairing.min_mask_fraction);
        take(j, "elevation_band_lo", cfg.pairing.elevation_band_lo);
        take(j, "elevation_band_hi", cfg.pairing.elevation_band_hi);
        take(j, "obstruction_rays", cfg.pairing.obstruction_rays);
        if (j.contains("convention"))
            cfg.pairing.convention = convention_from_name(j["convention"].get<std::string>());
        cfg.model.chip_size = cfg.pairing.chip_size;
    }
    if (doc.contains("model")) {
        const json& j = doc["model"];
        reject_unknown(j,
                       {"profile", "chip_size", "patch_size", "stage_depths", "stage_dims",
                        "window_sizes", "num_heads", "mlp_ratio", "focal_gamma", "alpha_mode"},
                       "model.");
        if (j.contains("profile")) {
            const std::string p = j["profile"].get<std::string>();
            if (p == "toy")
                cfg.model = model::GcvitConfig::toy();
            else if (p == "tiny")
                cfg.model = model::GcvitConfig::tiny();
            else
                throw ConfigError("unknown model.profile '" + p + "'");
            cfg.model.chip_size = cfg.pairing.chip_size;
        }
        take(j, "chip_size", cfg.model.chip_size);
        take(j, "patch_size", cfg.model.patch_size);
        take(j, "stage_depths", cfg.model.stage_depths);
        take(j, "stage_dims", cfg.model.stage_dims);
        take(j, "window_sizes", cfg.model.window_sizes);
        take(j, "num_heads", cfg.model.num_heads);
        take(j, "mlp_ratio", cfg.model.mlp_ratio);
        take(j, "focal_gamma", cfg.model.focal_gamma);
        take(j, "alpha_mode", cfg.model.alpha_mode);
    }
    if (doc.contains("train")) {
        const json& j = doc["train"];
        reject_unknown(j,
                       {"lr", "batch_size", "max_epochs", "patience", "cosine_decay",
                        "use_focal", "focal_gamma", "augment_cap", "folds", "block_size_m",
                        "eval_fold", "val_fraction"},
                       "train.");
        take(j, "lr", cfg.train.opt.lr);
        take(j, "batch_size", cfg.train.opt.batch_size);
        take(j, "max_epochs", cfg.train.opt.max_epochs);
        take(j, "patience", cfg.train.opt.patience);
        take(j, "cosine_decay", cfg.train.opt.cosine_decay);
        take(j, "use_focal", cfg.train.opt.use_focal);
        take(j, "focal_gamma", cfg.train.opt.focal_gamma);
        take(j, "augment_cap", cfg.train.opt.augment_cap);
        take(j, "folds", cfg.train.folds);
        take(j, "block_size_m", cfg.train.block_size_m);
        take(j, "eval_fold", cfg.train.eval_fold);
        take(j, "val_fraction", cfg.train.val_fraction);
    }
    if (doc.contains("associate")) {
        const json& j = doc["associate"];
        reject_unknown(j, {"alpha", "bonferroni", "min_n"}, "associate.");
        take(j, "alpha", cfg.associate.alpha);
        take(j, "bonferroni", cfg.associate.bonferroni);
        take(j, "min_n", cfg.associate.min_n);
    }

    cfg.train.opt.seed = cfg.seed;
    cfg.train.opt.deterministic = cfg.deterministic;
    cfg.validate();
    return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
    json doc;
    doc["seed"] = cfg.seed;
    doc["deterministic"] = cfg.deterministic;
    doc["jobs"] = cfg.jobs;
    doc["output_dir"] = cfg.output_dir;
    doc["footprints"] = {{"path", cfg.footprints.path},
                         {"crs", cfg.footprints.crs},
                         {"residential_field", cfg.footprints.residential_field}};
    doc["captures"] = {{"path", cfg.captures.path},
                       {"require_image_files", cfg.captures.require_image_files}};
    doc["labels"] = {{"path", cfg.labels_path}};
    doc["uav_raster"] = {{"path", cfg.uav_raster_path}};
    if (!cfg.tir_raster_path.empty()) doc["tir_raster"] = {{"path", cfg.tir_raster_path}};
    doc["pairing"] = {{"max_distance_m", cfg.pairing.max_match_distance_m},
                      {"pad_deg", cfg.pairing.pad_deg},
                      {"chip_size", cfg.pairing.chip_size},
                      {"min_mask_fraction", cfg.pairing.min_mask_fraction},
                      {"elevation_band_lo", cfg.pairing.elevation_band_lo},
                      {"elevation_band_hi", cfg.pairing.elevation_band_hi},
                      {"convention", convention_name(cfg.pairing.convention)},
                      {"obstruction_rays", cfg.pairing.obstruction_rays}};
    doc["model"] = json::parse(model::config_to_json(cfg.model));
    doc["train"] = {{"lr", cfg.train.opt.lr},
                    {"batch_size", cfg.train.opt.batch_size},
                    {"max_epochs", cfg.train.opt.max_epochs},
                    {"patience", cfg.train.opt.patience},
                    {"cosine_decay", cfg.train.opt.cosine_decay},
                    {"use_focal", cfg.train.opt.use_focal},
                    {"focal_gamma", cfg.train.opt.focal_gamma},
                    {"augment_cap", cfg.train.opt.augment_cap},
                    {"folds", cfg.train.folds},
                    {"block_size_m", cfg.train.block_size_m},
                    {"eval_fold", cfg.train.eval_fold},
                    {"val_fraction", cfg.train.val_fraction}};
    doc["associate"] = {{"alpha", cfg.associate.alpha},
                        {"bonferroni", cfg.associate.bonferroni},
                        {"min_n", cfg.associate.min_n}};
    return doc.dump(2);
}

}  // namespace crossview
