#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "crossview/geodata.hpp"
#include "crossview/model.hpp"
#include "crossview/pairing.hpp"
#include "crossview/stats.hpp"
#include "crossview/training.hpp"

namespace crossview {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Full run configuration, loaded from a JSON file with namespaced sections.
/// Unknown keys anywhere in the document are rejected so typos fail loudly.
struct RunConfig {
    uint64_t seed = 42;
    bool deterministic = true;
    int jobs = 1;
    std::string output_dir = "run_out";

    struct {
        std::string path;
        std::string crs = "local";
        std::string residential_field = "residential";
    } footprints;

    struct {
        std::string path;
        bool require_image_files = false;
    } captures;

    std::string labels_path;
    std::string uav_raster_path;
    std::string tir_raster_path;  // empty: association stage is skipped

    pairing::PairingConfig pairing;
    model::GcvitConfig model;

    struct TrainSection {
        training::TrainConfig opt;
        int folds = 5;
        double block_size_m = 100.0;
        int eval_fold = 0;            // held-out fold
        double val_fraction = 0.15;   // block-level carve-out of training folds
    } train;

    stats::AssociationConfig associate;

    void validate() const;
};

RunConfig load_run_config(const std::string& path);

/// The effective configuration as canonical JSON (for the frozen echo file).
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace crossview
