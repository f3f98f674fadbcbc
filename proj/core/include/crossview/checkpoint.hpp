#pragma once

#include <memory>
#include <string>

#include "crossview/model.hpp"

namespace crossview::model {

/// Self-describing binary checkpoint: magic, JSON header (config echo,
/// parameter table, training step, RNG state), raw float32 parameter blob.
void save_checkpoint(const std::string& path, const Cgcvit& model, long step,
                     const std::string& rng_state);

struct LoadedCheckpoint {
    std::unique_ptr<Cgcvit> model;
    long step = 0;
    std::string rng_state;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

/// JSON round-trip for the model config (used by checkpoints and run echoes).
std::string config_to_json(const GcvitConfig& cfg);
GcvitConfig config_from_json(const std::string& json_text);

}  // namespace crossview::model
