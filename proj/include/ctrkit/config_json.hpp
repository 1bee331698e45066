#pragma once

#include <string>

#include "ctrkit/trainer.hpp"

namespace ctrkit {

// Flat JSON view of a TrainConfig; the same document is echoed into
// checkpoints so a model can be rebuilt from its file alone.
std::string train_config_to_json(const TrainConfig& cfg);

// Applies a flat JSON document on top of the given config. Unknown keys are
// rejected. Extra non-TrainConfig keys used by the CLI (min_freq,
// val_fraction) are tolerated and readable via json_get_* helpers.
void apply_json_overrides(TrainConfig& cfg, const std::string& json_text);

TrainConfig train_config_from_json(const std::string& json_text);

double json_get_double(const std::string& json_text, const std::string& key, double fallback);
std::size_t json_get_size(const std::string& json_text, const std::string& key, std::size_t fallback);

}  // namespace ctrkit
