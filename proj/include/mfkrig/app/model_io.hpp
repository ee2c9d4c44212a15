#pragma once

#include <string>

#include "mfkrig/mfgp.hpp"

namespace mfkrig::app {

inline constexpr int kModelFormatVersion = 1;

/// Self-contained JSON document: both training sets, all hyperparameters and
/// the fit logs. Doubles are written with round-trip precision.
std::string model_to_json(const mfgp::MfModel& model);

/// Rebuilds caches from the stored parameters. Throws ParseError.
mfgp::MfModel model_from_json(const std::string& text);

void save_model(const mfgp::MfModel& model, const std::string& path);
mfgp::MfModel load_model(const std::string& path);

}  // namespace mfkrig::app
