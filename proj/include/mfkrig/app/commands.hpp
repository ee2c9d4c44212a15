#pragma once

#include <string>

#include "mfkrig/mfgp.hpp"

namespace mfkrig::app {

/// Reads the JSON fit configuration; absent keys keep their defaults.
/// Keys: lf_basis, hf_basis, rho_basis, n_starts, max_iterations, seed,
/// lf_noise_free, hf_noise_free, max_em_iterations, loglik_rel_tolerance, inner_starts.
mfgp::MfFitConfig fit_config_from_json(const std::string& text, Eigen::Index dim, const mfgp::MfData& data);

/// Fits on two CSV files and writes the model file. Returns the fitted model.
mfgp::MfModel fit_cmd(const std::string& lf_csv, const std::string& hf_csv, const std::string& config_path,
                      const std::string& model_out_path);

/// Writes a CSV with the input columns followed by mean and sd.
void predict_cmd(const std::string& model_path, const std::string& x_csv, Fidelity level, NoiseMode mode,
                 const std::string& out_csv);

}  // namespace mfkrig::app
