#include "mfkrig/app/commands.hpp"

#include <json.hpp>

#include "mfkrig/app/csv.hpp"
#include "mfkrig/app/model_io.hpp"
#include "mfkrig/error.hpp"

namespace mfkrig::app {

using nlohmann::json;

mfgp::MfFitConfig fit_config_from_json(const std::string& text, Eigen::Index dim, const mfgp::MfData& data) {
  mfgp::MfFitConfig c;
  try {
    const json j = text.empty() ? json::object() : json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "fit config must be a JSON object");
    auto str = [&j](const char* key, const char* fallback) { return j.value(key, std::string(fallback)); };
    c.lf_basis = gp::BasisSpec::from_name(str("lf_basis", "constant"), dim);
    c.hf_basis = gp::BasisSpec::from_name(str("hf_basis", "constant"), dim);
    c.rho_basis = gp::BasisSpec::from_name(str("rho_basis", "constant"), dim);

    optimize::MultiStartConfig s;
    s.n_starts = j.value("n_starts", s.n_starts);
    s.max_iterations = j.value("max_iterations", s.max_iterations);
    const auto seed = j.value("seed", std::uint64_t{0});
    c.lf_search = s;
    c.lf_search.rng_seed = seed;
    c.hf_search = s;
    c.hf_search.rng_seed = seed + 1;
    c.lf_search.validate();

    c.em.max_em_iterations = j.value("max_em_iterations", c.em.max_em_iterations);
    c.em.loglik_rel_tolerance = j.value("loglik_rel_tolerance", c.em.loglik_rel_tolerance);
    c.em.inner_starts = j.value("inner_starts", c.em.inner_starts);
    c.em.validate();

    if (j.value("lf_noise_free", false)) {
      gp::HyperBounds b = gp::HyperBounds::defaults_for(data.lf.x);
      b.eta_lower = b.eta_upper = 0.0;
      c.lf_bounds = b;
    }
    if (j.value("hf_noise_free", false)) {
      gp::HyperBounds b = gp::HyperBounds::defaults_for(data.hf.x);
      b.eta_lower = b.eta_upper = 0.0;
      c.hf_bounds = b;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad fit config: ") + e.what());
  }
  return c;
}

mfgp::MfModel fit_cmd(const std::string& lf_csv, const std::string& hf_csv, const std::string& config_path,
                      const std::string& model_out_path) {
  mfgp::MfData data;
  const CsvTable lf = read_csv(lf_csv);
  data.lf = dataset_from_csv(lf, -1, lf_csv);
  data.hf = dataset_from_csv(read_csv(hf_csv), static_cast<Eigen::Index>(lf.header.size()), hf_csv);
  const std::string text = config_path.empty() ? std::string() : read_text_file(config_path);
  const mfgp::MfFitConfig config = fit_config_from_json(text, data.dim(), data);
  mfgp::MfModel model = mfgp::fit_mf(data, config);
  save_model(model, model_out_path);
  return model;
}

void predict_cmd(const std::string& model_path, const std::string& x_csv, Fidelity level, NoiseMode mode,
                 const std::string& out_csv) {
  const mfgp::MfModel model = load_model(model_path);
  const CsvTable in = read_csv(x_csv);
  const Eigen::Index dim = model.lf_model.data.dim();
  if (in.values.cols() != dim) {
    throw Error(ErrorCode::DimensionMismatch, x_csv + ": found " + std::to_string(in.values.cols()) +
                                                  " input columns, model expects " + std::to_string(dim));
  }
  const PredictiveDistribution p = mfgp::predict_mf(model, in.values, level, mode, CovMode::diagonal);
  CsvTable out;
  out.header = in.header;
  out.header.emplace_back("mean");
  out.header.emplace_back("sd");
  out.values.resize(in.values.rows(), dim + 2);
  out.values.leftCols(dim) = in.values;
  out.values.col(dim) = p.mean;
  out.values.col(dim + 1) = p.sd();
  write_csv(out_csv, out);
}

}  // namespace mfkrig::app
