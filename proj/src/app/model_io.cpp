#include "mfkrig/app/model_io.hpp"

#include <json.hpp>

#include "mfkrig/app/csv.hpp"
#include "mfkrig/error.hpp"

namespace mfkrig::app {

using nlohmann::json;

namespace {

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec(m.row(i).transpose()));
  return rows;
}

Eigen::VectorXd to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd to_mat(const json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Eigen::VectorXd row = to_vec(j[i]);
    if (row.size() != cols) throw Error(ErrorCode::ParseError, "ragged input matrix in model file");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

json dataset(const Dataset& d) { return {{"x", mat(d.x)}, {"z", vec(d.z)}}; }

Dataset to_dataset(const json& j, Eigen::Index dim) { return Dataset{to_mat(j.at("x"), dim), to_vec(j.at("z"))}; }

}  // namespace

std::string model_to_json(const mfgp::MfModel& m) {
  const auto& lf = m.lf_model;
  const auto& hp = m.hf_params;
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["input_dim"] = lf.data.dim();
  doc["lf"] = {
      {"basis", lf.basis.name},
      {"data", dataset(lf.data)},
      {"beta", vec(lf.hyper.beta)},
      {"sigma2", lf.hyper.kernel.sigma2},
      {"theta", vec(lf.hyper.kernel.theta.values())},
      {"eta", lf.hyper.kernel.eta},
      {"final_nll", lf.fit_log.final_nll},
  };
  doc["hf"] = {
      {"basis", m.hf_basis.name},
      {"rho_basis", m.rho_basis.name},
      {"data", dataset(m.hf_data)},
      {"beta_rho", vec(hp.beta_rho)},
      {"beta_h", vec(hp.beta_h)},
      {"sigma2_h", hp.sigma2_h},
      {"theta_h", vec(hp.theta_h.values())},
      {"eta_h", hp.eta_h},
  };
  doc["em_log"] = m.em_log;
  return doc.dump(2) + "\n";
}

mfgp::MfModel model_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error(ErrorCode::ParseError, "unsupported model format_version " + std::to_string(version));
    }
    const auto dim = doc.at("input_dim").get<Eigen::Index>();
    const json& l = doc.at("lf");
    const json& h = doc.at("hf");

    gp::GpHyper lf_hyper{to_vec(l.at("beta")),
                         kernels::KernelParams{kernels::LengthScales(to_vec(l.at("theta"))), l.at("sigma2").get<double>(),
                                               l.at("eta").get<double>()}};
    gp::TrainedGp lf = gp::make_trained_gp(to_dataset(l.at("data"), dim),
                                           gp::BasisSpec::from_name(l.at("basis").get<std::string>(), dim),
                                           std::move(lf_hyper));
    lf.fit_log.final_nll = l.at("final_nll").get<double>();

    mfgp::HfParams hp;
    hp.beta_rho = to_vec(h.at("beta_rho"));
    hp.beta_h = to_vec(h.at("beta_h"));
    hp.sigma2_h = h.at("sigma2_h").get<double>();
    hp.theta_h = kernels::LengthScales(to_vec(h.at("theta_h")));
    hp.eta_h = h.at("eta_h").get<double>();
    return mfgp::make_mf_model(std::move(lf), to_dataset(h.at("data"), dim), std::move(hp),
                               gp::BasisSpec::from_name(h.at("basis").get<std::string>(), dim),
                               gp::BasisSpec::from_name(h.at("rho_basis").get<std::string>(), dim),
                               doc.at("em_log").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const mfgp::MfModel& model, const std::string& path) { write_text_file(path, model_to_json(model)); }

mfgp::MfModel load_model(const std::string& path) { return model_from_json(read_text_file(path)); }

}  // namespace mfkrig::app
