#include "mfkrig/app/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <json.hpp>
#include <thread>

#include "mfkrig/app/csv.hpp"
#include "mfkrig/design.hpp"
#include "mfkrig/error.hpp"
#include "mfkrig/gp.hpp"
#include "mfkrig/mfgp.hpp"
#include "mfkrig/random.hpp"

namespace mfkrig::app {

using nlohmann::json;

void BenchmarkConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (benchmark != "analytic1d" && benchmark != "park4d") bad("unknown benchmark '" + benchmark + "'");
  if (n_lf < 1 || n_hf < 1 || n_test < 1) bad("n_lf, n_hf and n_test must be positive");
  if (n_replications < 1) bad("n_replications must be >= 1");
  if (!(noise_sd_lf >= 0.0) || !(noise_sd_hf >= 0.0)) bad("noise standard deviations must be >= 0");
  if (models.empty()) bad("models must not be empty");
  for (const auto& m : models) {
    if (m != "mf" && m != "hf_only" && m != "lf_only") bad("unknown model '" + m + "'");
  }
  if (n_starts < 1) bad("n_starts must be >= 1");
  if (maximin_restarts < 1) bad("maximin_restarts must be >= 1");
  if (threads < 0) bad("threads must be >= 0");
  if (!(theta_lower_factor > 0.0 && theta_lower_factor <= 1e3)) bad("theta_lower_factor must lie in (0, 1e3]");
}

BenchmarkConfig benchmark_config_from_json(const std::string& text) {
  BenchmarkConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "benchmark config must be a JSON object");
    static const std::vector<std::string> known{"benchmark", "n_lf",           "n_hf",        "noise_sd_lf",
                                                "noise_sd_hf", "n_test",        "n_replications", "seed",
                                                "models",      "output_path",   "curves_path", "n_starts",
                                                "maximin_restarts", "threads", "theta_lower_factor"};
    for (const auto& [key, _] : j.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
      }
    }
    auto get = [&j](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("benchmark", c.benchmark);
    get("n_lf", c.n_lf);
    get("n_hf", c.n_hf);
    get("noise_sd_lf", c.noise_sd_lf);
    get("noise_sd_hf", c.noise_sd_hf);
    get("n_test", c.n_test);
    get("n_replications", c.n_replications);
    get("seed", c.seed);
    get("models", c.models);
    get("output_path", c.output_path);
    get("curves_path", c.curves_path);
    get("n_starts", c.n_starts);
    get("maximin_restarts", c.maximin_restarts);
    get("threads", c.threads);
    get("theta_lower_factor", c.theta_lower_factor);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad benchmark config: ") + e.what());
  }
  c.validate();
  return c;
}

int resolve_threads(int configured) {
  if (configured > 0) return configured;
  if (const char* env = std::getenv("MFKRIG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    throw Error(ErrorCode::InvalidConfig, std::string("MFKRIG_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Seed streams within one replication.
enum Stream : std::uint64_t { kLfDesign = 1, kHfDesign, kLfNoise, kHfNoise, kTestHfNoise, kTestLfNoise,
                              kLfSearch = 10, kHfSearch, kHfOnlySearch };

struct TestSet {
  Eigen::MatrixXd x;
  Eigen::VectorXd y_lf;
  Eigen::VectorXd y_hf;
};

Eigen::MatrixXd training_design(const BenchmarkConfig& c, const design::TestFunctionPair& f, int n,
                                std::uint64_t seed) {
  const design::Design d = c.benchmark == "park4d" && n >= 2 ? design::maximin_lhs(n, f.input_dim, c.maximin_restarts, seed)
                                                             : design::lhs(n, f.input_dim, seed);
  return design::scale_to_box(d.points, f.lower, f.upper);
}

TestSet make_test_set(const BenchmarkConfig& c, const design::TestFunctionPair& f) {
  TestSet t;
  if (c.benchmark == "analytic1d") {
    t.x = Eigen::VectorXd::LinSpaced(c.n_test, f.lower, f.upper);
  } else {
    const std::uint64_t seed = derive_seed(c.seed, ~std::uint64_t{0});
    const design::Design d = c.n_test >= 2 ? design::maximin_lhs(c.n_test, f.input_dim, 5, seed)
                                           : design::lhs(c.n_test, f.input_dim, seed);
    t.x = design::scale_to_box(d.points, f.lower, f.upper);
  }
  t.y_lf = design::eval_testfn(f, Fidelity::LF, t.x);
  t.y_hf = design::eval_testfn(f, Fidelity::HF, t.x);
  return t;
}

gp::HyperBounds bounds_for(const BenchmarkConfig& c, const Eigen::MatrixXd& x) {
  gp::HyperBounds b = gp::HyperBounds::defaults_for(x);
  b.theta_lower *= c.theta_lower_factor / 1e-3;
  return b;
}

optimize::MultiStartConfig search(const BenchmarkConfig& c, std::uint64_t seed) {
  optimize::MultiStartConfig s;
  s.n_starts = c.n_starts;
  s.rng_seed = seed;
  return s;
}

void fill_metrics(ResultsRow& row, const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                  const PredictiveDistribution& pred, double noise_hat) {
  const Eigen::VectorXd grid = metrics::default_alpha_grid();
  metrics::CalibrationReport rep = metrics::coverage_report(y, z, pred.mean, pred.sd(), noise_hat, grid);
  row.q2 = rep.q2;
  row.iae_ci = rep.iae_ci;
  row.iae_pi = rep.iae_pi;
  row.ciw_95 = rep.ciw[94];
  row.piw_95 = rep.piw[94];
  row.report = std::move(rep);
}

std::vector<ResultsRow> run_replication(const BenchmarkConfig& c, const design::TestFunctionPair& f,
                                        const TestSet& test, int r) {
  const std::uint64_t seed_r = derive_seed(c.seed, static_cast<std::uint64_t>(r));
  auto sub = [seed_r](Stream s) { return derive_seed(seed_r, s); };

  mfgp::MfData data;
  data.lf.x = training_design(c, f, c.n_lf, sub(kLfDesign));
  data.hf.x = training_design(c, f, c.n_hf, sub(kHfDesign));
  data.lf.z = design::add_noise(design::eval_testfn(f, Fidelity::LF, data.lf.x), c.noise_sd_lf * c.noise_sd_lf,
                                sub(kLfNoise));
  data.hf.z = design::add_noise(design::eval_testfn(f, Fidelity::HF, data.hf.x), c.noise_sd_hf * c.noise_sd_hf,
                                sub(kHfNoise));
  const Eigen::VectorXd z_test_hf = design::add_noise(test.y_hf, c.noise_sd_hf * c.noise_sd_hf, sub(kTestHfNoise));
  const Eigen::VectorXd z_test_lf = design::add_noise(test.y_lf, c.noise_sd_lf * c.noise_sd_lf, sub(kTestLfNoise));

  std::vector<ResultsRow> rows;
  for (const auto& name : c.models) {
    ResultsRow row;
    row.replication_index = r;
    row.model_name = name;
    row.noise_var_hat_lf = kNaN;
    row.noise_var_hat_hf = kNaN;
    const auto start = std::chrono::steady_clock::now();
    try {
      if (name == "mf") {
        mfgp::MfFitConfig fc;
        fc.lf_search = search(c, sub(kLfSearch));
        fc.hf_search = search(c, sub(kHfSearch));
        fc.lf_bounds = bounds_for(c, data.lf.x);
        fc.hf_bounds = bounds_for(c, data.hf.x);
        const mfgp::MfModel m = mfgp::fit_mf(data, fc);
        row.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        row.noise_var_hat_lf = m.lf_model.noise_variance();
        row.noise_var_hat_hf = m.hf_params.noise_variance();
        row.em_log = m.em_log;
        fill_metrics(row, test.y_hf, z_test_hf, mfgp::predict_mf(m, test.x), row.noise_var_hat_hf);
      } else {
        const bool hf = name == "hf_only";
        const Dataset& d = hf ? data.hf : data.lf;
        const gp::TrainedGp m = gp::fit_gp(d, gp::BasisSpec::constant(), bounds_for(c, d.x),
                                           search(c, sub(hf ? kHfOnlySearch : kLfSearch)));
        row.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        (hf ? row.noise_var_hat_hf : row.noise_var_hat_lf) = m.noise_variance();
        fill_metrics(row, hf ? test.y_hf : test.y_lf, hf ? z_test_hf : z_test_lf, gp::predict_gp(m, test.x),
                     m.noise_variance());
      }
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
      row.q2 = row.iae_ci = row.iae_pi = row.ciw_95 = row.piw_95 = kNaN;
      row.report.reset();
      row.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  config.validate();
  const design::TestFunctionPair f = design::test_function(config.benchmark);
  const TestSet test = make_test_set(config, f);

  const int reps = config.n_replications;
  std::vector<std::vector<ResultsRow>> per_rep(static_cast<std::size_t>(reps));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < reps; r = next++) per_rep[static_cast<std::size_t>(r)] = run_replication(config, f, test, r);
  };
  const int n_threads = std::min(resolve_threads(config.threads), reps);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  BenchmarkResult out;
  out.config = config;
  for (auto& rows : per_rep) {
    for (auto& row : rows) out.rows.push_back(std::move(row));
  }
  return out;
}

std::string format_results_csv(const BenchmarkResult& result) {
  std::string out =
      "replication_index,model_name,q2,iae_ci,iae_pi,ciw_95,piw_95,noise_var_hat_lf,noise_var_hat_hf,fit_seconds,"
      "failed,error\n";
  for (const auto& r : result.rows) {
    out += std::to_string(r.replication_index) + ',' + r.model_name + ',' + num(r.q2) + ',' + num(r.iae_ci) + ',' +
           num(r.iae_pi) + ',' + num(r.ciw_95) + ',' + num(r.piw_95) + ',' + num(r.noise_var_hat_lf) + ',' +
           num(r.noise_var_hat_hf) + ',' + num(r.fit_seconds) + ',' + (r.failed ? "1" : "0") + ',' +
           csv_field(r.error) + '\n';
  }
  return out;
}

std::string format_curves_csv(const BenchmarkResult& result) {
  std::string out = "replication_index,model_name,alpha,cicp,picp\n";
  for (const auto& r : result.rows) {
    if (!r.report) continue;
    const auto& rep = *r.report;
    for (Eigen::Index k = 0; k < rep.alpha_grid.size(); ++k) {
      out += std::to_string(r.replication_index) + ',' + r.model_name + ',' + num(rep.alpha_grid[k]) + ',' +
             num(rep.cicp[k]) + ',' + num(rep.picp[k]) + '\n';
    }
  }
  return out;
}

BenchmarkResult run_benchmark_to_files(const BenchmarkConfig& config) {
  BenchmarkResult r = run_benchmark(config);
  if (!config.output_path.empty()) write_text_file(config.output_path, format_results_csv(r));
  if (!config.curves_path.empty()) write_text_file(config.curves_path, format_curves_csv(r));
  return r;
}

}  // namespace mfkrig::app
