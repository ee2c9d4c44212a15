#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "mfkrig/app/benchmark.hpp"
#include "mfkrig/app/commands.hpp"
#include "mfkrig/app/csv.hpp"
#include "mfkrig/app/model_io.hpp"
#include "mfkrig/error.hpp"

using namespace mfkrig;
using namespace mfkrig::app;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("mfkrig_test_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no mfkrig::Error thrown";
  return ErrorCode::ParseError;
}

// Smooth 2-D pair; hf rows are the first n_h lf rows when nested.
void write_pair(const TempDir& dir, int n_l, int n_h, bool nested, double hf_noise_sd) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n01;
  CsvTable lf{{"x1", "x2", "y"}, Eigen::MatrixXd(n_l, 3)};
  for (int i = 0; i < n_l; ++i) {
    const double a = u(rng), b = u(rng);
    lf.values.row(i) << a, b, std::sin(3 * a) + b * b;
  }
  CsvTable hf{{"x1", "x2", "y"}, Eigen::MatrixXd(n_h, 3)};
  for (int i = 0; i < n_h; ++i) {
    const double a = nested ? lf.values(i, 0) : u(rng), b = nested ? lf.values(i, 1) : u(rng);
    hf.values.row(i) << a, b, 1.5 * (std::sin(3 * a) + b * b) + 0.5 * std::sin(5 * a + 3 * b) + hf_noise_sd * n01(rng);
  }
  write_csv(dir.file("lf.csv"), lf);
  write_csv(dir.file("hf.csv"), hf);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MFKRIG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Csv, ParsesHeaderAndValues) {
  const CsvTable t = parse_csv("a,b\n1,2.5\n-3e-2,4\n");
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.values.rows(), 2);
  EXPECT_DOUBLE_EQ(t.values(1, 0), -0.03);
  const CsvTable back = parse_csv(format_csv(t));
  EXPECT_EQ(back.values, t.values);
}

TEST(Csv, ErrorsNameRowAndColumn) {
  try {
    parse_csv("a,b\n1,2\n3,x\n", "in.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("in.csv"), std::string::npos);
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column 2"), std::string::npos) << msg;
  }
  EXPECT_EQ(code_of([] { parse_csv("a,b\n1,2,3\n"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_csv(""); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_csv("a,b\n1,2\n", "x"); dataset_from_csv(parse_csv("a,b\n1,2\n"), 3, "x"); }),
            ErrorCode::ParseError);
}

TEST(FitCmd, RoundTripIsBitExact) {
  TempDir dir;
  write_pair(dir, 30, 12, false, 0.05);
  const mfgp::MfModel model = fit_cmd(dir.file("lf.csv"), dir.file("hf.csv"), "", dir.file("model.json"));
  const mfgp::MfModel loaded = load_model(dir.file("model.json"));
  EXPECT_EQ(model_to_json(loaded), model_to_json(model));

  const CsvTable hf = read_csv(dir.file("hf.csv"));
  CsvTable xs{{"x1", "x2"}, hf.values.leftCols(2)};
  write_csv(dir.file("x.csv"), xs);
  for (const NoiseMode mode : {NoiseMode::latent, NoiseMode::noisy}) {
    predict_cmd(dir.file("model.json"), dir.file("x.csv"), Fidelity::HF, mode, dir.file("p.csv"));
    const CsvTable out = read_csv(dir.file("p.csv"));
    const PredictiveDistribution p = mfgp::predict_mf(model, xs.values, Fidelity::HF, mode);
    ASSERT_EQ(out.header, (std::vector<std::string>{"x1", "x2", "mean", "sd"}));
    for (Eigen::Index i = 0; i < p.mean.size(); ++i) {
      EXPECT_EQ(out.values(i, 2), p.mean[i]);
      EXPECT_EQ(out.values(i, 3), std::sqrt(p.variance[i]));
    }
  }
}

TEST(FitCmd, InputValidation) {
  TempDir dir;
  write_pair(dir, 20, 8, false, 0.05);
  write_text_file(dir.file("hf3.csv"), "x1,x2,x3,y\n0.1,0.2,0.3,1\n0.4,0.5,0.6,2\n0.7,0.8,0.9,3\n");
  try {
    fit_cmd(dir.file("lf.csv"), dir.file("hf3.csv"), "", dir.file("m.json"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find('4'), std::string::npos) << e.what();
  }
  write_text_file(dir.file("empty.csv"), "x1,x2,y\n");
  EXPECT_EQ(code_of([&] { fit_cmd(dir.file("lf.csv"), dir.file("empty.csv"), "", dir.file("m.json")); }),
            ErrorCode::InvalidConfig);
  write_text_file(dir.file("bad.json"), "{\"n_starts\": 0}");
  EXPECT_EQ(code_of([&] { fit_cmd(dir.file("lf.csv"), dir.file("hf.csv"), dir.file("bad.json"), dir.file("m.json")); }),
            ErrorCode::InvalidConfig);
  EXPECT_FALSE(fs::exists(dir.file("m.json")));
}

TEST(PredictCmd, LowFidelityMatchesStandaloneFit) {
  TempDir dir;
  write_pair(dir, 25, 10, false, 0.05);
  write_text_file(dir.file("cfg.json"), "{\"seed\": 11, \"n_starts\": 4}");
  fit_cmd(dir.file("lf.csv"), dir.file("hf.csv"), dir.file("cfg.json"), dir.file("model.json"));
  const Dataset lf = dataset_from_csv(read_csv(dir.file("lf.csv")));
  optimize::MultiStartConfig s;
  s.n_starts = 4;
  s.rng_seed = 11;
  const gp::TrainedGp standalone =
      gp::fit_gp(lf, gp::BasisSpec::constant(), gp::HyperBounds::defaults_for(lf.x), s);

  Eigen::MatrixXd xs(4, 2);
  xs << 0.1, 0.1, 0.5, 0.9, 0.9, 0.3, 0.33, 0.66;
  write_csv(dir.file("x.csv"), CsvTable{{"x1", "x2"}, xs});
  predict_cmd(dir.file("model.json"), dir.file("x.csv"), Fidelity::LF, NoiseMode::latent, dir.file("p.csv"));
  const CsvTable out = read_csv(dir.file("p.csv"));
  const PredictiveDistribution p = gp::predict_gp(standalone, xs);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(out.values(i, 2), p.mean[i]);
    EXPECT_DOUBLE_EQ(out.values(i, 3), std::sqrt(p.variance[i]));
  }
}

TEST(PredictCmd, NoisySdDominatesLatent) {
  TempDir dir;
  write_pair(dir, 25, 10, false, 0.1);
  fit_cmd(dir.file("lf.csv"), dir.file("hf.csv"), "", dir.file("model.json"));
  Eigen::MatrixXd xs = Eigen::MatrixXd::Random(20, 2).array() * 0.5 + 0.5;
  write_csv(dir.file("x.csv"), CsvTable{{"x1", "x2"}, xs});
  for (const Fidelity level : {Fidelity::LF, Fidelity::HF}) {
    predict_cmd(dir.file("model.json"), dir.file("x.csv"), level, NoiseMode::latent, dir.file("a.csv"));
    predict_cmd(dir.file("model.json"), dir.file("x.csv"), level, NoiseMode::noisy, dir.file("b.csv"));
    const CsvTable a = read_csv(dir.file("a.csv")), b = read_csv(dir.file("b.csv"));
    EXPECT_TRUE((b.values.col(3).array() >= a.values.col(3).array()).all());
  }
  write_csv(dir.file("x3.csv"), CsvTable{{"a", "b", "c"}, Eigen::MatrixXd::Zero(2, 3)});
  EXPECT_EQ(code_of([&] {
              predict_cmd(dir.file("model.json"), dir.file("x3.csv"), Fidelity::HF, NoiseMode::latent, dir.file("c.csv"));
            }),
            ErrorCode::DimensionMismatch);
}

TEST(PredictCmd, NestedNoiseFreeInterpolates) {
  TempDir dir;
  write_pair(dir, 30, 10, true, 0.0);
  write_text_file(dir.file("cfg.json"), "{\"lf_noise_free\": true, \"hf_noise_free\": true}");
  fit_cmd(dir.file("lf.csv"), dir.file("hf.csv"), dir.file("cfg.json"), dir.file("model.json"));
  const CsvTable hf = read_csv(dir.file("hf.csv"));
  write_csv(dir.file("x.csv"), CsvTable{{"x1", "x2"}, hf.values.leftCols(2)});
  predict_cmd(dir.file("model.json"), dir.file("x.csv"), Fidelity::HF, NoiseMode::latent, dir.file("p.csv"));
  const CsvTable out = read_csv(dir.file("p.csv"));
  EXPECT_LT((out.values.col(2) - hf.values.col(2)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ModelIo, RejectsMalformedDocuments) {
  EXPECT_EQ(code_of([] { model_from_json("{"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { model_from_json("{\"format_version\": 99}"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { model_from_json("{\"format_version\": 1}"); }), ErrorCode::ParseError);
}

TEST(BenchmarkConfig, JsonKeys) {
  const BenchmarkConfig c =
      benchmark_config_from_json("{\"benchmark\": \"park4d\", \"n_lf\": 10, \"models\": [\"lf_only\"], \"seed\": 5}");
  EXPECT_EQ(c.benchmark, "park4d");
  EXPECT_EQ(c.n_lf, 10);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.models, std::vector<std::string>{"lf_only"});
  EXPECT_EQ(code_of([] { benchmark_config_from_json("{\"n_lfs\": 3}"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { benchmark_config_from_json("{\"models\": [\"pce\"]}"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { benchmark_config_from_json("{\"n_replications\": 0}"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { benchmark_config_from_json("[1]"); }), ErrorCode::InvalidConfig);
}

namespace {

std::string without_seconds(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() > 9) f[9] = "";  // fit_seconds
    for (const auto& c : f) out += c + ',';
    out += '\n';
  }
  return out;
}

}  // namespace

TEST(RunBenchmark, DeterministicAcrossThreadCounts) {
  BenchmarkConfig c;
  c.n_lf = 20;
  c.n_hf = 8;
  c.n_test = 200;
  c.n_replications = 3;
  c.n_starts = 3;
  c.seed = 9;
  c.threads = 1;
  const std::string a = format_results_csv(run_benchmark(c));
  c.threads = 3;
  const BenchmarkResult rb = run_benchmark(c);
  const std::string b = format_results_csv(rb);
  EXPECT_EQ(without_seconds(a), without_seconds(b));
  ASSERT_EQ(rb.rows.size(), 6u);
  EXPECT_EQ(rb.rows[0].model_name, "mf");
  EXPECT_EQ(rb.rows[1].model_name, "hf_only");
  EXPECT_EQ(rb.rows[5].replication_index, 2);
  EXPECT_EQ(a.substr(0, a.find('\n')),
            "replication_index,model_name,q2,iae_ci,iae_pi,ciw_95,piw_95,noise_var_hat_lf,noise_var_hat_hf,"
            "fit_seconds,failed,error");
}

TEST(RunBenchmark, LowFidelityOnlyZeroNoise) {
  BenchmarkConfig c;
  c.n_replications = 1;
  c.models = {"lf_only"};
  c.noise_sd_lf = 0.0;
  c.n_test = 2000;
  const BenchmarkResult r = run_benchmark(c);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_FALSE(r.rows[0].failed);
  EXPECT_GT(r.rows[0].q2, 0.999);
}

TEST(RunBenchmark, FailuresStayInTheirRow) {
  BenchmarkConfig c;
  c.n_lf = 20;
  c.n_hf = 2;  // too few for the HF stage
  c.n_test = 100;
  c.n_replications = 2;
  c.models = {"mf", "lf_only"};
  const BenchmarkResult r = run_benchmark(c);
  ASSERT_EQ(r.rows.size(), 4u);
  for (const auto& row : r.rows) {
    if (row.model_name == "mf") {
      EXPECT_TRUE(row.failed);
      EXPECT_FALSE(row.error.empty());
      EXPECT_TRUE(std::isnan(row.q2));
    } else {
      EXPECT_FALSE(row.failed) << row.error;
      EXPECT_GT(row.q2, 0.99);
    }
  }
}

TEST(RunBenchmark, WritesFiles) {
  TempDir dir;
  BenchmarkConfig c;
  c.n_lf = 15;
  c.n_hf = 6;
  c.n_test = 50;
  c.n_replications = 1;
  c.n_starts = 2;
  c.output_path = dir.file("results.csv");
  c.curves_path = dir.file("curves.csv");
  run_benchmark_to_files(c);
  const std::string curves = read_text_file(c.curves_path);
  EXPECT_EQ(std::count(curves.begin(), curves.end(), '\n'), 1 + 2 * 99);
  EXPECT_EQ(curves.substr(0, curves.find('\n')), "replication_index,model_name,alpha,cicp,picp");
  EXPECT_TRUE(fs::exists(c.output_path));
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  write_pair(dir, 20, 8, false, 0.05);
  EXPECT_EQ(run_cli("fit --lf " + dir.file("lf.csv") + " --hf " + dir.file("hf.csv") + " --out " + dir.file("m.json")), 0);
  Eigen::MatrixXd xs(2, 2);
  xs << 0.2, 0.3, 0.7, 0.1;
  write_csv(dir.file("x.csv"), CsvTable{{"x1", "x2"}, xs});
  EXPECT_EQ(run_cli("predict --model " + dir.file("m.json") + " --inputs " + dir.file("x.csv") +
                    " --level lf --mode noisy --out " + dir.file("p.csv")),
            0);
  EXPECT_EQ(read_csv(dir.file("p.csv")).values.rows(), 2);

  write_text_file(dir.file("broken.csv"), "x1,x2,y\n1,2\n");
  EXPECT_EQ(run_cli("fit --lf " + dir.file("broken.csv") + " --hf " + dir.file("hf.csv") + " --out " + dir.file("n.json")), 2);
  write_text_file(dir.file("bench.json"), "{\"n_reps\": 1}");
  EXPECT_EQ(run_cli("bench --config " + dir.file("bench.json")), 2);
  EXPECT_EQ(run_cli("predict --model " + dir.file("m.json") + " --inputs " + dir.file("x.csv") + " --level mf --out " +
                    dir.file("p.csv")),
            2);
  EXPECT_EQ(run_cli("frobnicate"), 2);

  // Constant LF outputs leave no residual variance at any start.
  write_text_file(dir.file("flat.csv"), "x1,x2,y\n0.5,0.5,1\n0.2,0.7,1\n0.1,0.9,1\n0.8,0.3,1\n");
  EXPECT_EQ(run_cli("fit --lf " + dir.file("flat.csv") + " --hf " + dir.file("hf.csv") + " --out " + dir.file("d.json")),
            3);
}
