#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>

#include "mfkrig/app/benchmark.hpp"
#include "mfkrig/app/commands.hpp"
#include "mfkrig/app/csv.hpp"
#include "mfkrig/error.hpp"

namespace {

int exit_code_for(mfkrig::ErrorCode code) {
  using mfkrig::ErrorCode;
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::InvalidConfig:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::DomainViolation:
    case ErrorCode::EmptyGrid:
      return 2;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-fidelity co-kriging: benchmarks, fitting and prediction"};
  app.require_subcommand(1);

  std::string bench_config;
  auto* bench = app.add_subcommand("bench", "Run a replicated benchmark campaign");
  bench->add_option("--config", bench_config, "JSON benchmark configuration")->required();

  std::string lf_csv, hf_csv, fit_config, model_out;
  auto* fit = app.add_subcommand("fit", "Fit a two-level model on CSV data");
  fit->add_option("--lf", lf_csv, "LF training CSV")->required();
  fit->add_option("--hf", hf_csv, "HF training CSV")->required();
  fit->add_option("--config", fit_config, "JSON fit configuration");
  fit->add_option("--out", model_out, "model file to write")->required();

  std::string model_path, inputs, level = "hf", mode = "latent", pred_out;
  auto* predict = app.add_subcommand("predict", "Predict with a saved model");
  predict->add_option("--model", model_path, "model file")->required();
  predict->add_option("--inputs", inputs, "CSV of input points")->required();
  predict->add_option("--level", level, "lf or hf")->check(CLI::IsMember({"lf", "hf"}));
  predict->add_option("--mode", mode, "latent or noisy")->check(CLI::IsMember({"latent", "noisy"}));
  predict->add_option("--out", pred_out, "CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*bench) {
      const auto cfg = mfkrig::app::benchmark_config_from_json(mfkrig::app::read_text_file(bench_config));
      const auto result = mfkrig::app::run_benchmark_to_files(cfg);
      if (cfg.output_path.empty()) std::fputs(mfkrig::app::format_results_csv(result).c_str(), stdout);
      int failed = 0;
      for (const auto& r : result.rows) failed += r.failed ? 1 : 0;
      if (failed > 0) std::fprintf(stderr, "%d of %zu fits failed\n", failed, result.rows.size());
    } else if (*fit) {
      mfkrig::app::fit_cmd(lf_csv, hf_csv, fit_config, model_out);
    } else if (*predict) {
      mfkrig::app::predict_cmd(model_path, inputs, level == "lf" ? mfkrig::Fidelity::LF : mfkrig::Fidelity::HF,
                               mode == "noisy" ? mfkrig::NoiseMode::noisy : mfkrig::NoiseMode::latent, pred_out);
    }
  } catch (const mfkrig::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
