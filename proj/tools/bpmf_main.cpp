// bpmf: train and compare Bayesian matrix factorization engines.
//
//   bpmf run --engine {mf|mcmc|vi} --data ratings.csv --out results/ [options]
//   bpmf compare results/vi/report.json results/mcmc/report.json [--csv table.csv]
//
// Exit codes: 0 success, 1 usage error, 2 runtime or divergence error.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bpmf/errors.hpp"
#include "bpmf/harness.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct RunOptions {
  std::string engine;
  std::string data;
  std::string out;
  std::optional<std::size_t> k;
  std::optional<double> sigma2;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> split_seed;
  std::optional<double> lr;
  std::optional<std::size_t> mc_samples;
  std::optional<std::size_t> predict_samples;
  std::optional<std::size_t> n_steps;
  std::optional<std::size_t> burn_in;
  std::optional<std::size_t> thin;
  std::optional<double> proposal_std;
};

bpmf::ExperimentConfig to_config(const RunOptions& o) {
  using bpmf::Engine;
  auto cfg = bpmf::ExperimentConfig::defaults(bpmf::parse_engine(o.engine));
  cfg.data_path = o.data;
  cfg.output_dir = o.out;
  if (o.k) cfg.k = *o.k;
  if (o.sigma2) cfg.sigma2 = *o.sigma2;
  if (o.split_seed) cfg.split_seed = *o.split_seed;
  if (o.predict_samples) cfg.predict_samples = *o.predict_samples;

  switch (cfg.engine) {
    case Engine::mf:
      if (o.epochs) cfg.mf.epochs = *o.epochs;
      if (o.seed) cfg.mf.seed = *o.seed;
      if (o.lr) cfg.mf.alpha = *o.lr;
      break;
    case Engine::vi:
      if (o.epochs) cfg.vi.epochs = *o.epochs;
      if (o.seed) cfg.vi.seed = *o.seed;
      if (o.lr) cfg.vi.learning_rate = *o.lr;
      if (o.mc_samples) cfg.vi.mc_samples = *o.mc_samples;
      break;
    case Engine::mcmc: {
      if (o.seed) cfg.mcmc.seed = *o.seed;
      if (o.proposal_std) cfg.mcmc.proposal_std = *o.proposal_std;
      if (o.n_steps) {
        cfg.mcmc.n_steps = *o.n_steps;
        cfg.mcmc.burn_in = *o.n_steps * 3 / 5;
      }
      if (o.burn_in) cfg.mcmc.burn_in = *o.burn_in;
      if (o.thin) {
        cfg.mcmc.thin = *o.thin;
      } else if (cfg.mcmc.burn_in < cfg.mcmc.n_steps) {
        cfg.mcmc.thin = std::max<std::size_t>(1, (cfg.mcmc.n_steps - cfg.mcmc.burn_in) / 200);
      }
      break;
    }
  }
  return cfg;
}

int run(const RunOptions& options) {
  const bpmf::ExperimentReport report = bpmf::run_experiment(to_config(options));
  std::cout << "engine " << report.engine() << ": rmse_validation " << report.rmse_validation
            << ", rmse_test " << report.rmse_test << ", training " << report.wall_clock_seconds
            << " s, cold starts " << report.cold_start_count << "\n"
            << "wrote " << (std::filesystem::path(options.out) / "report.json").string() << "\n";
  return 0;
}

int compare(const std::vector<std::string>& paths, const std::string& csv_path) {
  std::vector<bpmf::ExperimentReport> reports;
  for (const auto& p : paths) reports.push_back(bpmf::read_report(p));
  const auto rows = bpmf::compare(reports);
  std::cout << bpmf::comparison_text(rows);
  const std::string csv = bpmf::comparison_csv(rows);
  if (csv_path.empty()) {
    std::cout << '\n' << csv;
  } else {
    std::ofstream out(csv_path);
    if (!out || !(out << csv)) throw bpmf::IoError("cannot write " + csv_path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian probabilistic matrix factorization with MCMC and VI"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto* run_cmd = app.add_subcommand("run", "train one engine and write report.json + trace.csv");
  run_cmd->add_option("--engine", run_opts.engine, "mf, mcmc or vi")
      ->required()
      ->check(CLI::IsMember({"mf", "mcmc", "vi"}));
  run_cmd->add_option("--data", run_opts.data, "ratings CSV (userId,movieId,rating,timestamp)")
      ->required();
  run_cmd->add_option("--out", run_opts.out, "output directory")->required();
  run_cmd->add_option("--k", run_opts.k, "latent dimension (default 10)");
  run_cmd->add_option("--sigma2", run_opts.sigma2, "likelihood variance (default 0.25)");
  run_cmd->add_option("--epochs", run_opts.epochs, "mf/vi epochs (default 300)");
  run_cmd->add_option("--seed", run_opts.seed, "engine RNG seed");
  run_cmd->add_option("--split-seed", run_opts.split_seed, "train/validation/test split seed");
  run_cmd->add_option("--lr", run_opts.lr, "mf/vi learning rate");
  run_cmd->add_option("--mc-samples", run_opts.mc_samples, "vi ELBO samples per epoch");
  run_cmd->add_option("--predict-samples", run_opts.predict_samples,
                      "vi draws per prediction (0 = plug-in means)");
  run_cmd->add_option("--n-steps", run_opts.n_steps, "mcmc chain length (default 20000)");
  run_cmd->add_option("--burn-in", run_opts.burn_in, "mcmc burn-in (default 60% of n-steps)");
  run_cmd->add_option("--thin", run_opts.thin, "mcmc thinning stride");
  run_cmd->add_option("--proposal-std", run_opts.proposal_std, "mcmc random-walk step size");

  std::vector<std::string> report_paths;
  std::string csv_path;
  auto* cmp_cmd = app.add_subcommand("compare", "tabulate two or more report.json files");
  cmp_cmd->add_option("reports", report_paths, "report.json files")->required();
  cmp_cmd->add_option("--csv", csv_path, "write the CSV table here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (run_cmd->parsed()) return run(run_opts);
    return compare(report_paths, csv_path);
  } catch (const bpmf::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
