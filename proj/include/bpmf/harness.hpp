#pragma once

// Experiment orchestration: train one engine on a split dataset, score it by
// RMSE on the original rating scale, and serialize the result.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bpmf/data_io.hpp"
#include "bpmf/mcmc.hpp"
#include "bpmf/mf.hpp"
#include "bpmf/model.hpp"
#include "bpmf/vi.hpp"

namespace bpmf {

enum class Engine { mf, mcmc, vi };

std::string_view to_string(Engine engine) noexcept;
// Throws UsageError for anything but "mf", "mcmc" or "vi".
Engine parse_engine(std::string_view name);

struct ExperimentConfig {
  Engine engine = Engine::vi;
  std::filesystem::path data_path;
  std::filesystem::path output_dir;
  std::size_t k = 10;
  double sigma2 = 0.25;
  SplitFractions split;
  std::uint64_t split_seed = 42;
  MfConfig mf;
  McmcConfig mcmc;
  ViConfig vi;
  // Draws per prediction for the VI posterior-predictive mean.
  std::size_t predict_samples = 100;

  // Harness defaults for `engine`. MCMC keeps ~200 thinned states by default.
  static ExperimentConfig defaults(Engine engine);

  // Copies k into the selected engine config and validates everything.
  // Throws UsageError.
  void finalize();

  nlohmann::json to_json() const;
};

struct ExperimentReport {
  nlohmann::json config;
  double rmse_validation = 0.0;
  double rmse_test = 0.0;
  std::vector<double> loss_trace;
  double wall_clock_seconds = 0.0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::size_t cold_start_count = 0;

  std::string engine() const { return config.at("engine").get<std::string>(); }

  friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

nlohmann::json to_json(const ExperimentReport& report);
// Throws FormatError when a field is missing or has the wrong type.
ExperimentReport report_from_json(const nlohmann::json& j);
ExperimentReport read_report(const std::filesystem::path& path);

// sqrt(mean((p - t)^2)). Throws UsageError on empty or unequal lengths.
double rmse(std::span<const double> predictions, std::span<const double> truths);

// Which users and items have at least one training rating.
struct TrainingSupport {
  std::vector<bool> user_seen;
  std::vector<bool> item_seen;

  static TrainingSupport from(const RatingDataset& train);
  bool covers(std::size_t user, std::size_t item) const {
    return user_seen[user] && item_seen[item];
  }
};

// Original-scale prediction for a (user, item) pair.
using Predictor = std::function<double(std::size_t user, std::size_t item)>;

struct Predictions {
  std::vector<double> values;
  std::size_t cold_start_count = 0;
};

// Predicts every triple of `eval`; pairs whose user or item has no training
// rating get `fallback` instead and are counted. Throws StructuralError if the
// eval shape differs from the training support.
Predictions predict_all(const Predictor& predictor, const TrainingSupport& support,
                        const RatingDataset& eval, double fallback);

// Observed ratings of `data` mapped back to the original scale.
std::vector<double> original_ratings(const RatingDataset& data);

// Mean training rating on the original scale. Throws UsageError if empty.
double global_mean_rating(const RatingDataset& train);

// Trains and scores the configured engine on an existing split. No I/O.
// For MCMC, per-step accept flags are copied to `accepted` when non-null.
ExperimentReport evaluate_engine(const ExperimentConfig& cfg, const SplitDataset& split,
                                 std::vector<std::uint8_t>* accepted = nullptr);

// Load, split, evaluate, then write report.json, trace.csv and the engine's
// sidecar (chain.csv or elbo.csv) into cfg.output_dir.
ExperimentReport run_experiment(ExperimentConfig cfg);

void write_trace_csv(std::ostream& out, std::span<const double> trace);
void write_report(const ExperimentReport& report, const std::filesystem::path& path);

enum class TraceDirection { minimize, maximize };

// Read off the net trend: a trace that ends at or above where it started is
// treated as maximized. An MCMC log-joint trace can fall while the chain
// drifts toward the posterior bulk, so the engine alone does not decide it.
TraceDirection trace_direction(std::span<const double> trace);

// First epoch t (0-based) such that the best-so-far value improves by less
// than 0.1% of |best_t| over the rest of the run. Returns 0 for empty traces.
std::size_t plateau_epoch(std::span<const double> trace, TraceDirection direction);

struct ComparisonRow {
  std::string engine;
  double rmse_test = 0.0;
  std::size_t plateau_epoch = 0;
  std::size_t trace_length = 0;
  double plateau_fraction = 0.0;
  double wall_clock_seconds = 0.0;

  friend bool operator==(const ComparisonRow&, const ComparisonRow&) = default;
};

// Throws UsageError for fewer than two reports.
std::vector<ComparisonRow> compare(std::span<const ExperimentReport> reports);
std::string comparison_csv(std::span<const ComparisonRow> rows);
std::string comparison_text(std::span<const ComparisonRow> rows);

}  // namespace bpmf
