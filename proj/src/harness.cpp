#include "bpmf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>

#include "bpmf/errors.hpp"

namespace bpmf {

using nlohmann::json;

std::string_view to_string(Engine engine) noexcept {
  switch (engine) {
    case Engine::mf:
      return "mf";
    case Engine::mcmc:
      return "mcmc";
    case Engine::vi:
      return "vi";
  }
  return "vi";
}

Engine parse_engine(std::string_view name) {
  if (name == "mf") return Engine::mf;
  if (name == "mcmc") return Engine::mcmc;
  if (name == "vi") return Engine::vi;
  throw UsageError("unknown engine '" + std::string(name) + "' (expected mf, mcmc or vi)");
}

ExperimentConfig ExperimentConfig::defaults(Engine engine) {
  ExperimentConfig cfg;
  cfg.engine = engine;
  cfg.mcmc = McmcConfig::with_steps(20000);
  cfg.mcmc.thin = 40;
  return cfg;
}

void ExperimentConfig::finalize() {
  ModelHyperparams{k, sigma2}.validate();
  mf.k = k;
  vi.k = k;
  switch (engine) {
    case Engine::mf:
      mf.validate();
      break;
    case Engine::mcmc:
      mcmc.validate();
      break;
    case Engine::vi:
      vi.validate();
      break;
  }
}

json ExperimentConfig::to_json() const {
  json engine_cfg;
  switch (engine) {
    case Engine::mf:
      engine_cfg = {{"k", mf.k},
                    {"alpha", mf.alpha},
                    {"epochs", mf.epochs},
                    {"init_scale", mf.init_scale},
                    {"seed", mf.seed}};
      break;
    case Engine::mcmc:
      engine_cfg = {{"n_steps", mcmc.n_steps},
                    {"burn_in", mcmc.burn_in},
                    {"thin", mcmc.thin},
                    {"proposal_std", mcmc.proposal_std},
                    {"seed", mcmc.seed},
                    {"init_scale", mcmc.init_scale}};
      break;
    case Engine::vi:
      engine_cfg = {{"k", vi.k},
                    {"learning_rate", vi.learning_rate},
                    {"epochs", vi.epochs},
                    {"mc_samples", vi.mc_samples},
                    {"seed", vi.seed},
                    {"init_mu_scale", vi.init_mu_scale},
                    {"init_log_s", vi.init_log_s},
                    {"predict_samples", predict_samples}};
      break;
  }
  return {{"engine", std::string(to_string(engine))},
          {"data_path", data_path.string()},
          {"output_dir", output_dir.string()},
          {"k", k},
          {"sigma2", sigma2},
          {"split", {{"train", split.train}, {"validation", split.validation}, {"test", split.test}}},
          {"split_seed", split_seed},
          {"engine_config", engine_cfg}};
}

json to_json(const ExperimentReport& report) {
  return {{"config", report.config},
          {"rmse_validation", report.rmse_validation},
          {"rmse_test", report.rmse_test},
          {"loss_trace", report.loss_trace},
          {"wall_clock_seconds", report.wall_clock_seconds},
          {"n_train", report.n_train},
          {"n_val", report.n_val},
          {"n_test", report.n_test},
          {"cold_start_count", report.cold_start_count}};
}

ExperimentReport report_from_json(const json& j) {
  try {
    ExperimentReport r;
    r.config = j.at("config");
    r.rmse_validation = j.at("rmse_validation").get<double>();
    r.rmse_test = j.at("rmse_test").get<double>();
    r.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    r.n_train = j.at("n_train").get<std::size_t>();
    r.n_val = j.at("n_val").get<std::size_t>();
    r.n_test = j.at("n_test").get<std::size_t>();
    r.cold_start_count = j.at("cold_start_count").get<std::size_t>();
    if (!r.config.contains("engine")) throw FormatError("report config lacks 'engine'");
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

ExperimentReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report " + path.string());
  try {
    return report_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

double rmse(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.empty() || predictions.size() != truths.size()) {
    throw UsageError("rmse needs two non-empty lists of equal length");
  }
  double sq = 0.0;
  for (std::size_t n = 0; n < predictions.size(); ++n) {
    const double d = predictions[n] - truths[n];
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(predictions.size()));
}

TrainingSupport TrainingSupport::from(const RatingDataset& train) {
  TrainingSupport s{std::vector<bool>(train.n_users(), false),
                    std::vector<bool>(train.n_items(), false)};
  for (const Rating& t : train.triples()) {
    s.user_seen[t.user] = true;
    s.item_seen[t.item] = true;
  }
  return s;
}

Predictions predict_all(const Predictor& predictor, const TrainingSupport& support,
                        const RatingDataset& eval, double fallback) {
  if (eval.n_users() != support.user_seen.size() || eval.n_items() != support.item_seen.size()) {
    throw StructuralError("evaluation set shape differs from the training set");
  }
  Predictions out;
  out.values.reserve(eval.size());
  for (const Rating& t : eval.triples()) {
    if (support.covers(t.user, t.item)) {
      out.values.push_back(predictor(t.user, t.item));
    } else {
      out.values.push_back(fallback);
      ++out.cold_start_count;
    }
  }
  return out;
}

std::vector<double> original_ratings(const RatingDataset& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const Rating& t : data.triples()) out.push_back(denormalize_rating(t.value, data.scale()));
  return out;
}

double global_mean_rating(const RatingDataset& train) {
  if (train.empty()) throw UsageError("global mean of an empty training set");
  double sum = 0.0;
  for (const Rating& t : train.triples()) sum += t.value;
  return denormalize_rating(sum / static_cast<double>(train.size()), train.scale());
}

ExperimentReport evaluate_engine(const ExperimentConfig& cfg_in, const SplitDataset& split,
                                 std::vector<std::uint8_t>* accepted) {
  ExperimentConfig cfg = cfg_in;
  cfg.finalize();
  const ModelHyperparams hp{cfg.k, cfg.sigma2};
  const RatingScale scale = split.train.scale();

  ExperimentReport report;
  report.config = cfg.to_json();
  report.n_train = split.train.size();
  report.n_val = split.validation.size();
  report.n_test = split.test.size();

  // Each branch keeps its fitted model alive in the predictor closure.
  Predictor predictor;
  const auto start = std::chrono::steady_clock::now();
  switch (cfg.engine) {
    case Engine::mf: {
      auto fit = std::make_shared<MfResult>(mf_train(split.train, cfg.mf));
      report.loss_trace = fit->loss_trace;
      predictor = [fit, scale](std::size_t i, std::size_t j) {
        return mf_predict(fit->state.u.row(i), fit->state.v.row(j), scale);
      };
      break;
    }
    case Engine::mcmc: {
      auto chain = std::make_shared<ChainTrace>(run_chain(split.train, hp, cfg.mcmc));
      report.loss_trace = chain->energies;
      if (accepted != nullptr) *accepted = chain->accepted;
      predictor = [chain, scale](std::size_t i, std::size_t j) {
        return mcmc_predict(*chain, i, j, scale);
      };
      break;
    }
    case Engine::vi: {
      auto fit = std::make_shared<ViResult>(vi_train(split.train, hp, cfg.vi));
      report.loss_trace = fit->elbo_trace;
      auto rng = std::make_shared<Rng>(cfg.vi.seed ^ 0x5DEECE66DULL);
      const std::size_t samples = cfg.predict_samples;
      predictor = [fit, rng, scale, samples](std::size_t i, std::size_t j) {
        return vi_predict(fit->params, i, j, scale, samples, *rng);
      };
      break;
    }
  }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const TrainingSupport support = TrainingSupport::from(split.train);
  const double fallback = global_mean_rating(split.train);
  const Predictions val = predict_all(predictor, support, split.validation, fallback);
  const Predictions test = predict_all(predictor, support, split.test, fallback);
  report.rmse_validation = rmse(val.values, original_ratings(split.validation));
  report.rmse_test = rmse(test.values, original_ratings(split.test));
  report.cold_start_count = val.cold_start_count + test.cold_start_count;
  return report;
}

void write_trace_csv(std::ostream& out, std::span<const double> trace) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "epoch,value\n";
  for (std::size_t e = 0; e < trace.size(); ++e) out << e << ',' << trace[e] << '\n';
  out.precision(old_precision);
}

void write_report(const ExperimentReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(report).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

ExperimentReport run_experiment(ExperimentConfig cfg) {
  cfg.finalize();
  const LoadedRatings loaded = load_ratings_file(cfg.data_path);
  BuiltDataset built = build_dataset(loaded.ratings, loaded.scale);
  const SplitDataset split =
      split_dataset(built.data, cfg.split, cfg.split_seed, std::move(built.maps));

  // Fail on an unwritable directory before spending time on training.
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.output_dir.string());

  ChainTrace chain_flags;
  const ExperimentReport report = evaluate_engine(cfg, split, &chain_flags.accepted);

  write_report(report, cfg.output_dir / "report.json");
  const auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
  };
  {
    auto out = open(cfg.output_dir / "trace.csv");
    write_trace_csv(out, report.loss_trace);
  }
  if (cfg.engine == Engine::vi) {
    auto out = open(cfg.output_dir / "elbo.csv");
    write_elbo_csv(out, report.loss_trace);
  } else if (cfg.engine == Engine::mcmc) {
    chain_flags.energies = report.loss_trace;
    auto out = open(cfg.output_dir / "chain.csv");
    write_chain_csv(out, chain_flags);
  }
  return report;
}

TraceDirection trace_direction(std::span<const double> trace) {
  if (trace.empty() || trace.back() >= trace.front()) return TraceDirection::maximize;
  return TraceDirection::minimize;
}

std::size_t plateau_epoch(std::span<const double> trace, TraceDirection direction) {
  if (trace.empty()) return 0;
  // Work on the maximization form: a minimized trace is negated.
  const double sign = direction == TraceDirection::maximize ? 1.0 : -1.0;
  std::vector<double> best(trace.size());
  double running = sign * trace[0];
  for (std::size_t t = 0; t < trace.size(); ++t) {
    running = std::max(running, sign * trace[t]);
    best[t] = running;
  }
  const double final_best = best.back();
  for (std::size_t t = 0; t < best.size(); ++t) {
    const double improvement = final_best - best[t];
    if (improvement <= 0.0 || improvement < 1e-3 * std::abs(best[t])) return t;
  }
  return best.size() - 1;
}

std::vector<ComparisonRow> compare(std::span<const ExperimentReport> reports) {
  if (reports.size() < 2) throw UsageError("compare needs at least two reports");
  std::vector<ComparisonRow> rows;
  rows.reserve(reports.size());
  for (const ExperimentReport& r : reports) {
    ComparisonRow row;
    row.engine = r.engine();
    row.rmse_test = r.rmse_test;
    row.trace_length = r.loss_trace.size();
    row.plateau_epoch = plateau_epoch(r.loss_trace, trace_direction(r.loss_trace));
    row.plateau_fraction = row.trace_length == 0 ? 0.0
                                                 : static_cast<double>(row.plateau_epoch) /
                                                       static_cast<double>(row.trace_length);
    row.wall_clock_seconds = r.wall_clock_seconds;
    rows.push_back(row);
  }
  return rows;
}

std::string comparison_csv(std::span<const ComparisonRow> rows) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << "engine,rmse_test,plateau_epoch,trace_length,plateau_fraction,wall_clock_seconds\n";
  for (const ComparisonRow& r : rows) {
    os << r.engine << ',' << r.rmse_test << ',' << r.plateau_epoch << ',' << r.trace_length << ','
       << r.plateau_fraction << ',' << r.wall_clock_seconds << '\n';
  }
  return os.str();
}

std::string comparison_text(std::span<const ComparisonRow> rows) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "engine" << std::right << std::setw(12) << "rmse_test"
     << std::setw(16) << "plateau_epoch" << std::setw(10) << "epochs" << std::setw(12)
     << "plateau_%" << std::setw(14) << "wall_clock_s" << '\n';
  for (const ComparisonRow& r : rows) {
    os << std::left << std::setw(8) << r.engine << std::right << std::fixed << std::setprecision(4)
       << std::setw(12) << r.rmse_test << std::setw(16) << r.plateau_epoch << std::setw(10)
       << r.trace_length << std::setprecision(1) << std::setw(12) << 100.0 * r.plateau_fraction
       << std::setprecision(3) << std::setw(14) << r.wall_clock_seconds << '\n';
  }
  return os.str();
}

}  // namespace bpmf
