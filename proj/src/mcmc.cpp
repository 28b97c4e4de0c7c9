#include "bpmf/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "bpmf/errors.hpp"

namespace bpmf {

namespace {

void propose_into(LatentState& out, const LatentState& current, double proposal_std, Rng& rng) {
  fill_normal(out.u.values(), proposal_std, rng);
  fill_normal(out.v.values(), proposal_std, rng);
  const auto cu = current.u.values();
  const auto cv = current.v.values();
  auto ou = out.u.values();
  auto ov = out.v.values();
  for (std::size_t n = 0; n < ou.size(); ++n) ou[n] += cu[n];
  for (std::size_t n = 0; n < ov.size(); ++n) ov[n] += cv[n];
}

}  // namespace

McmcConfig McmcConfig::with_steps(std::size_t n_steps) {
  McmcConfig cfg;
  cfg.n_steps = n_steps;
  cfg.burn_in = n_steps * 3 / 5;
  cfg.thin = 1;
  return cfg;
}

std::size_t McmcConfig::retained_count() const noexcept {
  if (thin == 0 || burn_in >= n_steps) return 0;
  return (n_steps - burn_in + thin - 1) / thin;
}

void McmcConfig::validate() const {
  if (burn_in >= n_steps) throw UsageError("mcmc: burn_in must be < n_steps");
  if (thin < 1) throw UsageError("mcmc: thin must be >= 1");
  if (!(proposal_std > 0.0)) throw UsageError("mcmc: proposal_std must be > 0");
  if (!(init_scale >= 0.0)) throw UsageError("mcmc: init_scale must be >= 0");
}

double acceptance_ratio(double log_g_current, double log_g_proposed) noexcept {
  const double delta = log_g_proposed - log_g_current;
  return delta >= 0.0 ? 1.0 : std::exp(delta);
}

LatentState propose_state(const LatentState& current, double proposal_std, Rng& rng) {
  LatentState out = LatentState::zeros(current.u.rows(), current.v.rows(), current.k());
  propose_into(out, current, proposal_std, rng);
  return out;
}

MhStep<LatentState> mh_step(const LatentState& state, double log_g_current,
                            const RatingDataset& data, const ModelHyperparams& hp,
                            const McmcConfig& cfg, Rng& rng) {
  return metropolis_step(
      state, log_g_current, [&](const LatentState& z) { return log_joint(z, data, hp); },
      [&](const LatentState& z, Rng& r) { return propose_state(z, cfg.proposal_std, r); }, rng);
}

ChainTrace run_chain(const RatingDataset& data, const ModelHyperparams& hp, const McmcConfig& cfg) {
  cfg.validate();
  hp.validate();
  Rng rng(cfg.seed);
  LatentState current =
      random_latent_state(data.n_users(), data.n_items(), hp.k, cfg.init_scale, rng);
  double log_current = log_joint(current, data, hp);
  if (!std::isfinite(log_current)) {
    throw InitializationError("initial log_joint is not finite");
  }

  ChainTrace trace;
  trace.energies.reserve(cfg.n_steps);
  trace.accepted.reserve(cfg.n_steps);
  trace.samples.reserve(cfg.retained_count());

  // Same draw order as mh_step, but the proposal buffer is reused and swapped
  // in on acceptance instead of being reallocated every step.
  LatentState proposal = current;
  for (std::size_t t = 0; t < cfg.n_steps; ++t) {
    propose_into(proposal, current, cfg.proposal_std, rng);
    const double log_proposal = log_joint(proposal, data, hp);
    const double u = uniform01(rng);
    const bool accept = u < acceptance_ratio(log_current, log_proposal);
    if (accept) {
      std::swap(current, proposal);
      log_current = log_proposal;
      ++trace.accept_count;
    }
    ++trace.step_count;
    trace.energies.push_back(log_current);
    trace.accepted.push_back(accept ? 1 : 0);
    if (t >= cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0) trace.samples.push_back(current);
  }
  return trace;
}

double mcmc_predict(const ChainTrace& trace, std::size_t user, std::size_t item,
                    const RatingScale& scale) {
  if (trace.samples.empty()) throw UsageError("mcmc_predict: chain trace holds no samples");
  const LatentState& first = trace.samples.front();
  if (user >= first.u.rows() || item >= first.v.rows()) {
    throw UsageError("mcmc_predict: index out of range");
  }
  double sum = 0.0;
  for (const LatentState& s : trace.samples) sum += sigmoid(dot(s.u.row(user), s.v.row(item)));
  return denormalize_rating(sum / static_cast<double>(trace.samples.size()), scale);
}

std::vector<std::vector<double>> mh_transition_matrix(
    std::span<const double> target, const std::vector<std::vector<double>>& proposal) {
  const std::size_t n = target.size();
  if (proposal.size() != n) throw UsageError("proposal must be square and match the target");
  for (std::size_t a = 0; a < n; ++a) {
    if (!(target[a] > 0.0)) throw UsageError("target weights must be positive");
    if (proposal[a].size() != n) throw UsageError("proposal must be square");
    double row = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      if (proposal[a][b] < 0.0 || proposal[a][b] != proposal[b][a]) {
        throw UsageError("proposal must be symmetric and non-negative");
      }
      row += proposal[a][b];
    }
    if (std::abs(row - 1.0) > 1e-12) throw UsageError("proposal rows must sum to 1");
  }

  std::vector<std::vector<double>> kernel(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    double moved = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      kernel[a][b] = proposal[a][b] * acceptance_ratio(std::log(target[a]), std::log(target[b]));
      moved += kernel[a][b];
    }
    kernel[a][a] = 1.0 - moved;
  }
  return kernel;
}

void write_chain_csv(std::ostream& out, const ChainTrace& trace) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "step,log_joint,accepted\n";
  for (std::size_t t = 0; t < trace.energies.size(); ++t) {
    out << t << ',' << trace.energies[t] << ',' << static_cast<int>(trace.accepted[t]) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace bpmf
