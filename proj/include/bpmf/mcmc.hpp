#pragma once

// Random-walk Metropolis-Hastings over the full latent state (U, V).

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "bpmf/model.hpp"
#include "bpmf/rng.hpp"

namespace bpmf {

struct McmcConfig {
  std::size_t n_steps = 20000;
  std::size_t burn_in = 12000;
  std::size_t thin = 1;
  double proposal_std = 0.005;
  std::uint64_t seed = 1;
  double init_scale = 0.1;

  // burn_in = 60% of the chain, thin = 1.
  static McmcConfig with_steps(std::size_t n_steps);

  // Number of states run_chain keeps: ceil((n_steps - burn_in) / thin).
  std::size_t retained_count() const noexcept;

  void validate() const;
};

// Retained states are taken after step t (0-based) for every t >= burn_in with
// (t - burn_in) % thin == 0, so the first retained index is burn_in.
struct ChainTrace {
  std::vector<LatentState> samples;
  std::vector<double> energies;         // log_joint of the chain state after each step
  std::vector<std::uint8_t> accepted;   // 1 if the step's proposal was accepted
  std::size_t accept_count = 0;
  std::size_t step_count = 0;

  double acceptance_rate() const noexcept {
    return step_count == 0 ? 0.0 : static_cast<double>(accept_count) / static_cast<double>(step_count);
  }
};

// min(1, g(z') / g(z)) for a symmetric proposal, given log g values.
double acceptance_ratio(double log_g_current, double log_g_proposed) noexcept;

template <class State>
struct MhStep {
  State state;
  bool accepted = false;
  double log_target = 0.0;  // log g of the returned state
};

// Accept/reject decision given the uniform draw u: the proposal wins iff
// u < acceptance_ratio. A rejection returns a copy of `current`.
template <class State>
MhStep<State> mh_transition(const State& current, double log_current, State proposed,
                            double log_proposed, double u) {
  if (u < acceptance_ratio(log_current, log_proposed)) {
    return {std::move(proposed), true, log_proposed};
  }
  return {current, false, log_current};
}

// One Metropolis-Hastings step for any state type with a symmetric proposal.
// `propose(current, rng)` draws the candidate; the uniform is drawn after it.
template <class State, class LogTarget, class Propose>
MhStep<State> metropolis_step(const State& current, double log_current, LogTarget&& log_target,
                              Propose&& propose, Rng& rng) {
  State candidate = propose(current, rng);
  const double log_candidate = log_target(candidate);
  const double u = uniform01(rng);
  return mh_transition(current, log_current, std::move(candidate), log_candidate, u);
}

// z' = z + eps, eps ~ N(0, proposal_std^2) on every entry of U and V.
LatentState propose_state(const LatentState& current, double proposal_std, Rng& rng);

// One step on the BPMF posterior. log_g_current is the cached log_joint of
// `state`; the returned log_target is cached for the next step.
MhStep<LatentState> mh_step(const LatentState& state, double log_g_current,
                            const RatingDataset& data, const ModelHyperparams& hp,
                            const McmcConfig& cfg, Rng& rng);

// Full chain from a Normal(0, init_scale^2) start. Throws InitializationError
// if the initial log_joint is not finite.
ChainTrace run_chain(const RatingDataset& data, const ModelHyperparams& hp, const McmcConfig& cfg);

// Monte Carlo predictive mean: denormalize(mean_s sigmoid(u_i^s . v_j^s)).
// Throws UsageError for an empty trace or out-of-range indices.
double mcmc_predict(const ChainTrace& trace, std::size_t user, std::size_t item,
                    const RatingScale& scale);

// Row-stochastic MH kernel P[a][b] = T(b <- a) on a finite state space.
// `target` holds unnormalized positive weights; `proposal` must be a
// symmetric row-stochastic matrix. Throws UsageError otherwise.
std::vector<std::vector<double>> mh_transition_matrix(
    std::span<const double> target, const std::vector<std::vector<double>>& proposal);

// Sidecar CSV: `step,log_joint,accepted`, one row per step.
void write_chain_csv(std::ostream& out, const ChainTrace& trace);

}  // namespace bpmf
