#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "bpmf/errors.hpp"
#include "bpmf/mcmc.hpp"
#include "quadrature.hpp"

using namespace bpmf;

namespace {

RatingDataset one_rating(double r) { return RatingDataset(1, 1, {{0, 0, r}}, {}); }

McmcConfig chain(std::size_t n, std::size_t burn_in, std::size_t thin, double proposal_std) {
  McmcConfig cfg;
  cfg.n_steps = n;
  cfg.burn_in = burn_in;
  cfg.thin = thin;
  cfg.proposal_std = proposal_std;
  return cfg;
}

// Batch-means standard error of the mean.
double batch_se(const std::vector<double>& x, std::size_t batches = 50) {
  const std::size_t len = x.size() / batches;
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t t = 0; t < len; ++t) means[b] += x[b * len + t];
    means[b] /= static_cast<double>(len);
  }
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(batches);
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

}  // namespace

TEST(AcceptanceRatio, Examples) {
  EXPECT_EQ(acceptance_ratio(-3.0, -3.0), 1.0);
  EXPECT_EQ(acceptance_ratio(-5.0, -2.0), 1.0);
  EXPECT_NEAR(acceptance_ratio(0.0, -std::numbers::ln2), 0.5, 1e-15);
  EXPECT_EQ(acceptance_ratio(0.0, -2000.0), 0.0);
}

TEST(MhTransition, ForcedAcceptReturnsProposal) {
  std::mt19937_64 rng(4);
  const LatentState cur = random_latent_state(2, 3, 2, 1.0, rng);
  const LatentState prop = random_latent_state(2, 3, 2, 1.0, rng);
  const MhStep<LatentState> s = mh_transition(cur, -1.0, prop, -40.0, 0.0);
  EXPECT_TRUE(s.accepted);
  EXPECT_EQ(s.state, prop);
  EXPECT_EQ(s.log_target, -40.0);
  const MhStep<LatentState> r = mh_transition(cur, -1.0, prop, -40.0, 0.5);
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.state, cur);
}

TEST(MhStep, DegenerateProposalAlwaysAcceptsUnchangedState) {
  const RatingDataset data(2, 2, {{0, 0, 0.3}, {1, 1, 0.9}}, {});
  const ModelHyperparams hp{2, 0.25};
  McmcConfig cfg;
  cfg.proposal_std = 1e-300;
  Rng rng(8);
  LatentState s = random_latent_state(2, 2, 2, 0.5, rng);
  double lg = log_joint(s, data, hp);
  for (int t = 0; t < 100; ++t) {
    MhStep<LatentState> step = mh_step(s, lg, data, hp, cfg, rng);
    ASSERT_TRUE(step.accepted);
    EXPECT_EQ(step.state, s);
    EXPECT_EQ(step.log_target, lg);
  }
}

TEST(MhStep, AcceptanceRateStrictlyBetweenBounds) {
  const ChainTrace t = run_chain(one_rating(0.8), {1, 0.1}, chain(10000, 1000, 1, 0.5));
  EXPECT_EQ(t.step_count, 10000u);
  EXPECT_GT(t.acceptance_rate(), 0.05);
  EXPECT_LT(t.acceptance_rate(), 0.95);
}

TEST(RunChain, StrideArithmetic) {
  EXPECT_EQ(run_chain(one_rating(0.5), {1, 1.0}, chain(10, 5, 5, 0.1)).samples.size(), 1u);
  for (std::size_t n : {10u, 11u, 37u}) {
    for (std::size_t b : {0u, 3u, 9u}) {
      for (std::size_t th : {1u, 2u, 4u, 7u}) {
        const McmcConfig cfg = chain(n, b, th, 0.1);
        const ChainTrace t = run_chain(one_rating(0.5), {1, 1.0}, cfg);
        EXPECT_EQ(t.samples.size(), cfg.retained_count());
        EXPECT_EQ(t.samples.size(), (n - b + th - 1) / th);
        EXPECT_EQ(t.energies.size(), n);
        EXPECT_LE(t.accept_count, t.step_count);
      }
    }
  }
}

TEST(RunChain, DefaultsFollowSixtyPercentBurnIn) {
  const McmcConfig cfg = McmcConfig::with_steps(1000);
  EXPECT_EQ(cfg.burn_in, 600u);
  EXPECT_EQ(cfg.thin, 1u);
  EXPECT_EQ(cfg.retained_count(), 400u);
}

TEST(RunChain, MatchesSequenceOfMhSteps) {
  const RatingDataset data(2, 3, {{0, 0, 0.2}, {1, 2, 0.7}, {0, 1, 1.0}}, {});
  const ModelHyperparams hp{2, 0.25};
  const McmcConfig cfg = chain(300, 100, 3, 0.3);
  const ChainTrace t = run_chain(data, hp, cfg);

  Rng rng(cfg.seed);
  LatentState s = random_latent_state(2, 3, 2, cfg.init_scale, rng);
  double lg = log_joint(s, data, hp);
  std::size_t kept = 0;
  for (std::size_t step = 0; step < cfg.n_steps; ++step) {
    MhStep<LatentState> r = mh_step(s, lg, data, hp, cfg, rng);
    s = std::move(r.state);
    lg = r.log_target;
    ASSERT_EQ(t.energies[step], lg);
    ASSERT_EQ(t.accepted[step], r.accepted ? 1 : 0);
    if (step >= cfg.burn_in && (step - cfg.burn_in) % cfg.thin == 0) {
      ASSERT_EQ(t.samples[kept++], s);
    }
  }
  EXPECT_EQ(kept, t.samples.size());
}

TEST(RunChain, RejectedStepsRepeatStateExactly) {
  const RatingDataset data(2, 2, {{0, 0, 0.1}, {1, 0, 0.9}}, {});
  const ChainTrace t = run_chain(data, {2, 0.25}, chain(3000, 0, 1, 0.4));
  std::size_t rejected = 0;
  for (std::size_t s = 1; s < t.samples.size(); ++s) {
    if (!t.accepted[s]) {
      ++rejected;
      EXPECT_EQ(t.samples[s], t.samples[s - 1]);
      EXPECT_EQ(t.energies[s], t.energies[s - 1]);
    }
  }
  EXPECT_GT(rejected, 0u);
  for (double e : t.energies) EXPECT_TRUE(std::isfinite(e));
}

TEST(RunChain, Deterministic) {
  const RatingDataset data(3, 2, {{0, 0, 0.1}, {2, 1, 0.9}}, {});
  const McmcConfig cfg = chain(2000, 1000, 10, 0.3);
  const ChainTrace a = run_chain(data, {2, 0.25}, cfg), b = run_chain(data, {2, 0.25}, cfg);
  EXPECT_EQ(a.energies, b.energies);
  EXPECT_EQ(a.accepted, b.accepted);
  EXPECT_EQ(a.samples, b.samples);
}

TEST(RunChain, PriorOnlyChainSamplesThePrior) {
  const RatingDataset empty(2, 2, {}, {});
  const ChainTrace t = run_chain(empty, {2, 1.0}, chain(250000, 10000, 10, 0.6));
  ASSERT_EQ(t.samples.size(), 24000u);
  const std::size_t entries = 8;
  double second = 0.0;
  for (std::size_t e = 0; e < entries; ++e) {
    std::vector<double> x;
    for (const LatentState& s : t.samples) x.push_back(e < 4 ? s.u.values()[e] : s.v.values()[e - 4]);
    double mean = 0.0;
    for (double xi : x) {
      mean += xi;
      second += xi * xi;
    }
    mean /= static_cast<double>(x.size());
    EXPECT_LT(std::abs(mean), 3.0 * batch_se(x)) << "entry " << e;
  }
  second /= static_cast<double>(entries * t.samples.size());
  EXPECT_NEAR(second, 1.0, 0.1);
}

TEST(RunChain, RejectsBadConfig) {
  EXPECT_THROW(run_chain(one_rating(0.5), {1, 1.0}, chain(10, 10, 1, 0.1)), UsageError);
  EXPECT_THROW(run_chain(one_rating(0.5), {1, 1.0}, chain(10, 0, 0, 0.1)), UsageError);
  EXPECT_THROW(run_chain(one_rating(0.5), {1, 1.0}, chain(10, 0, 1, 0.0)), UsageError);
}

TEST(McmcPredict, Examples) {
  ChainTrace t;
  EXPECT_THROW(mcmc_predict(t, 0, 0, {}), UsageError);

  LatentState a = LatentState::zeros(1, 1, 1);
  a.u(0, 0) = 1.0;
  a.v(0, 0) = 1.0;
  t.samples = {a};
  EXPECT_DOUBLE_EQ(mcmc_predict(t, 0, 0, {}), predict_point(a.u.row(0), a.v.row(0), {}));
  EXPECT_THROW(mcmc_predict(t, 1, 0, {}), UsageError);

  const double logit02 = std::log(0.2 / 0.8);
  LatentState lo = LatentState::zeros(1, 1, 1), hi = LatentState::zeros(1, 1, 1);
  lo.u(0, 0) = logit02;
  lo.v(0, 0) = 1.0;
  hi.u(0, 0) = -logit02;
  hi.v(0, 0) = 1.0;
  t.samples = {lo, hi};
  EXPECT_NEAR(mcmc_predict(t, 0, 0, {}), 3.0, 1e-12);
}

TEST(McmcPredict, MatchesPosteriorQuadrature) {
  const testkit::OneByOne m{0.8, 0.1};
  const ChainTrace t = run_chain(one_rating(m.r), {1, m.sigma2}, chain(50000, 10000, 1, 0.5));
  const double expected = 4.0 * testkit::kFrozenMeanSigmoid + 1.0;
  EXPECT_NEAR(mcmc_predict(t, 0, 0, {}), expected, 0.02);
}

TEST(TransitionMatrix, DetailedBalanceAndStationarity) {
  const std::vector<double> target{0.1, 0.25, 0.05, 0.4, 0.2};
  std::vector<std::vector<double>> q(5, std::vector<double>(5, 0.0));
  for (std::size_t a = 0; a < 5; ++a) {
    q[a][(a + 1) % 5] = 0.3;
    q[(a + 1) % 5][a] = 0.3;
  }
  for (std::size_t a = 0; a < 5; ++a) q[a][a] = 0.4;
  const auto p = mh_transition_matrix(target, q);
  for (std::size_t a = 0; a < 5; ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < 5; ++b) {
      row += p[a][b];
      EXPECT_GE(p[a][b], 0.0);
      EXPECT_NEAR(p[a][b] * target[a], p[b][a] * target[b], 1e-12) << a << "," << b;
    }
    EXPECT_NEAR(row, 1.0, 1e-12);
  }
  for (std::size_t b = 0; b < 5; ++b) {
    double flow = 0.0;
    for (std::size_t a = 0; a < 5; ++a) flow += target[a] * p[a][b];
    EXPECT_NEAR(flow, target[b], 1e-12);
  }
}

TEST(TransitionMatrix, RejectsAsymmetricProposal) {
  const std::vector<double> target{0.5, 0.5};
  EXPECT_THROW(mh_transition_matrix(target, {{0.2, 0.8}, {0.5, 0.5}}), UsageError);
  EXPECT_THROW(mh_transition_matrix(target, {{0.5, 0.6}, {0.6, 0.5}}), UsageError);
  EXPECT_THROW(mh_transition_matrix(std::vector<double>{0.0, 1.0}, {{0.5, 0.5}, {0.5, 0.5}}), UsageError);
}

TEST(MetropolisStep, TwoStateOccupancy) {
  const double p[2] = {0.3, 0.7};
  Rng rng(21);
  int state = 0;
  double log_current = std::log(p[0]);
  std::size_t in_one = 0;
  const std::size_t steps = 100000;
  for (std::size_t t = 0; t < steps; ++t) {
    const MhStep<int> s = metropolis_step(
        state, log_current, [&](int z) { return std::log(p[z]); },
        [](int z, Rng&) { return 1 - z; }, rng);
    state = s.state;
    log_current = s.log_target;
    in_one += static_cast<std::size_t>(state);
  }
  EXPECT_NEAR(static_cast<double>(in_one) / steps, 0.7, 0.01);
}

TEST(ChainCsv, HeaderAndRows) {
  ChainTrace t;
  t.energies = {-1.5, -1.25};
  t.accepted = {1, 0};
  std::ostringstream os;
  write_chain_csv(os, t);
  EXPECT_EQ(os.str(), "step,log_joint,accepted\n0,-1.5,1\n1,-1.25,0\n");
}
