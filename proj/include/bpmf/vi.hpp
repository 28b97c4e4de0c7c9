#pragma once

// Mean-field Gaussian variational inference for the BPMF posterior.
//
// Q(U, V) = prod_i N(u_i | mu_u_i, diag(s_u_i^2)) prod_j N(v_j | mu_v_j, diag(s_v_j^2)),
// with scales stored as log s. The ELBO
//
//   L(Q) = E_Q[sum_{(i,j) in O} log N(r_ij | sigmoid(u_i . v_j), sigma2)] - KL(Q || prior)
//
// is estimated by sampling only the likelihood term through the
// reparameterization u = mu + s * eps; the KL against the standard-normal
// prior is analytic. Training is plain fixed-step gradient ascent on L.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "bpmf/matrix.hpp"
#include "bpmf/model.hpp"
#include "bpmf/rng.hpp"

namespace bpmf {

struct VariationalParams {
  Matrix mu_u;
  Matrix log_s_u;
  Matrix mu_v;
  Matrix log_s_v;

  static VariationalParams zeros(std::size_t n_users, std::size_t n_items, std::size_t k);

  std::size_t n_users() const noexcept { return mu_u.rows(); }
  std::size_t n_items() const noexcept { return mu_v.rows(); }
  std::size_t k() const noexcept { return mu_u.cols(); }
  bool all_finite() const noexcept;

  friend bool operator==(const VariationalParams&, const VariationalParams&) = default;
};

// Gradients share the layout of the parameters they differentiate.
using ViGradient = VariationalParams;

struct ViConfig {
  std::size_t k = 10;
  double learning_rate = 0.05;
  std::size_t epochs = 300;
  std::size_t mc_samples = 1;
  std::uint64_t seed = 1;
  double init_mu_scale = 0.1;
  double init_log_s = -2.302585092994046;  // log 0.1

  void validate() const;
};

// KL(N(mu, s^2) || N(0, 1)) = (s^2 + mu^2 - 1 - 2 log s) / 2.
double kl_gaussian_vs_standard(double mu, double log_s) noexcept;

// Sum of the coordinate-wise KL over every factor.
double total_kl(const VariationalParams& params) noexcept;

// Base noise for S reparameterized draws of (U, V).
struct ReparamNoise {
  std::vector<Matrix> eps_u;
  std::vector<Matrix> eps_v;

  std::size_t samples() const noexcept { return eps_u.size(); }
};

ReparamNoise draw_noise(std::size_t n_users, std::size_t n_items, std::size_t k,
                        std::size_t samples, Rng& rng);

double elbo_estimate(const VariationalParams& params, const RatingDataset& data,
                     const ModelHyperparams& hp, const ReparamNoise& noise);
double elbo_estimate(const VariationalParams& params, const RatingDataset& data,
                     const ModelHyperparams& hp, std::size_t mc_samples, Rng& rng);

// Pathwise gradient of elbo_estimate with the same noise, with respect to
// every mean and log-scale entry.
ViGradient elbo_gradient(const VariationalParams& params, const RatingDataset& data,
                         const ModelHyperparams& hp, const ReparamNoise& noise);
ViGradient elbo_gradient(const VariationalParams& params, const RatingDataset& data,
                         const ModelHyperparams& hp, std::size_t mc_samples, Rng& rng);

struct ViResult {
  VariationalParams params;
  // ELBO after each epoch, estimated with one noise draw fixed for the run.
  std::vector<double> elbo_trace;
};

// Throws DivergenceError with the epoch index on a non-finite ELBO or
// parameter, and StructuralError if cfg.k != hp.k.
ViResult vi_train(const RatingDataset& data, const ModelHyperparams& hp, const ViConfig& cfg);

// denormalize(mean over S draws from Q of sigmoid(u_i . v_j)). With
// mc_samples == 0 the means are plugged in instead.
double vi_predict(const VariationalParams& params, std::size_t user, std::size_t item,
                  const RatingScale& scale, std::size_t mc_samples, Rng& rng);

// Sidecar CSV: `epoch,elbo`.
void write_elbo_csv(std::ostream& out, std::span<const double> elbo_trace);

}  // namespace bpmf
