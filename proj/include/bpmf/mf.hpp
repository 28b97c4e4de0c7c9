#pragma once

// Classical point-estimate matrix factorization: full-batch gradient descent
// on the squared error of the raw dot product (no sigmoid, no regularizer).

#include <cstdint>
#include <span>
#include <vector>

#include "bpmf/model.hpp"

namespace bpmf {

struct MfConfig {
  std::size_t k = 10;
  double alpha = 0.002;  // learning rate
  std::size_t epochs = 300;
  double init_scale = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

// Sum of squared residuals r - u.v over observed (normalized) ratings.
double mf_loss(const LatentState& state, const RatingDataset& data);

// One full-batch step. Every u_i moves using the pre-epoch V, then every v_j
// moves using the updated U. Throws DivergenceError tagged with `epoch` if any
// entry becomes non-finite.
LatentState mf_epoch(const LatentState& state, const RatingDataset& data, const MfConfig& cfg,
                     std::size_t epoch = 0);

struct MfResult {
  LatentState state;
  std::vector<double> loss_trace;  // mf_loss after each epoch
};

MfResult mf_train(const RatingDataset& data, const MfConfig& cfg);

// Baseline prediction on the original scale. The raw dot product is clamped to
// [0,1] before mapping back, so the result always lies on the rating scale.
double mf_predict(std::span<const double> u, std::span<const double> v, const RatingScale& scale);

}  // namespace bpmf
