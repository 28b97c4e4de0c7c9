#include "bpmf/mf.hpp"

#include <algorithm>
#include <cmath>

#include "bpmf/errors.hpp"

namespace bpmf {

void MfConfig::validate() const {
  if (k < 1) throw UsageError("mf: k must be >= 1");
  if (!(alpha > 0.0)) throw UsageError("mf: learning rate alpha must be > 0");
  if (!(init_scale >= 0.0)) throw UsageError("mf: init_scale must be >= 0");
}

double mf_loss(const LatentState& state, const RatingDataset& data) {
  check_dimensions(state, data);
  double loss = 0.0;
  for (const Rating& t : data.triples()) {
    const double residual = t.value - dot(state.u.row(t.user), state.v.row(t.item));
    loss += residual * residual;
  }
  return loss;
}

LatentState mf_epoch(const LatentState& state, const RatingDataset& data, const MfConfig& cfg,
                     std::size_t epoch) {
  check_dimensions(state, data);
  const std::size_t k = state.k();
  LatentState next = state;

  // Accumulate full-batch sums first so the result does not depend on the
  // order of the triples.
  Matrix step(state.u.rows(), k);
  for (const Rating& t : data.triples()) {
    const auto v = state.v.row(t.item);
    const double residual = t.value - dot(state.u.row(t.user), v);
    auto g = step.row(t.user);
    for (std::size_t c = 0; c < k; ++c) g[c] += residual * v[c];
  }
  for (std::size_t n = 0; n < next.u.size(); ++n) next.u.values()[n] += cfg.alpha * step.values()[n];

  step = Matrix(state.v.rows(), k);
  for (const Rating& t : data.triples()) {
    const auto u = next.u.row(t.user);
    const double residual = t.value - dot(u, state.v.row(t.item));
    auto g = step.row(t.item);
    for (std::size_t c = 0; c < k; ++c) g[c] += residual * u[c];
  }
  for (std::size_t n = 0; n < next.v.size(); ++n) next.v.values()[n] += cfg.alpha * step.values()[n];

  if (!next.all_finite()) throw DivergenceError(epoch, "mf factors became non-finite");
  return next;
}

MfResult mf_train(const RatingDataset& data, const MfConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  MfResult result{random_latent_state(data.n_users(), data.n_items(), cfg.k, cfg.init_scale, rng),
                  {}};
  result.loss_trace.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    result.state = mf_epoch(result.state, data, cfg, epoch);
    const double loss = mf_loss(result.state, data);
    if (!std::isfinite(loss)) throw DivergenceError(epoch, "mf loss became non-finite");
    result.loss_trace.push_back(loss);
  }
  return result;
}

double mf_predict(std::span<const double> u, std::span<const double> v, const RatingScale& scale) {
  return denormalize_rating(std::clamp(dot(u, v), 0.0, 1.0), scale);
}

}  // namespace bpmf
