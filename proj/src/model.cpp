#include "bpmf/model.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "bpmf/errors.hpp"

namespace bpmf {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

std::string describe_rating(double r, const RatingScale& scale) {
  std::ostringstream os;
  os << "rating " << r << " outside scale [" << scale.r_min << ", " << scale.r_max << "]";
  return os.str();
}

}  // namespace

void RatingScale::validate() const {
  if (r_max < 2) throw DomainError("rating scale maximum must be >= 2, got " + std::to_string(r_max));
  if (!(r_min > 0.0) || !(r_min < static_cast<double>(r_max))) {
    throw DomainError("rating scale minimum must lie in (0, r_max), got " + std::to_string(r_min));
  }
}

RatingDataset::RatingDataset(std::size_t n_users, std::size_t n_items, std::vector<Rating> triples,
                             RatingScale scale)
    : n_users_(n_users), n_items_(n_items), triples_(std::move(triples)), scale_(scale) {
  scale_.validate();
  std::unordered_set<std::size_t> seen;
  seen.reserve(triples_.size());
  for (const Rating& t : triples_) {
    if (t.user >= n_users_ || t.item >= n_items_) {
      throw StructuralError("rating (" + std::to_string(t.user) + ", " + std::to_string(t.item) +
                            ") outside a " + std::to_string(n_users_) + "x" +
                            std::to_string(n_items_) + " matrix");
    }
    if (!(t.value >= 0.0 && t.value <= 1.0)) {
      throw DomainError("normalized rating " + std::to_string(t.value) + " outside [0, 1]");
    }
    if (!seen.insert(t.user * n_items_ + t.item).second) {
      throw StructuralError("duplicate rating for user " + std::to_string(t.user) + ", item " +
                            std::to_string(t.item));
    }
  }
}

bool LatentState::all_finite() const noexcept {
  for (double x : u.values())
    if (!std::isfinite(x)) return false;
  for (double x : v.values())
    if (!std::isfinite(x)) return false;
  return true;
}

LatentState random_latent_state(std::size_t n_users, std::size_t n_items, std::size_t k,
                                double init_scale, Rng& rng) {
  LatentState state = LatentState::zeros(n_users, n_items, k);
  fill_normal(state.u.values(), init_scale, rng);
  fill_normal(state.v.values(), init_scale, rng);
  return state;
}

void ModelHyperparams::validate() const {
  if (k < 1) throw UsageError("latent dimension k must be >= 1");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw UsageError("likelihood variance sigma2 must be positive and finite");
  }
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double normalize_rating(double r, const RatingScale& scale) {
  if (!(r >= scale.r_min && r <= scale.r_max)) throw DomainError(describe_rating(r, scale));
  return (r - scale.r_min) / (scale.r_max - scale.r_min);
}

double denormalize_rating(double r_star, const RatingScale& scale) {
  if (!(r_star >= 0.0 && r_star <= 1.0)) {
    throw DomainError("normalized rating " + std::to_string(r_star) + " outside [0, 1]");
  }
  return (scale.r_max - scale.r_min) * r_star + scale.r_min;
}

double log_likelihood_entry(std::span<const double> u, std::span<const double> v, double r,
                            double sigma2) noexcept {
  const double residual = r - sigmoid(dot(u, v));
  return -0.5 * (kLog2Pi + std::log(sigma2)) - residual * residual / (2.0 * sigma2);
}

double log_prior(const LatentState& state) noexcept {
  const auto rows = static_cast<double>(state.u.rows() + state.v.rows());
  const auto k = static_cast<double>(state.k());
  return -0.5 * (squared_norm(state.u.values()) + squared_norm(state.v.values())) -
         rows * k * 0.5 * kLog2Pi;
}

double log_joint(const LatentState& state, const RatingDataset& data, const ModelHyperparams& hp) {
  check_dimensions(state, data);
  if (state.k() != hp.k) {
    throw StructuralError("state width " + std::to_string(state.k()) + " != configured k " +
                          std::to_string(hp.k));
  }
  const double constant = -0.5 * (kLog2Pi + std::log(hp.sigma2));
  const double inv_two_var = 1.0 / (2.0 * hp.sigma2);
  double sq = 0.0;
  for (const Rating& t : data.triples()) {
    const double residual = t.value - sigmoid(dot(state.u.row(t.user), state.v.row(t.item)));
    sq += residual * residual;
  }
  return static_cast<double>(data.size()) * constant - sq * inv_two_var + log_prior(state);
}

double predict_point(std::span<const double> u, std::span<const double> v,
                     const RatingScale& scale) noexcept {
  return (scale.r_max - scale.r_min) * sigmoid(dot(u, v)) + scale.r_min;
}

void check_dimensions(const LatentState& state, const RatingDataset& data) {
  if (state.u.rows() != data.n_users() || state.v.rows() != data.n_items() ||
      state.u.cols() != state.v.cols()) {
    throw StructuralError("latent state " + std::to_string(state.u.rows()) + "x" +
                          std::to_string(state.u.cols()) + " / " + std::to_string(state.v.rows()) +
                          "x" + std::to_string(state.v.cols()) + " does not match a " +
                          std::to_string(data.n_users()) + "x" + std::to_string(data.n_items()) +
                          " rating matrix");
  }
}

}  // namespace bpmf
