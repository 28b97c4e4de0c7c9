#pragma once

// The rating model shared by every inference engine: standard-normal priors
// on user and item latent vectors, and a Gaussian likelihood whose mean is the
// sigmoid of their inner product. Ratings live on [0,1] internally.

#include <cstddef>
#include <span>
#include <vector>

#include "bpmf/matrix.hpp"
#include "bpmf/rng.hpp"

namespace bpmf {

// Original rating scale {r_min, ..., r_max}. r_min is 1 for integer-star data
// and 0.5 for half-star data.
struct RatingScale {
  double r_min = 1.0;
  int r_max = 5;

  // Throws DomainError unless r_max >= 2 and r_min is in (0, r_max).
  void validate() const;

  friend bool operator==(const RatingScale&, const RatingScale&) = default;
};

// One observed rating with dense 0-based indices and a normalized value.
struct Rating {
  std::size_t user = 0;
  std::size_t item = 0;
  double value = 0.0;

  friend bool operator==(const Rating&, const Rating&) = default;
};

// Sparse set of observed ratings. Construction validates index bounds, the
// [0,1] value range, and rejects duplicate (user, item) pairs.
class RatingDataset {
 public:
  RatingDataset() = default;
  RatingDataset(std::size_t n_users, std::size_t n_items, std::vector<Rating> triples,
                RatingScale scale);

  std::size_t n_users() const noexcept { return n_users_; }
  std::size_t n_items() const noexcept { return n_items_; }
  std::size_t size() const noexcept { return triples_.size(); }
  bool empty() const noexcept { return triples_.empty(); }
  std::span<const Rating> triples() const noexcept { return triples_; }
  const RatingScale& scale() const noexcept { return scale_; }

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::vector<Rating> triples_;
  RatingScale scale_;
};

// A concrete (U, V) pair: one K-wide row per user and per item.
struct LatentState {
  Matrix u;
  Matrix v;

  static LatentState zeros(std::size_t n_users, std::size_t n_items, std::size_t k) {
    return {Matrix(n_users, k), Matrix(n_items, k)};
  }

  std::size_t k() const noexcept { return u.cols(); }
  bool all_finite() const noexcept;

  friend bool operator==(const LatentState&, const LatentState&) = default;
};

// Every entry i.i.d. Normal(0, init_scale^2).
LatentState random_latent_state(std::size_t n_users, std::size_t n_items, std::size_t k,
                                double init_scale, Rng& rng);

struct ModelHyperparams {
  std::size_t k = 10;
  double sigma2 = 0.25;

  void validate() const;
};

double sigmoid(double x) noexcept;

// (r - r_min) / (r_max - r_min). Throws DomainError for off-scale r.
double normalize_rating(double r, const RatingScale& scale);

// Inverse of normalize_rating. Throws DomainError unless r_star is in [0,1].
double denormalize_rating(double r_star, const RatingScale& scale);

// log N(r | sigmoid(u.v), sigma2), normalization constant included.
double log_likelihood_entry(std::span<const double> u, std::span<const double> v, double r,
                            double sigma2) noexcept;

// Sum of log N(0, I) over every row of U and V.
double log_prior(const LatentState& state) noexcept;

// log of prior x likelihood with all constants, i.e. the unnormalized log
// posterior. Throws StructuralError if shapes disagree with the data or hp.k.
double log_joint(const LatentState& state, const RatingDataset& data, const ModelHyperparams& hp);

// Mode (= mean) of the Gaussian predictive, mapped back to the original scale.
double predict_point(std::span<const double> u, std::span<const double> v,
                     const RatingScale& scale) noexcept;

// Throws StructuralError unless U has n_users rows, V has n_items rows, and
// both share the same width.
void check_dimensions(const LatentState& state, const RatingDataset& data);

}  // namespace bpmf
