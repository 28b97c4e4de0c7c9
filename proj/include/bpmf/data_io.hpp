#pragma once

// MovieLens-format ingestion: `userId,movieId,rating,timestamp` CSV, sparse ID
// remapping, normalization and seeded train/validation/test splitting.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "bpmf/model.hpp"

namespace bpmf {

struct RawRating {
  std::int64_t user_id = 0;
  std::int64_t movie_id = 0;
  double rating = 0.0;

  friend bool operator==(const RawRating&, const RawRating&) = default;
};

struct LoadedRatings {
  std::vector<RawRating> ratings;
  RatingScale scale;
};

// Parses the whole stream. LF and CRLF line endings and blank lines are
// accepted. Throws FormatError for a bad header and RowError (with the 1-based
// line number) for malformed fields, ratings outside (0, 10] or below the
// detected scale minimum, and duplicate (userId, movieId) pairs.
LoadedRatings load_ratings(std::istream& in);

// Throws IoError naming the path if the file cannot be opened.
LoadedRatings load_ratings_file(const std::filesystem::path& path);

// r_max = ceil(max rating), at least 2; r_min = 0.5 if any rating is
// fractional, else 1. An empty list yields the default 1..5 scale.
RatingScale detect_scale(std::span<const RawRating> ratings);

// Original ID <-> dense index, assigned in first-appearance order.
class IdMaps {
 public:
  std::size_t add_user(std::int64_t id);
  std::size_t add_item(std::int64_t id);

  std::optional<std::size_t> user_index(std::int64_t id) const;
  std::optional<std::size_t> item_index(std::int64_t id) const;
  std::int64_t user_id(std::size_t index) const { return users_.at(index); }
  std::int64_t item_id(std::size_t index) const { return items_.at(index); }

  std::size_t n_users() const noexcept { return users_.size(); }
  std::size_t n_items() const noexcept { return items_.size(); }

 private:
  std::unordered_map<std::int64_t, std::size_t> user_index_;
  std::unordered_map<std::int64_t, std::size_t> item_index_;
  std::vector<std::int64_t> users_;
  std::vector<std::int64_t> items_;
};

struct BuiltDataset {
  RatingDataset data;
  IdMaps maps;
};

// Throws UsageError on an empty list.
BuiltDataset build_dataset(std::span<const RawRating> raw, const RatingScale& scale);
BuiltDataset build_dataset(std::span<const RawRating> raw);

struct SplitFractions {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

struct SplitDataset {
  RatingDataset train;
  RatingDataset validation;
  RatingDataset test;
  IdMaps maps;
};

// Seeded uniform shuffle of the triples, then contiguous cuts at
// floor(L * train) and floor(L * (train + validation)). All parts keep the
// full N x M shape. Throws SplitError for non-positive fractions, fractions
// not summing to 1, or fewer than 3 triples.
SplitDataset split_dataset(const RatingDataset& data, const SplitFractions& fractions,
                           std::uint64_t seed, IdMaps maps = {});

}  // namespace bpmf
