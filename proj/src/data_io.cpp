#include "bpmf/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_set>

#include "bpmf/errors.hpp"
#include "bpmf/rng.hpp"

namespace bpmf {

namespace {

constexpr std::string_view kHeader = "userId,movieId,rating,timestamp";

std::string_view strip_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

template <class T>
T parse_field(std::string_view field, std::size_t line, const char* name) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw RowError(line, std::string("invalid ") + name + " '" + std::string(field) + "'");
  }
  return value;
}

struct PairHash {
  std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& p) const noexcept {
    return std::hash<std::int64_t>{}(p.first) * 0x9E3779B97F4A7C15ULL ^
           std::hash<std::int64_t>{}(p.second);
  }
};

}  // namespace

LoadedRatings load_ratings(std::istream& in) {
  std::string buffer;
  if (!std::getline(in, buffer)) throw FormatError("missing header line");
  std::string_view header = strip_line(buffer);
  if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
  if (header != kHeader) {
    throw FormatError("expected header '" + std::string(kHeader) + "', got '" +
                      std::string(header) + "'");
  }

  LoadedRatings out;
  std::vector<std::size_t> lines;
  std::unordered_set<std::pair<std::int64_t, std::int64_t>, PairHash> seen;
  std::size_t line_no = 1;
  while (std::getline(in, buffer)) {
    ++line_no;
    const std::string_view line = strip_line(buffer);
    if (line.empty()) continue;

    std::string_view fields[4];
    std::size_t n_fields = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (n_fields == 4) throw RowError(line_no, "expected 4 fields");
      fields[n_fields++] = line.substr(start, comma == std::string_view::npos ? comma : comma - start);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (n_fields != 4) throw RowError(line_no, "expected 4 fields");

    RawRating r;
    r.user_id = parse_field<std::int64_t>(fields[0], line_no, "userId");
    r.movie_id = parse_field<std::int64_t>(fields[1], line_no, "movieId");
    r.rating = parse_field<double>(fields[2], line_no, "rating");
    if (!(r.rating > 0.0 && r.rating <= 10.0)) {
      throw RowError(line_no, "rating " + std::string(fields[2]) + " outside (0, 10]");
    }
    if (!seen.emplace(r.user_id, r.movie_id).second) {
      throw RowError(line_no, "duplicate rating for userId " + std::to_string(r.user_id) +
                                  ", movieId " + std::to_string(r.movie_id));
    }
    out.ratings.push_back(r);
    lines.push_back(line_no);
  }
  if (in.bad()) throw IoError("read failure");

  out.scale = detect_scale(out.ratings);
  for (std::size_t n = 0; n < out.ratings.size(); ++n) {
    if (out.ratings[n].rating < out.scale.r_min) {
      throw RowError(lines[n], "rating below scale minimum " + std::to_string(out.scale.r_min));
    }
  }
  return out;
}

LoadedRatings load_ratings_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ratings file " + path.string());
  try {
    return load_ratings(in);
  } catch (const RowError& e) {
    throw RowError(e.line(), path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

RatingScale detect_scale(std::span<const RawRating> ratings) {
  if (ratings.empty()) return {};
  double max_rating = 0.0;
  bool fractional = false;
  for (const RawRating& r : ratings) {
    max_rating = std::max(max_rating, r.rating);
    fractional = fractional || r.rating != std::floor(r.rating);
  }
  RatingScale scale;
  scale.r_max = std::max(2, static_cast<int>(std::ceil(max_rating)));
  scale.r_min = fractional ? 0.5 : 1.0;
  return scale;
}

std::size_t IdMaps::add_user(std::int64_t id) {
  const auto [it, inserted] = user_index_.emplace(id, users_.size());
  if (inserted) users_.push_back(id);
  return it->second;
}

std::size_t IdMaps::add_item(std::int64_t id) {
  const auto [it, inserted] = item_index_.emplace(id, items_.size());
  if (inserted) items_.push_back(id);
  return it->second;
}

std::optional<std::size_t> IdMaps::user_index(std::int64_t id) const {
  const auto it = user_index_.find(id);
  if (it == user_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> IdMaps::item_index(std::int64_t id) const {
  const auto it = item_index_.find(id);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

BuiltDataset build_dataset(std::span<const RawRating> raw, const RatingScale& scale) {
  if (raw.empty()) throw UsageError("build_dataset: no ratings");
  scale.validate();
  IdMaps maps;
  std::vector<Rating> triples;
  triples.reserve(raw.size());
  for (const RawRating& r : raw) {
    const std::size_t user = maps.add_user(r.user_id);
    const std::size_t item = maps.add_item(r.movie_id);
    triples.push_back({user, item, normalize_rating(r.rating, scale)});
  }
  RatingDataset data(maps.n_users(), maps.n_items(), std::move(triples), scale);
  return {std::move(data), std::move(maps)};
}

BuiltDataset build_dataset(std::span<const RawRating> raw) {
  return build_dataset(raw, detect_scale(raw));
}

SplitDataset split_dataset(const RatingDataset& data, const SplitFractions& fractions,
                           std::uint64_t seed, IdMaps maps) {
  if (!(fractions.train > 0.0 && fractions.validation > 0.0 && fractions.test > 0.0)) {
    throw SplitError("split fractions must all be positive");
  }
  if (std::abs(fractions.train + fractions.validation + fractions.test - 1.0) > 1e-9) {
    throw SplitError("split fractions must sum to 1");
  }
  const std::size_t total = data.size();
  if (total < 3) throw SplitError("need at least 3 ratings to split, got " + std::to_string(total));

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // The small epsilon keeps products such as 10 * 0.6 from landing just
  // below an integer.
  const auto cut = [total](double fraction) {
    return std::min(total, static_cast<std::size_t>(std::floor(total * fraction + 1e-9)));
  };
  const std::size_t train_end = cut(fractions.train);
  const std::size_t val_end = std::max(train_end, cut(fractions.train + fractions.validation));

  const auto part = [&](std::size_t begin, std::size_t end) {
    std::vector<Rating> triples;
    triples.reserve(end - begin);
    for (std::size_t n = begin; n < end; ++n) triples.push_back(data.triples()[order[n]]);
    return RatingDataset(data.n_users(), data.n_items(), std::move(triples), data.scale());
  };
  return {part(0, train_end), part(train_end, val_end), part(val_end, total), std::move(maps)};
}

}  // namespace bpmf
