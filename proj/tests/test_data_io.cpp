#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "bpmf/data_io.hpp"
#include "bpmf/errors.hpp"

using namespace bpmf;

namespace {

constexpr const char* kSample =
    "userId,movieId,rating,timestamp\n"
    "1,1,4,964982703\n"
    "1,3,4,964981247\n"
    "1,6,4,964982224\n"
    "1,47,5,964983815\n"
    "1,50,5,964982931\n";

LoadedRatings load(const std::string& text) {
  std::istringstream in(text);
  return load_ratings(in);
}

std::size_t error_line(const std::string& text) {
  try {
    load(text);
  } catch (const RowError& e) {
    return e.line();
  }
  return 0;
}

RatingDataset synthetic(std::size_t count) {
  std::vector<Rating> triples;
  for (std::size_t n = 0; n < count; ++n) triples.push_back({n % 37, n / 37, (n % 5) / 4.0});
  return RatingDataset(37, count / 37 + 1, triples, {});
}

using Key = std::tuple<std::size_t, std::size_t, double>;

std::multiset<Key> keys(const RatingDataset& d) {
  std::multiset<Key> out;
  for (const Rating& t : d.triples()) out.insert({t.user, t.item, t.value});
  return out;
}

}  // namespace

TEST(LoadRatings, SampleTable) {
  const LoadedRatings r = load(kSample);
  ASSERT_EQ(r.ratings.size(), 5u);
  EXPECT_EQ(r.ratings.front(), (RawRating{1, 1, 4.0}));
  EXPECT_EQ(r.ratings.back(), (RawRating{1, 50, 5.0}));
  EXPECT_EQ(r.scale, (RatingScale{1.0, 5}));
}

TEST(LoadRatings, HeaderOnly) {
  EXPECT_TRUE(load("userId,movieId,rating,timestamp\n").ratings.empty());
  EXPECT_TRUE(load("userId,movieId,rating,timestamp").ratings.empty());
}

TEST(LoadRatings, CrlfAndBlankLines) {
  const LoadedRatings r = load("userId,movieId,rating,timestamp\r\n1,2,3,0\r\n\r\n4,5,1,0\r\n");
  ASSERT_EQ(r.ratings.size(), 2u);
  EXPECT_EQ(r.ratings[1], (RawRating{4, 5, 1.0}));
}

TEST(LoadRatings, BadHeader) {
  EXPECT_THROW(load(""), FormatError);
  EXPECT_THROW(load("user,movie,rating,timestamp\n1,1,4,0\n"), FormatError);
  EXPECT_THROW(load("1,1,4,964982703\n"), FormatError);
}

TEST(LoadRatings, RowErrorsNameTheLine) {
  EXPECT_EQ(error_line("userId,movieId,rating,timestamp\n1,1,4,964982703\n1,3,abc,964981247\n"), 3u);
  EXPECT_EQ(error_line("userId,movieId,rating,timestamp\n1,1,4\n"), 2u);
  EXPECT_EQ(error_line("userId,movieId,rating,timestamp\n1,1,4,0,9\n"), 2u);
  EXPECT_EQ(error_line("userId,movieId,rating,timestamp\nx,1,4,0\n"), 2u);
  EXPECT_EQ(error_line("userId,movieId,rating,timestamp\n1,1,0,0\n"), 2u);
  EXPECT_EQ(error_line("userId,movieId,rating,timestamp\n1,1,10.5,0\n"), 2u);
  EXPECT_EQ(error_line("userId,movieId,rating,timestamp\n1,1,4,0\n\n1,1,3,0\n"), 4u);
  EXPECT_EQ(error_line("userId,movieId,rating,timestamp\n1,1,0.5,0\n1,2,0.25,0\n"), 3u);
}

TEST(LoadRatings, MissingFileIsIoError) {
  EXPECT_THROW(load_ratings_file("/nonexistent/ratings.csv"), IoError);
}

TEST(LoadRatings, HalfStarScaleRoundTrips) {
  const LoadedRatings r = load(
      "userId,movieId,rating,timestamp\n1,1,0.5,0\n1,2,3.5,0\n2,1,5,0\n2,3,4,0\n3,3,1.5,0\n");
  EXPECT_EQ(r.scale, (RatingScale{0.5, 5}));
  const BuiltDataset b = build_dataset(r.ratings, r.scale);
  for (std::size_t n = 0; n < r.ratings.size(); ++n) {
    const Rating& t = b.data.triples()[n];
    EXPECT_EQ(b.maps.user_id(t.user), r.ratings[n].user_id);
    EXPECT_EQ(b.maps.item_id(t.item), r.ratings[n].movie_id);
    EXPECT_NEAR(denormalize_rating(t.value, b.data.scale()), r.ratings[n].rating, 1e-12);
  }
}

TEST(LoadRatings, IntegralScaleRoundTrips) {
  const LoadedRatings r = load(kSample);
  const BuiltDataset b = build_dataset(r.ratings);
  for (std::size_t n = 0; n < r.ratings.size(); ++n) {
    EXPECT_NEAR(denormalize_rating(b.data.triples()[n].value, b.data.scale()), r.ratings[n].rating, 1e-12);
  }
}

TEST(DetectScale, Rules) {
  EXPECT_EQ(detect_scale({}), RatingScale{});
  const std::vector<RawRating> low{{1, 1, 1.0}};
  EXPECT_EQ(detect_scale(low).r_max, 2);
  const std::vector<RawRating> ten{{1, 1, 7.0}, {1, 2, 9.2}};
  EXPECT_EQ(detect_scale(ten), (RatingScale{0.5, 10}));
}

TEST(BuildDataset, Examples) {
  const std::vector<RawRating> single{{7, 42, 5.0}};
  const BuiltDataset a = build_dataset(single, RatingScale{});
  EXPECT_EQ(a.data.n_users(), 1u);
  EXPECT_EQ(a.data.n_items(), 1u);
  ASSERT_EQ(a.data.size(), 1u);
  EXPECT_EQ(a.data.triples()[0], (Rating{0, 0, 1.0}));

  const std::vector<RawRating> shared{{10, 5, 3.0}, {20, 5, 4.0}};
  const BuiltDataset b = build_dataset(shared);
  EXPECT_EQ(b.data.n_items(), 1u);
  EXPECT_EQ(b.data.n_users(), 2u);
  EXPECT_EQ(*b.maps.user_index(10), 0u);
  EXPECT_EQ(*b.maps.user_index(20), 1u);

  EXPECT_THROW(build_dataset(std::vector<RawRating>{}), UsageError);
}

TEST(IdMaps, BijectionInFirstAppearanceOrder) {
  IdMaps maps;
  const std::vector<std::int64_t> ids{905, 3, 905, -7, 12, 3, 40000000000};
  for (std::int64_t id : ids) maps.add_user(id);
  EXPECT_EQ(maps.n_users(), 5u);
  EXPECT_EQ(maps.user_id(0), 905);
  EXPECT_EQ(maps.user_id(2), -7);
  for (std::int64_t id : ids) EXPECT_EQ(maps.user_id(*maps.user_index(id)), id);
  for (std::size_t n = 0; n < maps.n_users(); ++n) EXPECT_EQ(*maps.user_index(maps.user_id(n)), n);
  EXPECT_FALSE(maps.user_index(1).has_value());
  EXPECT_FALSE(maps.item_index(905).has_value());
}

TEST(SplitDataset, SixTwoTwo) {
  const RatingDataset data = synthetic(10);
  const SplitDataset s = split_dataset(data, {}, 1);
  EXPECT_EQ(s.train.size(), 6u);
  EXPECT_EQ(s.validation.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
  for (const RatingDataset* part : {&s.train, &s.validation, &s.test}) {
    EXPECT_EQ(part->n_users(), data.n_users());
    EXPECT_EQ(part->n_items(), data.n_items());
    EXPECT_EQ(part->scale(), data.scale());
  }
}

TEST(SplitDataset, PartitionOverManySeeds) {
  for (std::size_t count : {10u, 1000u}) {
    const RatingDataset data = synthetic(count);
    const auto all = keys(data);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const SplitDataset s = split_dataset(data, {}, seed);
      std::multiset<Key> uni;
      for (const RatingDataset* part : {&s.train, &s.validation, &s.test}) {
        const auto k = keys(*part);
        uni.insert(k.begin(), k.end());
      }
      EXPECT_EQ(uni, all) << "seed " << seed;
      EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size(), count);
    }
  }
}

TEST(SplitDataset, DeterministicAndSeedSensitive) {
  const RatingDataset data = synthetic(10);
  EXPECT_EQ(keys(split_dataset(data, {}, 5).train), keys(split_dataset(data, {}, 5).train));
  int differ = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    differ += keys(split_dataset(data, {}, 2 * seed).train) != keys(split_dataset(data, {}, 2 * seed + 1).train);
  }
  EXPECT_GE(differ, 9);
}

TEST(SplitDataset, Errors) {
  EXPECT_THROW(split_dataset(synthetic(2), {}, 1), SplitError);
  EXPECT_THROW(split_dataset(synthetic(10), {0.5, 0.5, 0.0}, 1), SplitError);
  EXPECT_THROW(split_dataset(synthetic(10), {0.6, 0.2, 0.3}, 1), SplitError);
}

TEST(SplitDataset, KeepsIdMaps) {
  const std::vector<RawRating> raw{{5, 1, 1.0}, {6, 2, 2.0}, {7, 3, 3.0}};
  BuiltDataset b = build_dataset(raw);
  const SplitDataset s = split_dataset(b.data, {}, 1, b.maps);
  EXPECT_EQ(s.maps.user_id(2), 7);
}
