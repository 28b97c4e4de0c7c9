#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace bpmf {

// All engines draw from a 64-bit Mersenne Twister seeded with the configured
// seed. Same seed on the same build gives bit-identical traces.
using Rng = std::mt19937_64;

inline void fill_normal(std::span<double> out, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& x : out) x = stddev * normal(rng);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace bpmf
