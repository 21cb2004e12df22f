#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cell {

using Vec = std::vector<double>;

// Errors caused by bad user input (files, configs, CLI arguments). The CLI
// maps these to exit code 1; everything else is treated as internal (exit 2).
struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double elem_sum(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Cross-entropy of a single instance expressed in terms of the logit:
//   L = log(1 + e^z) - y*z, computed in overflow-safe form.
inline double logloss_from_logit(double logit, int label) {
  double l = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
  return l - static_cast<double>(label) * logit;
}

// Number of unordered field pairs (i, j), i < j.
inline std::size_t pair_count(std::size_t m) { return m * (m - 1) / 2; }

// Rank of pair (i, j), i < j, in lexicographic order:
// (0,1), (0,2), ..., (0,m-1), (1,2), ...
inline std::size_t pair_rank(std::size_t i, std::size_t j, std::size_t m) {
  return i * (2 * m - i - 1) / 2 + (j - i - 1);
}

inline std::pair<std::size_t, std::size_t> pair_from_rank(std::size_t rank,
                                                          std::size_t m) {
  std::size_t i = 0;
  std::size_t row = m - 1;
  while (rank >= row) {
    rank -= row;
    ++i;
    --row;
  }
  return {i, i + 1 + rank};
}

using Rng = std::mt19937_64;

// splitmix64 step; used to derive independent sub-seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline void fill_uniform(Vec& v, double half_range, Rng& rng) {
  std::uniform_real_distribution<double> dist(-half_range, half_range);
  for (double& x : v) x = dist(rng);
}

inline void fill_gaussian(Vec& v, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& x : v) x = dist(rng);
}

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace cell
