#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cell/common.hpp"

namespace cell {

// One labeled example: a binary label and one category index per field.
struct Instance {
  int label = 0;
  std::vector<std::uint32_t> fields;
};

struct Dataset {
  std::vector<Instance> instances;
  std::vector<std::uint32_t> field_cardinalities;
  std::string name;

  std::size_t size() const { return instances.size(); }
  std::size_t num_fields() const { return field_cardinalities.size(); }
};

// Loads `label,idx_1,...,idx_m` CSV lines. Cardinalities are inferred as
// (max index per field) + 1; line order is preserved.
Dataset load_csv(const std::string& path, std::size_t num_fields);

void save_csv(const Dataset& ds, const std::string& path);

// Seeded permutation split. Sizes for val/test are floor(n * ratio); the
// remainder goes to train. Splits are disjoint and exhaustive.
struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};
std::array<Dataset, 3> split(const Dataset& ds, const SplitRatios& ratios,
                             std::uint64_t seed);

// Epoch of mini-batch index lists. Without a shuffle seed the original
// order is kept; the last batch may be short.
std::vector<std::vector<std::size_t>> batch_indices(
    std::size_t n, std::size_t batch_size,
    std::optional<std::uint64_t> shuffle_seed);

// ---------------------------------------------------------------------------
// Synthetic poly-2 dataset
// ---------------------------------------------------------------------------

enum class ThresholdMode { Median, Fixed };

struct SyntheticConfig {
  std::size_t m = 6;
  std::size_t total_categories = 4481;     // N, split near-evenly over fields
  std::size_t latent_dim = 4;              // dimension of planted vectors
  std::vector<std::pair<std::size_t, std::size_t>> sum_pairs;      // C1
  std::vector<std::pair<std::size_t, std::size_t>> product_pairs;  // C2
  double noise_std = 0.01;                 // as a fraction of std(q_clean)
  ThresholdMode threshold_mode = ThresholdMode::Median;
  double fixed_threshold = 0.0;
  std::size_t n_instances = 120000;
  std::uint64_t seed = 1;
};

struct PlantedPair {
  std::size_t i = 0, j = 0;
  int op_code = 0;  // 0 = element-wise sum, 1 = element-wise product
};

struct GroundTruth {
  std::vector<PlantedPair> pairs;
  double threshold = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> field_cardinalities;
  std::vector<Vec> latents;  // one vector per category, all fields concatenated
  std::string latents_digest;
  bool degenerate = false;   // all labels identical
};

std::pair<Dataset, GroundTruth> generate_synthetic(const SyntheticConfig& cfg);

void save_ground_truth(const GroundTruth& gt, const std::string& path);

// ---------------------------------------------------------------------------
// Information-Value filter score
// ---------------------------------------------------------------------------

// IV = sum_i (Pos_i - Neg_i) * ln(Pos_i / Neg_i) over the field's categories,
// with 0.5-count smoothing for categories empty on either side.
double information_value(const Dataset& ds, std::size_t field);

}  // namespace cell
