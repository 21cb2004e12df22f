#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cell/common.hpp"
#include "cell/embedding.hpp"

namespace cell {

// A flat parameter vector made of named blocks. Blocks flag whether
// weight decay applies to them (search fitness variables never decay).
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool decay = true;
};

struct FlatParams {
  Vec values;
  std::vector<ParamBlock> blocks;

  std::size_t add_block(const std::string& name, std::size_t size, bool decay) {
    std::size_t offset = values.size();
    blocks.push_back({name, offset, size, decay});
    values.resize(offset + size, 0.0);
    return offset;
  }
  std::span<double> span(std::size_t block_idx) {
    const ParamBlock& b = blocks[block_idx];
    return {values.data() + b.offset, b.size};
  }
  std::span<const double> span(std::size_t block_idx) const {
    const ParamBlock& b = blocks[block_idx];
    return {values.data() + b.offset, b.size};
  }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Adam with decoupled weight decay: decaying blocks are first scaled by
// (1 - lr * wd), then the bias-corrected Adam delta is applied.
class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig cfg, std::size_t size) : cfg_(cfg), m_(size, 0.0),
                                           v_(size, 0.0) {}

  void step(FlatParams& params, const Vec& grads);
  // Clears first/second moments of a coordinate range (fresh parameters
  // after an operation mutation).
  void reset_range(std::size_t offset, std::size_t size);
  long long steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  Vec m_, v_;
  long long t_ = 0;
};

// Lazy per-row Adam over an embedding table: only rows present in the
// gradient are touched, so untouched rows stay bit-identical.
class SparseAdam {
 public:
  SparseAdam() = default;
  SparseAdam(AdamConfig cfg, const EmbeddingTable& table);

  void step(EmbeddingTable& table, const EmbeddingGrad& grads);
  long long steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Vec> m_, v_;
  long long t_ = 0;
};

// ---------------------------------------------------------------------------
// Regularized dual averaging with soft thresholding
// ---------------------------------------------------------------------------

struct RdaConfig {
  double lr = 1e-3;  // gamma
  double c = 0.5;
  double mu = 0.8;
};

inline double soft_threshold(double v, double h) {
  double mag = std::abs(v) - h;
  if (mag <= 0.0) return 0.0;
  return v > 0.0 ? mag : -mag;
}

// Keeps the running gradient sum and recomputes every coordinate as
//   S_h(t)( init - lr * sum_grads ),  h(t) = c * lr^{1/2} * (t * lr)^mu.
class Rda {
 public:
  Rda() = default;
  Rda(RdaConfig cfg, Vec init_values)
      : cfg_(cfg), init_(std::move(init_values)), cum_(init_.size(), 0.0) {}

  // Accumulates grads, advances t, writes the thresholded values.
  void step(const Vec& grads, Vec& values_out);

  // Drops the accumulated gradient of one coordinate (used when a mutated
  // interaction restarts its fitness from the initial value).
  void reset_coordinate(std::size_t idx) { cum_[idx] = 0.0; }

  double threshold() const;  // h(t) at the current step count
  long long steps_taken() const { return t_; }
  const Vec& initial_values() const { return init_; }
  const Vec& cumulative_gradient() const { return cum_; }

 private:
  RdaConfig cfg_;
  Vec init_;
  Vec cum_;
  long long t_ = 0;
};

}  // namespace cell
