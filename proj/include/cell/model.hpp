#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cell/dataset.hpp"
#include "cell/dna.hpp"
#include "cell/embedding.hpp"
#include "cell/optim.hpp"

namespace cell {

struct MlpConfig {
  std::size_t depth = 2;   // hidden layers
  std::size_t width = 400;
  double learning_rate = 1e-3;
  AdamConfig adam;  // beta/eps/weight_decay; lr taken from learning_rate
  std::size_t batch_size = 2048;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;
  std::uint64_t seed = 1;
  bool warm_start_ff = false;      // keep stage-II FF params instead of fresh
  bool reset_embeddings = false;   // retrain embeddings from scratch
};

struct MlpEpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

// Stage-III model: an MLP over the retained, relevance-scaled features and
// interactions. Relevance fitness is frozen; discarded features and pairs
// are excluded from the input permanently.
class FinalModel {
 public:
  FinalModel() = default;
  FinalModel(EmbeddingTable table, OperationAssignment assignment, Vec alpha,
             Vec beta, const MlpConfig& cfg);

  std::size_t input_dim() const { return input_dim_; }
  const std::vector<std::size_t>& retained_features() const {
    return retained_features_;
  }
  const std::vector<std::size_t>& retained_pairs() const {
    return retained_pairs_;
  }
  const Vec& alpha() const { return alpha_; }
  const Vec& beta() const { return beta_; }
  const EmbeddingTable& table() const { return table_; }
  EmbeddingTable& table() { return table_; }
  const OperationAssignment& assignment() const { return assignment_; }
  FlatParams& params() { return params_; }
  const FlatParams& params() const { return params_; }
  const MlpConfig& config() const { return cfg_; }

  // Concatenation of alpha_i * f_i for retained features, then
  // beta_ij * g(f_i, f_j) for retained pairs, in lexicographic order.
  void build_input(const Instance& inst, Vec& x) const;

  double predict_one(const Instance& inst) const;
  Vec predict(const Dataset& ds, std::span<const std::size_t> idx) const;
  Vec predict_all(const Dataset& ds) const;

  struct Grads {
    Vec flat;
    EmbeddingGrad emb;
  };
  double loss_and_grad(const Dataset& ds, std::span<const std::size_t> idx,
                       Grads* grads) const;

 private:
  friend FinalModel train_final(const Dataset&, const Dataset&,
                                EmbeddingTable, const OperationAssignment&,
                                const Vec&, const Vec&, const MlpConfig&,
                                std::vector<MlpEpochRecord>*);

  double forward_one(const Instance& inst, Vec* x_out) const;

  EmbeddingTable table_;
  OperationAssignment assignment_;
  Vec alpha_, beta_;
  std::vector<std::size_t> retained_features_, retained_pairs_;
  std::size_t input_dim_ = 0;
  MlpConfig cfg_;
  FlatParams params_;  // MLP layers then FF params of retained FF pairs
  std::vector<std::size_t> layer_w_off_, layer_b_off_;
  std::vector<std::size_t> layer_in_, layer_out_;
  std::vector<std::size_t> ff_off_;  // per retained pair; npos if no FF
};

// Trains MLP weights and embeddings with Adam; alpha/beta stay frozen.
// Early-stops on validation Logloss (train loss when val is empty).
FinalModel train_final(const Dataset& train, const Dataset& val,
                       EmbeddingTable table,
                       const OperationAssignment& assignment, const Vec& alpha,
                       const Vec& beta, const MlpConfig& cfg,
                       std::vector<MlpEpochRecord>* history);

}  // namespace cell
