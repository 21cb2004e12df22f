#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cell/dataset.hpp"
#include "cell/embedding.hpp"
#include "cell/genemap.hpp"
#include "cell/interactions.hpp"
#include "cell/optim.hpp"

namespace cell {

// Per-pair operation choice plus the feed-forward parameters of the chosen
// kind (empty for parameter-free kinds).
struct OperationAssignment {
  std::vector<OpKind> kinds;
  std::vector<FFParams> ff;

  std::size_t size() const { return kinds.size(); }
};

struct DnaConfig {
  double learning_rate = 1e-3;  // xi: Adam rate and virtual-step size
  double val_fraction = 0.5;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  bool second_order = false;
  double hvp_epsilon = 1e-2;  // finite-difference step, scaled by 1/||v||
  std::size_t batch_size = 2048;
  std::uint64_t seed = 1;
  AdamConfig adam;  // beta/eps/weight_decay; lr is taken from learning_rate
  std::size_t snapshot_every_epochs = 1;
};

// Offsets into the two flat parameter vectors of the stage-I model.
// fitness: [theta, 4 per pair]. weights: [w per pair | per pair:
// product-FF weight+bias, concat-FF weight+bias].
struct DnaLayout {
  std::size_t m = 0, dim = 0, pairs = 0;

  std::size_t theta_offset(std::size_t p) const { return 4 * p; }
  std::size_t w_offset(std::size_t p) const { return p; }
  std::size_t pff_size() const { return dim * dim + dim; }
  std::size_t cff_size() const { return 2 * dim * dim + dim; }
  std::size_t per_pair_ff() const { return pff_size() + cff_size(); }
  std::size_t ff_base() const { return pairs; }
  std::size_t ff_offset(std::size_t p, OpKind kind) const {
    std::size_t off = ff_base() + p * per_pair_ff();
    if (kind == OpKind::ConcatFF) off += pff_size();
    return off;
  }
  std::size_t weights_size() const { return pairs * (1 + per_pair_ff()); }

  FFView ff_view(std::span<const double> weights, std::size_t p,
                 OpKind kind) const {
    if (!op_has_ff(kind)) return {};
    const std::size_t off = ff_offset(p, kind);
    const std::size_t in_dim = ff_input_dim(kind, dim);
    return {weights.subspan(off, in_dim * dim),
            weights.subspan(off + in_dim * dim, dim)};
  }
  FFGradView ff_grad_view(std::span<double> grads, std::size_t p,
                          OpKind kind) const {
    if (!op_has_ff(kind)) return {};
    const std::size_t off = ff_offset(p, kind);
    const std::size_t in_dim = ff_input_dim(kind, dim);
    return {grads.subspan(off, in_dim * dim),
            grads.subspan(off + in_dim * dim, dim)};
  }
};

struct DnaGrads {
  Vec fitness;
  Vec weights;
  EmbeddingGrad emb;

  void init(const DnaLayout& lay) {
    fitness.assign(4 * lay.pairs, 0.0);
    weights.assign(lay.weights_size(), 0.0);
    emb.init(lay.m);
  }
};

// Mean Logloss of the linkage response over the given instances, with
// optional exact gradients. With tape_backward false only the fitness and
// pair-weight gradients are produced (embedding/FF gradients skipped).
double dna_loss_and_grad(const DnaLayout& lay,
                         std::span<const double> fitness,
                         std::span<const double> weights, const Dataset& ds,
                         std::span<const std::size_t> idx,
                         const EmbeddingView& emb, DnaGrads* grads,
                         bool tape_backward, double* softmax_dev);

// Stage-I model: operation fitness (theta), pair weights, and the full
// per-pair feed-forward bank, all trained against a shared embedding table.
class DnaModel {
 public:
  DnaModel(std::size_t m, std::size_t dim, std::uint64_t seed);

  const DnaLayout& layout() const { return lay_; }
  FlatParams& fitness() { return fitness_; }
  const FlatParams& fitness() const { return fitness_; }
  FlatParams& weights() { return weights_; }
  const FlatParams& weights() const { return weights_; }

  std::span<const double> theta() const { return fitness_.values; }
  std::span<const double> pair_weights() const {
    return std::span<const double>(weights_.values).first(lay_.pairs);
  }

  double loss_and_grad(const Dataset& ds, std::span<const std::size_t> idx,
                       const EmbeddingView& emb, DnaGrads* grads,
                       bool tape_backward = true,
                       double* softmax_dev = nullptr) const {
    return dna_loss_and_grad(lay_, fitness_.values, weights_.values, ds, idx,
                             emb, grads, tape_backward, softmax_dev);
  }

  // Linkage response: per-instance predicted probabilities.
  Vec predict(const Dataset& ds, std::span<const std::size_t> idx,
              const EmbeddingView& emb) const;

  OperationAssignment make_assignment() const;

 private:
  DnaLayout lay_;
  FlatParams fitness_;
  FlatParams weights_;
};

// Softmax over one pair's four fitness values.
void softmax4(const double* theta, double* coeff);

// Convex combination of the four candidate interaction vectors under the
// softmax of the pair's fitness values.
Vec mixed_interaction(std::span<const double> theta_pair,
                      const std::array<Vec, 4>& op_outputs);

// Per-pair argmax over the four fitness values; ties break to the lowest
// operation code.
std::vector<OpKind> discretize(const Vec& op_fitness, std::size_t pairs);

// Exposed for validation against a finite-difference oracle of the
// unrolled objective.
Vec dna_second_order_fitness_grad(const DnaModel& model, EmbeddingTable& table,
                                  const Dataset& dtrain,
                                  std::span<const std::size_t> tb,
                                  const Dataset& dval,
                                  std::span<const std::size_t> vb,
                                  const DnaConfig& cfg, double* sdev);

struct DnaEpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  Vec op_fitness;
};

struct DnaResult {
  Vec op_fitness;
  Vec pair_weights;
  OperationAssignment assignment;
  std::vector<DnaEpochRecord> history;
  std::vector<GeneMapFrame> frames;
  double max_softmax_deviation = 0.0;
  std::size_t epochs_run = 0;
};

// Stage I. Splits the input into train/val streams, alternates fitness
// and weight/embedding updates, and discretizes at the end. The embedding
// table is trained in place.
DnaResult run_dna_search(const Dataset& input, EmbeddingTable& table,
                         const DnaConfig& cfg);

}  // namespace cell
