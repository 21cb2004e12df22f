#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cell/dataset.hpp"
#include "cell/dna.hpp"
#include "cell/embedding.hpp"
#include "cell/genemap.hpp"
#include "cell/optim.hpp"

namespace cell {

struct MutationConfig {
  double lambda = 0.1;  // relevance threshold
  double sigma = 5.0;   // inverse mutation probability
  long long tau = 100;  // check period in optimizer steps
};

struct GenomeConfig {
  RdaConfig rda;
  AdamConfig adam;  // embeddings and active feed-forward parameters
  MutationConfig mutation;
  std::size_t batch_size = 2048;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;
  std::uint64_t seed = 1;
  long long snapshot_every = 0;  // gene-map cadence; 0 = mutation.tau
  bool normalize_interactions = false;  // scale pair terms by batch RMS
  double relevance_init_scale = 0.01;   // half-range of the alpha/beta init
};

struct MutationEvent {
  long long step = 0;
  std::size_t i = 0, j = 0;
  OpKind old_kind = OpKind::Sum;
  OpKind new_kind = OpKind::Sum;
  double beta = 0.0;  // value that triggered the check
};

struct RelevanceFitness {
  Vec alpha;  // per feature
  Vec beta;   // per pair
};

// Flat storage for the per-pair feed-forward bank used in stage II; every
// pair reserves slots for both FF kinds so mutation can re-initialize in
// place.
struct GenomeLayout {
  std::size_t m = 0, dim = 0, pairs = 0;

  std::size_t pff_size() const { return dim * dim + dim; }
  std::size_t cff_size() const { return 2 * dim * dim + dim; }
  std::size_t per_pair_ff() const { return pff_size() + cff_size(); }
  std::size_t ff_total() const { return pairs * per_pair_ff(); }
  std::size_t ff_offset(std::size_t p, OpKind kind) const {
    std::size_t off = p * per_pair_ff();
    if (kind == OpKind::ConcatFF) off += pff_size();
    return off;
  }
  FFView ff_view(std::span<const double> values, std::size_t p,
                 OpKind kind) const {
    if (!op_has_ff(kind)) return {};
    const std::size_t off = ff_offset(p, kind);
    const std::size_t in_dim = ff_input_dim(kind, dim);
    return {values.subspan(off, in_dim * dim),
            values.subspan(off + in_dim * dim, dim)};
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

struct GenomeGrads {
  Vec alpha;
  Vec beta;
  Vec ff;
  EmbeddingGrad emb;

  void init(const GenomeLayout& lay) {
    alpha.assign(lay.m, 0.0);
    beta.assign(lay.pairs, 0.0);
    ff.assign(lay.ff_total(), 0.0);
    emb.init(lay.m);
  }
};

// Mean Logloss of the genome response
//   Sigmoid( sum_i alpha_i * elem_sum(f_i)
//          + sum_{i<j} beta_ij * elem_sum(g(f_i, f_j)) )
// with optional exact gradients. `scale` (per pair) divides the interaction
// scalars when interaction normalization is on; pass empty for identity.
double genome_loss_and_grad(const GenomeLayout& lay,
                            const std::vector<OpKind>& kinds,
                            std::span<const double> alpha,
                            std::span<const double> beta,
                            std::span<const double> ff, const Dataset& ds,
                            std::span<const std::size_t> idx,
                            const EmbeddingView& emb, GenomeGrads* grads,
                            std::span<const double> scale = {});

// Genome response probabilities for a slice of instances.
Vec genome_predict(const GenomeLayout& lay, const std::vector<OpKind>& kinds,
                   std::span<const double> alpha, std::span<const double> beta,
                   std::span<const double> ff, const Dataset& ds,
                   std::span<const std::size_t> idx, const EmbeddingView& emb);

// One mutation sweep at a tau boundary: every pair with |beta| < lambda
// independently mutates with probability 1/sigma into one of the other
// three kinds (uniform). Only the kind vector changes here; the caller
// re-initializes feed-forward parameters and resets the pair's fitness.
std::vector<MutationEvent> mutate(std::vector<OpKind>& kinds, const Vec& beta,
                                  std::size_t m, const MutationConfig& cfg,
                                  long long step, Rng& rng);

struct GenomeEpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
};

struct GenomeResult {
  RelevanceFitness fitness;
  OperationAssignment assignment;  // possibly mutated, FF params updated
  std::vector<MutationEvent> events;
  std::vector<GenomeEpochRecord> history;
  std::vector<GeneMapFrame> frames;
  std::size_t epochs_run = 0;
  long long steps_run = 0;
};

// Stage II: joint descent on embeddings/FF (Adam) and relevance fitness
// (RDA), with the operation-mutation check every tau steps. The embedding
// table is trained in place.
GenomeResult run_genome_search(const Dataset& train, EmbeddingTable& table,
                               OperationAssignment assignment,
                               const GenomeConfig& cfg);

}  // namespace cell
