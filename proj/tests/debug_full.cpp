// Scratch: stage-I operation recovery on the full m=6 setup (not in CI).
#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "cell/pipeline.hpp"

using namespace cell;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::atoll(argv[1]) : 1;
  const bool swapped = argc > 2 && argv[2][0] == 's';
  const double init_scale = argc > 3 ? std::atof(argv[3]) : 0.01;
  const std::size_t epochs = argc > 4 ? std::atoi(argv[4]) : 15;
  const std::size_t batch = argc > 5 ? std::atoi(argv[5]) : 2048;
  const std::size_t n_inst = argc > 6 ? std::atoi(argv[6]) : 120000;

  PipelineConfig cfg;
  cfg.seed = seed;
  cfg.embedding_dim = 8;
  SyntheticConfig s;
  s.m = 6;
  s.total_categories = 4481;
  s.latent_dim = argc > 7 ? std::atoi(argv[7]) : 4;
  if (!swapped) {
    s.sum_pairs = {{0, 2}, {1, 3}};
    s.product_pairs = {{2, 4}, {4, 5}};
  } else {
    s.sum_pairs = {{2, 4}, {4, 5}};
    s.product_pairs = {{0, 2}, {1, 3}};
  }
  s.noise_std = 0.01;
  s.n_instances = n_inst;
  s.seed = seed * 1000 + 17;
  cfg.synthetic = s;
  cfg.dna_max_epochs = epochs;
  cfg.dna_patience = argc > 8 ? std::atoi(argv[8]) : epochs;
  cfg.dna_batch_size = batch;

  auto t0 = std::chrono::steady_clock::now();
  ResolvedData data = resolve_datasets(cfg);
  EmbeddingTable table(data.train.field_cardinalities, cfg.embedding_dim,
                       derive_seed(cfg.seed, 1), init_scale);
  DnaResult res = run_dna_search(data.train, table, make_dna_config(cfg));
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0).count();

  std::printf("epochs run %zu, %.0fs, final val %.4f\n", res.epochs_run, secs,
              res.history.back().val_loss);
  for (std::size_t e = 0; e < res.history.size(); ++e) {
    int hits = 0;
    std::string ops;
    for (const PlantedPair& pp : data.ground_truth->pairs) {
      const std::size_t p = pair_rank(pp.i, pp.j, 6);
      const double* th = res.history[e].op_fitness.data() + 4 * p;
      int best = 0;
      for (int k = 1; k < 4; ++k)
        if (th[k] > th[best]) best = k;
      hits += static_cast<int>(best == pp.op_code);
      ops += std::to_string(best);
    }
    std::printf("  epoch %2zu val %.4f recov %d/4 ops=%s\n",
                res.history[e].epoch, res.history[e].val_loss, hits,
                ops.c_str());
  }
  for (const PlantedPair& pp : data.ground_truth->pairs) {
    const std::size_t p = pair_rank(pp.i, pp.j, 6);
    const double* th = res.op_fitness.data() + 4 * p;
    std::printf("planted (%zu,%zu) gen=%d got=%d  theta %7.3f %7.3f %7.3f %7.3f\n",
                pp.i, pp.j, pp.op_code,
                static_cast<int>(res.assignment.kinds[p]), th[0], th[1], th[2],
                th[3]);
  }
  std::printf("all pairs:");
  for (std::size_t p = 0; p < pair_count(6); ++p)
    std::printf(" %d", static_cast<int>(res.assignment.kinds[p]));
  std::printf("\n");
  return 0;
}
