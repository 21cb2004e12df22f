// Scratch diagnostics for the operation-fitness dynamics (not built by CI).
#include <cstdio>

#include "cell/dna.hpp"
#include "cell/metrics.hpp"

using namespace cell;

int main(int argc, char** argv) {
  bool product_task = argc > 1 && argv[1][0] == 'p';
  std::size_t epochs = argc > 2 ? std::atoi(argv[2]) : 12;
  std::size_t dim = argc > 3 ? std::atoi(argv[3]) : 6;
  SyntheticConfig scfg;
  scfg.m = 2;
  scfg.total_categories = 40;
  scfg.latent_dim = 3;
  if (product_task)
    scfg.product_pairs = {{0, 1}};
  else
    scfg.sum_pairs = {{0, 1}};
  scfg.noise_std = 0.0;
  scfg.n_instances = 6000;
  scfg.seed = 200;
  auto [ds, gt] = generate_synthetic(scfg);
  (void)gt;

  DnaConfig cfg;
  cfg.max_epochs = epochs;
  cfg.patience = epochs;
  cfg.batch_size = 256;
  cfg.seed = 201;
  EmbeddingTable table(ds.field_cardinalities, dim, 202);
  DnaResult res = run_dna_search(ds, table, cfg);
  for (const auto& rec : res.history) {
    std::printf("epoch %2zu train %.4f val %.4f theta", rec.epoch,
                rec.train_loss, rec.val_loss);
    for (double t : rec.op_fitness) std::printf(" %7.3f", t);
    std::printf("\n");
  }
  return 0;
}
