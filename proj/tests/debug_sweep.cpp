// Scratch sweep over stage-I settings on A/B tasks (not built by CI).
#include <cstdio>
#include <cstdlib>

#include "cell/dna.hpp"

using namespace cell;

int main() {
  struct Setting {
    double init_scale;
    std::size_t batch;
    std::size_t epochs;
    std::size_t dim;
    bool second_order;
  };
  Setting settings[] = {
      {0.20, 64, 30, 8, false},  {0.35, 64, 30, 8, false},
      {0.50, 64, 30, 8, false},  {0.35, 256, 30, 8, false},
      {0.35, 64, 60, 8, false},  {0.35, 64, 30, 8, true},
      {0.25, 128, 40, 8, false}, {0.50, 256, 40, 8, false},
  };
  for (const auto& st : settings) {
    std::printf("init=%.2f batch=%zu epochs=%zu dim=%zu so=%d : ",
                st.init_scale, st.batch, st.epochs, st.dim,
                (int)st.second_order);
    for (int task = 0; task < 2; ++task) {  // 0 = sum task, 1 = product task
      SyntheticConfig scfg;
      scfg.m = 2;
      scfg.total_categories = 40;
      scfg.latent_dim = 3;
      if (task == 1)
        scfg.product_pairs = {{0, 1}};
      else
        scfg.sum_pairs = {{0, 1}};
      scfg.noise_std = 0.0;
      scfg.n_instances = 6000;
      scfg.seed = 200 + task;
      auto [ds, gt] = generate_synthetic(scfg);
      (void)gt;
      DnaConfig cfg;
      cfg.max_epochs = st.epochs;
      cfg.patience = st.epochs;
      cfg.batch_size = st.batch;
      cfg.seed = 201;
      cfg.second_order = st.second_order;
      EmbeddingTable table(ds.field_cardinalities, st.dim, 202,
                           st.init_scale);
      DnaResult res = run_dna_search(ds, table, cfg);
      const Vec& th = res.op_fitness;
      int best = 0;
      for (int k = 1; k < 4; ++k)
        if (th[k] > th[best]) best = k;
      std::printf("%s[best=%d th=%.2f,%.2f,%.2f,%.2f vl=%.3f]  ",
                  task == 0 ? "SUM" : "PROD", best, th[0], th[1], th[2],
                  th[3], res.history.back().val_loss);
    }
    std::printf("\n");
    std::fflush(stdout);
  }
  return 0;
}
