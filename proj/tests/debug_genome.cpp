// Scratch: stage I + II relevance recovery on the full setup (not in CI).
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <set>

#include "cell/pipeline.hpp"

using namespace cell;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::atoll(argv[1]) : 1;
  const std::size_t latent = argc > 2 ? std::atoi(argv[2]) : 4;
  const std::size_t g_epochs = argc > 3 ? std::atoi(argv[3]) : 30;
  const std::size_t g_batch = argc > 4 ? std::atoi(argv[4]) : 2048;
  const double c = argc > 5 ? std::atof(argv[5]) : 0.5;
  const double noise = argc > 6 ? std::atof(argv[6]) : 0.01;

  PipelineConfig cfg;
  cfg.seed = seed;
  cfg.embedding_dim = 8;
  SyntheticConfig s;
  s.m = 6;
  s.total_categories = 4481;
  s.latent_dim = latent;
  s.sum_pairs = {{0, 2}, {1, 3}};
  s.product_pairs = {{2, 4}, {4, 5}};
  s.noise_std = noise;
  s.n_instances = 120000;
  s.seed = seed * 1000 + 17;
  cfg.synthetic = s;
  cfg.dna_max_epochs = argc > 7 ? std::atoi(argv[7]) : 45;
  cfg.dna_patience = argc > 8 ? std::atoi(argv[8]) : 10;
  cfg.dna_batch_size = 1024;
  cfg.genome_max_epochs = g_epochs;
  cfg.genome_patience = g_epochs;
  cfg.genome_batch_size = g_batch;
  cfg.rda_c = c;
  cfg.relevance_init_scale = argc > 9 ? std::atof(argv[9]) : 0.01;

  auto t0 = std::chrono::steady_clock::now();
  ResolvedData data = resolve_datasets(cfg);
  EmbeddingTable table = make_embedding_table(cfg, data.train);
  DnaResult dna = run_dna_search(data.train, table, make_dna_config(cfg));
  {
    // Probe: correlation of each pair's interaction scalar with labels at
    // stage-II start (warm embeddings, stage-I assignment).
    GenomeLayout lay{6, cfg.embedding_dim, pair_count(6)};
    const std::size_t probe_n = 20000;
    std::vector<double> mean_s(15, 0), mean_sy(15, 0), mean_ss(15, 0);
    double mean_y = 0;
    Vec out(cfg.embedding_dim);
    for (std::size_t t = 0; t < probe_n; ++t) {
      const Instance& inst = data.train.instances[t];
      mean_y += inst.label;
      std::size_t p = 0;
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i + 1; j < 6; ++j, ++p) {
          FFView ff = dna.assignment.ff[p].weight.empty()
                          ? FFView{}
                          : FFView(dna.assignment.ff[p]);
          op_forward(dna.assignment.kinds[p],
                     std::span<const double>(table.row(i, inst.fields[i]),
                                             cfg.embedding_dim),
                     std::span<const double>(table.row(j, inst.fields[j]),
                                             cfg.embedding_dim),
                     ff, out, nullptr);
          double sv = elem_sum(out);
          mean_s[p] += sv;
          mean_sy[p] += sv * inst.label;
          mean_ss[p] += sv * sv;
        }
    }
    mean_y /= probe_n;
    std::printf("pair scalar stats at stage-II start:\n");
    for (std::size_t p = 0; p < 15; ++p) {
      mean_s[p] /= probe_n;
      mean_sy[p] /= probe_n;
      mean_ss[p] /= probe_n;
      double var = mean_ss[p] - mean_s[p] * mean_s[p];
      double cov = mean_sy[p] - mean_s[p] * mean_y;
      auto [i, j] = pair_from_rank(p, 6);
      std::printf("  (%zu,%zu) op=%d std=%.3f corr=%.3f\n", i, j,
                  static_cast<int>(dna.assignment.kinds[p]),
                  std::sqrt(std::max(var, 0.0)),
                  cov / std::max(std::sqrt(var) * 0.5, 1e-9));
    }
  }
  GenomeResult gen = run_genome_search(data.train, table, dna.assignment,
                                       make_genome_config(cfg));
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  std::set<std::size_t> planted = {pair_rank(0, 2, 6), pair_rank(1, 3, 6),
                                   pair_rank(2, 4, 6), pair_rank(4, 5, 6)};
  std::printf("%.0fs, genome %zu epochs %lld steps, %zu mutations\n", secs,
              gen.epochs_run, gen.steps_run, gen.events.size());
  std::printf("alpha:");
  for (double a : gen.fitness.alpha) std::printf(" %.3f", a);
  std::printf("\nbeta ranking:\n");
  std::vector<std::size_t> order(gen.fitness.beta.size());
  for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(gen.fitness.beta[a]) > std::abs(gen.fitness.beta[b]);
  });
  for (std::size_t r = 0; r < order.size(); ++r) {
    auto [i, j] = pair_from_rank(order[r], 6);
    std::printf("  %2zu. (%zu,%zu)%s op=%d beta=%+.4f\n", r + 1, i, j,
                planted.count(order[r]) ? "*" : " ",
                static_cast<int>(gen.assignment.kinds[order[r]]),
                gen.fitness.beta[order[r]]);
  }
  int hits = 0;
  for (std::size_t r = 0; r < 4; ++r)
    hits += static_cast<int>(planted.count(order[r]));
  std::printf("top4 planted: %d/4\n", hits);
  return 0;
}
