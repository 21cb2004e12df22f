#include <cmath>
#include <numeric>

#include "cell/genome.hpp"
#include "cell/threading.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace cell;

namespace {

std::vector<std::size_t> iota_idx(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

Dataset random_dataset(std::size_t n, std::vector<std::uint32_t> cards,
                       std::uint64_t seed) {
  Dataset ds;
  ds.field_cardinalities = std::move(cards);
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t t = 0; t < n; ++t) {
    Instance inst;
    inst.label = unit(rng) < 0.5 ? 0 : 1;
    for (std::uint32_t c : ds.field_cardinalities) {
      std::uniform_int_distribution<std::uint32_t> pick(0, c - 1);
      inst.fields.push_back(pick(rng));
    }
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

OperationAssignment uniform_assignment(std::size_t m, OpKind kind,
                                       std::size_t dim, std::uint64_t seed) {
  OperationAssignment a;
  const std::size_t P = pair_count(m);
  a.kinds.assign(P, kind);
  a.ff.resize(P);
  Rng rng(seed);
  for (std::size_t p = 0; p < P; ++p)
    if (op_has_ff(kind)) a.ff[p] = init_ff(kind, dim, rng);
  return a;
}

}  // namespace

TEST_SUITE_BEGIN("genome");

TEST_CASE("genome response closed forms") {
  const std::size_t m = 3, dim = 4;
  GenomeLayout lay{m, dim, pair_count(m)};
  EmbeddingTable table({4, 3, 5}, dim, 44, 0.3);
  Dataset ds = random_dataset(10, {4, 3, 5}, 9);
  auto idx = iota_idx(10);
  std::vector<OpKind> kinds(lay.pairs, OpKind::Product);
  Vec ff(lay.ff_total(), 0.0);

  // alpha = beta = 0: prediction 0.5 for every instance.
  Vec zero_a(m, 0.0), zero_b(lay.pairs, 0.0);
  Vec preds = genome_predict(lay, kinds, zero_a, zero_b, ff, ds, idx,
                             EmbeddingView(table));
  for (double p : preds) CHECK(p == 0.5);

  // Negating alpha and beta flips the response.
  Rng rng(6);
  Vec a(m), b(lay.pairs);
  fill_uniform(a, 0.8, rng);
  fill_uniform(b, 0.8, rng);
  Vec na(m), nb(lay.pairs);
  for (std::size_t i = 0; i < m; ++i) na[i] = -a[i];
  for (std::size_t p = 0; p < lay.pairs; ++p) nb[p] = -b[p];
  Vec up = genome_predict(lay, kinds, a, b, ff, ds, idx, EmbeddingView(table));
  Vec dn = genome_predict(lay, kinds, na, nb, ff, ds, idx,
                          EmbeddingView(table));
  for (std::size_t t = 0; t < up.size(); ++t)
    CHECK(dn[t] == doctest::Approx(1.0 - up[t]).epsilon(1e-12));

  // Zeroing one beta removes exactly that pair's contribution.
  Vec b2 = b;
  b2[1] = 0.0;
  Vec without = genome_predict(lay, kinds, a, b2, ff, ds, idx,
                               EmbeddingView(table));
  for (std::size_t t = 0; t < idx.size(); ++t) {
    const Instance& inst = ds.instances[t];
    auto [i, j] = pair_from_rank(1, m);
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k)
      s += table.row(i, inst.fields[i])[k] * table.row(j, inst.fields[j])[k];
    const double logit_up = std::log(up[t] / (1 - up[t]));
    const double logit_wo = std::log(without[t] / (1 - without[t]));
    CHECK(logit_up - logit_wo == doctest::Approx(b[1] * s).epsilon(1e-9));
  }
}

TEST_CASE("stage-II gradients match finite differences") {
  const std::size_t m = 3, dim = 4, batch = 8;
  Dataset ds = random_dataset(batch, {5, 4, 6}, 23);
  auto idx = iota_idx(batch);
  GenomeLayout lay{m, dim, pair_count(m)};

  int accepted = 0;
  oracles::GradCheck check;
  for (std::uint64_t seed = 1; accepted < 3 && seed < 40; ++seed) {
    EmbeddingTable table({5, 4, 6}, dim, seed + 60, 0.5);
    Rng rng(seed);
    std::vector<OpKind> kinds = {OpKind::Sum, OpKind::ProductFF,
                                 OpKind::ConcatFF};
    Vec ff(lay.ff_total(), 0.0);
    std::span<double> fv(ff);
    for (std::size_t p = 0; p < lay.pairs; ++p)
      for (OpKind k : {OpKind::ProductFF, OpKind::ConcatFF}) {
        const std::size_t in_dim = ff_input_dim(k, dim);
        init_ff_into(k, dim, rng,
                     fv.subspan(lay.ff_offset(p, k), in_dim * dim),
                     fv.subspan(lay.ff_offset(p, k) + in_dim * dim, dim));
      }
    Vec alpha(m), beta(lay.pairs);
    fill_uniform(alpha, 0.5, rng);
    fill_uniform(beta, 0.5, rng);

    bool ok = true;
    Vec out;
    OpTape tape;
    for (std::size_t t = 0; t < batch && ok; ++t) {
      const Instance& inst = ds.instances[t];
      for (std::size_t p = 0; p < lay.pairs && ok; ++p) {
        if (!op_has_ff(kinds[p])) continue;
        auto [i, j] = pair_from_rank(p, m);
        op_forward(kinds[p],
                   std::span<const double>(table.row(i, inst.fields[i]), dim),
                   std::span<const double>(table.row(j, inst.fields[j]), dim),
                   lay.ff_view(ff, p, kinds[p]), out, &tape);
        for (double z : tape.pre_act)
          if (std::abs(z) < 1e-3) ok = false;
      }
    }
    if (!ok) continue;
    ++accepted;

    GenomeGrads grads;
    genome_loss_and_grad(lay, kinds, alpha, beta, ff, ds, idx,
                         EmbeddingView(table), &grads);
    auto loss = [&]() {
      return genome_loss_and_grad(lay, kinds, alpha, beta, ff, ds, idx,
                                  EmbeddingView(table), nullptr);
    };
    const double h = 1e-5;
    check.check_span(loss, alpha.data(), grads.alpha.data(), m, h, "alpha");
    check.check_span(loss, beta.data(), grads.beta.data(), lay.pairs, h,
                     "beta");
    check.check_span(loss, ff.data(), grads.ff.data(), ff.size(), h, "ff");
    for (std::size_t f = 0; f < m; ++f)
      for (auto& [cat, g] : grads.emb.rows[f])
        check.check_span(loss,
                         table.field_data(f).data() + std::size_t(cat) * dim,
                         g.data(), dim, h, "emb");
  }
  REQUIRE(accepted == 3);
  INFO("worst: ", check.worst_coord, " analytic ", check.worst_analytic,
       " numeric ", check.worst_numeric);
  CHECK(check.max_rel_err < 1e-4);
}

TEST_CASE("mutate support and guards") {
  MutationConfig cfg{0.1, 1.0, 100};  // sigma = 1: always fires when eligible
  Rng rng(3);
  for (int old = 0; old < kNumOpKinds; ++old) {
    std::vector<OpKind> kinds(3, static_cast<OpKind>(old));
    Vec beta{0.05, 0.5, 0.0};  // eligible, guarded, eligible (|0| < lambda)
    auto events = mutate(kinds, beta, 3, cfg, 7, rng);
    REQUIRE(events.size() == 2);
    CHECK(kinds[1] == static_cast<OpKind>(old));  // guarded pair unchanged
    for (const auto& ev : events) {
      CHECK(ev.new_kind != ev.old_kind);
      CHECK(ev.old_kind == static_cast<OpKind>(old));
      CHECK(std::abs(ev.beta) < cfg.lambda);
      CHECK(ev.step == 7);
    }
    CHECK(events[1].beta == 0.0);  // truncated pairs stay mutation-eligible
  }

  // lambda = 0 never mutates.
  MutationConfig zero{0.0, 1.0, 100};
  std::vector<OpKind> kinds(3, OpKind::Sum);
  Vec beta{0.0, 0.01, -0.2};
  CHECK(mutate(kinds, beta, 3, zero, 1, rng).empty());
}

TEST_CASE("mutation rate matches the Bernoulli oracle") {
  MutationConfig cfg{1.0, 5.0, 100};  // p = 0.2, every pair eligible
  Rng rng(99);
  const int checks = 100000;
  int fired = 0;
  for (int t = 0; t < checks; ++t) {
    std::vector<OpKind> kinds(1, OpKind::Product);
    Vec beta{0.0};
    fired += static_cast<int>(!mutate(kinds, beta, 2, cfg, t, rng).empty());
  }
  const double p = 1.0 / cfg.sigma;
  const double sd = std::sqrt(p * (1 - p) * checks);
  CHECK(std::abs(fired - p * checks) <= 3.0 * sd);
}

TEST_CASE("run_genome_search separates planted product pairs") {
  SyntheticConfig scfg;
  scfg.m = 4;
  scfg.total_categories = 120;
  scfg.latent_dim = 3;
  scfg.product_pairs = {{0, 1}, {2, 3}};
  scfg.noise_std = 0.0;
  scfg.n_instances = 24000;
  scfg.seed = 17;
  auto [ds, gt] = generate_synthetic(scfg);
  (void)gt;

  EmbeddingTable table(ds.field_cardinalities, 6, 31);
  OperationAssignment assignment =
      uniform_assignment(4, OpKind::Product, 6, 32);

  GenomeConfig cfg;
  cfg.adam.lr = 1e-3;
  cfg.adam.weight_decay = 1e-3;
  cfg.batch_size = 512;
  cfg.max_epochs = 40;
  cfg.patience = 5;
  cfg.seed = 33;
  GenomeResult res = run_genome_search(ds, table, assignment, cfg);

  const std::size_t p01 = pair_rank(0, 1, 4);
  const std::size_t p23 = pair_rank(2, 3, 4);
  double min_planted = std::min(std::abs(res.fitness.beta[p01]),
                                std::abs(res.fitness.beta[p23]));
  double max_other = 0.0;
  for (std::size_t p = 0; p < res.fitness.beta.size(); ++p)
    if (p != p01 && p != p23)
      max_other = std::max(max_other, std::abs(res.fitness.beta[p]));
  INFO("min planted ", min_planted, " max other ", max_other);
  CHECK(min_planted > max_other);

  // Frames: strictly increasing iterations, final frame marks discards.
  for (std::size_t k = 1; k < res.frames.size(); ++k)
    CHECK(res.frames[k].iteration > res.frames[k - 1].iteration);
  const GeneMapFrame& last = res.frames.back();
  for (std::size_t p = 0; p < res.fitness.beta.size(); ++p) {
    auto [i, j] = pair_from_rank(p, 4);
    if (res.fitness.beta[p] == 0.0)
      CHECK(last.code(i, j) == kDiscardedCode);
    else
      CHECK(last.code(i, j) == static_cast<int>(res.assignment.kinds[p]));
  }
}

TEST_CASE("run_genome_search determinism and mutation bookkeeping") {
  SyntheticConfig scfg;
  scfg.m = 3;
  scfg.total_categories = 36;
  scfg.latent_dim = 2;
  scfg.sum_pairs = {{0, 1}};
  scfg.n_instances = 2000;
  scfg.seed = 71;
  auto [ds, gt] = generate_synthetic(scfg);
  (void)gt;

  GenomeConfig cfg;
  cfg.batch_size = 100;
  cfg.max_epochs = 6;
  cfg.patience = 6;
  cfg.seed = 5;
  cfg.mutation = MutationConfig{0.5, 2.0, 5};  // frequent forced-ish checks

  auto run_once = [&](int threads) {
    threading::set_max_threads(threads);
    EmbeddingTable table(ds.field_cardinalities, 4, 3);
    OperationAssignment assignment = uniform_assignment(3, OpKind::Sum, 4, 4);
    return run_genome_search(ds, table, assignment, cfg);
  };
  GenomeResult a = run_once(2);
  GenomeResult b = run_once(1);
  threading::set_max_threads(2);

  CHECK(a.fitness.alpha == b.fitness.alpha);
  CHECK(a.fitness.beta == b.fitness.beta);
  CHECK(a.assignment.kinds == b.assignment.kinds);
  REQUIRE(a.events.size() == b.events.size());
  CHECK_FALSE(a.events.empty());
  for (std::size_t e = 0; e < a.events.size(); ++e) {
    CHECK(a.events[e].step == b.events[e].step);
    CHECK(a.events[e].i == b.events[e].i);
    CHECK(a.events[e].new_kind == b.events[e].new_kind);
    CHECK(a.events[e].beta == b.events[e].beta);
    // Event invariants.
    CHECK(a.events[e].new_kind != a.events[e].old_kind);
    CHECK(std::abs(a.events[e].beta) < cfg.mutation.lambda);
    CHECK(a.events[e].step % cfg.mutation.tau == 0);
  }

  // lambda = 0 never mutates.
  cfg.mutation = MutationConfig{0.0, 5.0, 5};
  EmbeddingTable table(ds.field_cardinalities, 4, 3);
  OperationAssignment assignment = uniform_assignment(3, OpKind::Sum, 4, 4);
  GenomeResult none = run_genome_search(ds, table, assignment, cfg);
  CHECK(none.events.empty());
}

TEST_CASE("interaction normalization flag keeps the search running") {
  SyntheticConfig scfg;
  scfg.m = 3;
  scfg.total_categories = 30;
  scfg.latent_dim = 2;
  scfg.product_pairs = {{0, 1}};
  scfg.n_instances = 1000;
  scfg.seed = 13;
  auto [ds, gt] = generate_synthetic(scfg);
  (void)gt;
  GenomeConfig cfg;
  cfg.batch_size = 128;
  cfg.max_epochs = 3;
  cfg.patience = 3;
  cfg.seed = 2;
  cfg.normalize_interactions = true;
  EmbeddingTable table(ds.field_cardinalities, 4, 1);
  OperationAssignment assignment = uniform_assignment(3, OpKind::Product, 4, 9);
  GenomeResult res = run_genome_search(ds, table, assignment, cfg);
  CHECK(res.history.size() == 3);
  for (const auto& rec : res.history) CHECK(std::isfinite(rec.train_loss));
}

TEST_SUITE_END();
