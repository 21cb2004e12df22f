#include "cell/genome.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cell/metrics.hpp"
#include "cell/threading.hpp"

namespace cell {

namespace {

constexpr std::size_t kChunk = 256;

void check_dataset(const Dataset& ds, const EmbeddingTable& table) {
  if (ds.num_fields() != table.num_fields())
    throw UserError("genome: dataset field count does not match embeddings");
  for (std::size_t f = 0; f < ds.num_fields(); ++f)
    if (ds.field_cardinalities[f] > table.cardinalities()[f])
      throw UserError("genome: dataset categories exceed embedding table in field " +
                      std::to_string(f));
}

}  // namespace

double genome_loss_and_grad(const GenomeLayout& lay,
                            const std::vector<OpKind>& kinds,
                            std::span<const double> alpha,
                            std::span<const double> beta,
                            std::span<const double> ff, const Dataset& ds,
                            std::span<const std::size_t> idx,
                            const EmbeddingView& emb, GenomeGrads* grads,
                            std::span<const double> scale) {
  const std::size_t n = idx.size();
  if (n == 0) throw UserError("genome: empty batch");
  const std::size_t m = lay.m;
  const std::size_t d = lay.dim;
  const bool want = grads != nullptr;
  const std::size_t num_chunks = (n + kChunk - 1) / kChunk;

  struct Partial {
    double loss = 0.0;
    GenomeGrads g;
    bool used = false;
  };
  std::vector<Partial> parts(num_chunks);

  threading::for_chunks(n, kChunk, [&](std::size_t c, std::size_t b,
                                       std::size_t e) {
    Partial& part = parts[c];
    part.used = true;
    if (want) part.g.init(lay);
    std::vector<OpTape> tapes(lay.pairs);
    Vec out(d), upstream(d), fgrad, usums(m), psums(lay.pairs);
    if (want) fgrad.assign(m * d, 0.0);
    std::vector<const double*> rows(m);

    for (std::size_t t = b; t < e; ++t) {
      const Instance& inst = ds.instances[idx[t]];
      for (std::size_t f = 0; f < m; ++f)
        rows[f] = emb.row(f, inst.fields[f]);

      double logit = 0.0;
      for (std::size_t f = 0; f < m; ++f) {
        double u = 0.0;
        for (std::size_t k = 0; k < d; ++k) u += rows[f][k];
        usums[f] = u;
        logit += alpha[f] * u;
      }
      std::size_t p = 0;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j, ++p) {
          op_forward(kinds[p], std::span<const double>(rows[i], d),
                     std::span<const double>(rows[j], d),
                     lay.ff_view(ff, p, kinds[p]), out,
                     want ? &tapes[p] : nullptr);
          double s = elem_sum(out);
          if (!scale.empty()) s /= scale[p];
          if (!std::isfinite(s))
            throw std::runtime_error("genome: non-finite interaction for pair (" +
                                     std::to_string(i) + "," +
                                     std::to_string(j) + ")");
          psums[p] = s;
          logit += beta[p] * s;
        }
      }
      part.loss += logloss_from_logit(logit, inst.label);

      if (!want) continue;
      const double dlogit =
          (sigmoid(logit) - static_cast<double>(inst.label)) /
          static_cast<double>(n);
      std::fill(fgrad.begin(), fgrad.end(), 0.0);
      for (std::size_t f = 0; f < m; ++f) {
        part.g.alpha[f] += dlogit * usums[f];
        const double a = dlogit * alpha[f];
        double* dst = fgrad.data() + f * d;
        for (std::size_t k = 0; k < d; ++k) dst[k] += a;
      }
      p = 0;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j, ++p) {
          part.g.beta[p] += dlogit * psums[p];
          double a = dlogit * beta[p];
          if (!scale.empty()) a /= scale[p];
          std::fill(upstream.begin(), upstream.end(), a);
          op_backward(tapes[p], upstream, lay.ff_view(ff, p, kinds[p]),
                      std::span<double>(fgrad.data() + i * d, d),
                      std::span<double>(fgrad.data() + j * d, d),
                      lay.ff_grad_view(part.g.ff, p, kinds[p]));
        }
      }
      for (std::size_t f = 0; f < m; ++f) {
        Vec& dst = part.g.emb.at(f, inst.fields[f], d);
        const double* src = fgrad.data() + f * d;
        for (std::size_t k = 0; k < d; ++k) dst[k] += src[k];
      }
    }
  });

  double loss = 0.0;
  if (want) grads->init(lay);
  for (Partial& part : parts) {
    if (!part.used) continue;
    loss += part.loss;
    if (want) {
      for (std::size_t i = 0; i < grads->alpha.size(); ++i)
        grads->alpha[i] += part.g.alpha[i];
      for (std::size_t i = 0; i < grads->beta.size(); ++i)
        grads->beta[i] += part.g.beta[i];
      for (std::size_t i = 0; i < grads->ff.size(); ++i)
        grads->ff[i] += part.g.ff[i];
      grads->emb.add(part.g.emb, d);
    }
  }
  return loss / static_cast<double>(n);
}

Vec genome_predict(const GenomeLayout& lay, const std::vector<OpKind>& kinds,
                   std::span<const double> alpha, std::span<const double> beta,
                   std::span<const double> ff, const Dataset& ds,
                   std::span<const std::size_t> idx,
                   const EmbeddingView& emb) {
  const std::size_t n = idx.size();
  const std::size_t m = lay.m;
  const std::size_t d = lay.dim;
  Vec preds(n);
  threading::for_chunks(n, kChunk, [&](std::size_t, std::size_t b,
                                       std::size_t e) {
    Vec out(d);
    std::vector<const double*> rows(m);
    for (std::size_t t = b; t < e; ++t) {
      const Instance& inst = ds.instances[idx[t]];
      for (std::size_t f = 0; f < m; ++f)
        rows[f] = emb.row(f, inst.fields[f]);
      double logit = 0.0;
      for (std::size_t f = 0; f < m; ++f) {
        double u = 0.0;
        for (std::size_t k = 0; k < d; ++k) u += rows[f][k];
        logit += alpha[f] * u;
      }
      std::size_t p = 0;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j, ++p) {
          op_forward(kinds[p], std::span<const double>(rows[i], d),
                     std::span<const double>(rows[j], d),
                     lay.ff_view(ff, p, kinds[p]), out, nullptr);
          logit += beta[p] * elem_sum(out);
        }
      preds[t] = sigmoid(logit);
    }
  });
  return preds;
}

namespace {

// Batch RMS of each pair's interaction scalar; used only when interaction
// normalization is enabled.
Vec interaction_scales(const GenomeLayout& lay, const std::vector<OpKind>& kinds,
                       std::span<const double> ff, const Dataset& ds,
                       std::span<const std::size_t> idx,
                       const EmbeddingView& emb) {
  const std::size_t n = idx.size();
  const std::size_t m = lay.m;
  const std::size_t d = lay.dim;
  const std::size_t num_chunks = (n + kChunk - 1) / kChunk;
  std::vector<Vec> partials(num_chunks);
  threading::for_chunks(n, kChunk, [&](std::size_t c, std::size_t b,
                                       std::size_t e) {
    Vec& acc = partials[c];
    acc.assign(lay.pairs, 0.0);
    Vec out(d);
    std::vector<const double*> rows(m);
    for (std::size_t t = b; t < e; ++t) {
      const Instance& inst = ds.instances[idx[t]];
      for (std::size_t f = 0; f < m; ++f)
        rows[f] = emb.row(f, inst.fields[f]);
      std::size_t p = 0;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j, ++p) {
          op_forward(kinds[p], std::span<const double>(rows[i], d),
                     std::span<const double>(rows[j], d),
                     lay.ff_view(ff, p, kinds[p]), out, nullptr);
          const double s = elem_sum(out);
          acc[p] += s * s;
        }
    }
  });
  Vec scale(lay.pairs, 0.0);
  for (const Vec& part : partials)
    if (!part.empty())
      for (std::size_t p = 0; p < lay.pairs; ++p) scale[p] += part[p];
  for (std::size_t p = 0; p < lay.pairs; ++p)
    scale[p] = std::sqrt(scale[p] / static_cast<double>(n)) + 1e-8;
  return scale;
}

}  // namespace

std::vector<MutationEvent> mutate(std::vector<OpKind>& kinds, const Vec& beta,
                                  std::size_t m, const MutationConfig& cfg,
                                  long long step, Rng& rng) {
  if (kinds.size() != beta.size() || kinds.size() != pair_count(m))
    throw UserError("mutate: kinds/beta size mismatch");
  std::vector<MutationEvent> events;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t p = 0; p < kinds.size(); ++p) {
    if (std::abs(beta[p]) >= cfg.lambda) continue;
    if (unit(rng) >= 1.0 / cfg.sigma) continue;
    const OpKind old_kind = kinds[p];
    std::uniform_int_distribution<int> pick(0, kNumOpKinds - 2);
    int r = pick(rng);
    if (r >= static_cast<int>(old_kind)) ++r;
    kinds[p] = static_cast<OpKind>(r);
    auto [pi, pj] = pair_from_rank(p, m);
    events.push_back({step, pi, pj, old_kind, kinds[p], beta[p]});
  }
  return events;
}

GenomeResult run_genome_search(const Dataset& train, EmbeddingTable& table,
                               OperationAssignment assignment,
                               const GenomeConfig& cfg) {
  if (train.size() == 0) throw UserError("genome search: empty dataset");
  check_dataset(train, table);
  const std::size_t m = table.num_fields();
  const std::size_t d = table.dim();
  const std::size_t P = pair_count(m);
  if (assignment.kinds.size() != P)
    throw UserError("genome search: assignment does not cover all pairs");
  assignment.ff.resize(P);
  if (cfg.mutation.lambda < 0 || cfg.mutation.sigma < 1 ||
      cfg.mutation.tau < 1)
    throw UserError("genome search: invalid mutation config");

  GenomeLayout lay{m, d, P};
  Rng master(cfg.seed);
  const std::uint64_t init_seed = master();
  Rng mut_rng(master());

  // Relevance fitness init; the RDA optimizer keeps these as its center.
  Vec init_rda(m + P);
  {
    Rng rng(init_seed);
    fill_uniform(init_rda, cfg.relevance_init_scale, rng);
  }
  Vec alpha(init_rda.begin(), init_rda.begin() + static_cast<std::ptrdiff_t>(m));
  Vec beta(init_rda.begin() + static_cast<std::ptrdiff_t>(m), init_rda.end());
  Rda rda(cfg.rda, init_rda);

  // Feed-forward bank: active kinds start from the stage-I parameters,
  // inactive slots stay zero until a mutation initializes them.
  FlatParams ff;
  for (std::size_t p = 0; p < P; ++p) {
    ff.add_block("pair" + std::to_string(p) + "/product_ff", lay.pff_size(),
                 true);
    ff.add_block("pair" + std::to_string(p) + "/concat_ff", lay.cff_size(),
                 true);
  }
  for (std::size_t p = 0; p < P; ++p) {
    if (!op_has_ff(assignment.kinds[p])) continue;
    const FFParams& src = assignment.ff[p];
    const std::size_t in_dim = ff_input_dim(assignment.kinds[p], d);
    if (src.weight.size() != in_dim * d || src.bias.size() != d)
      throw UserError("genome search: assignment FF shape mismatch");
    const std::size_t off = lay.ff_offset(p, assignment.kinds[p]);
    std::copy(src.weight.begin(), src.weight.end(),
              ff.values.begin() + static_cast<std::ptrdiff_t>(off));
    std::copy(src.bias.begin(), src.bias.end(),
              ff.values.begin() +
                  static_cast<std::ptrdiff_t>(off + in_dim * d));
  }

  Adam adam_ff(cfg.adam, ff.values.size());
  SparseAdam adam_emb(cfg.adam, table);

  GenomeResult res;
  res.frames.push_back(
      snapshot_genome(0, m, assignment.kinds, alpha, beta, false));

  const long long snap_every =
      cfg.snapshot_every > 0 ? cfg.snapshot_every : cfg.mutation.tau;

  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  long long step = 0;
  GenomeGrads grads;
  Vec rda_grads(m + P), rda_values(m + P);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const std::uint64_t es = master();
    auto batches = batch_indices(train.size(), cfg.batch_size, es);
    double loss_sum = 0.0;
    std::size_t count = 0;
    for (const auto& batch : batches) {
      Vec scale;
      if (cfg.normalize_interactions)
        scale = interaction_scales(lay, assignment.kinds, ff.values, train,
                                   batch, EmbeddingView(table));
      const double loss = genome_loss_and_grad(
          lay, assignment.kinds, alpha, beta, ff.values, train, batch,
          EmbeddingView(table), &grads, scale);
      if (!std::isfinite(loss))
        throw std::runtime_error("genome search: non-finite training loss");
      adam_ff.step(ff, grads.ff);
      adam_emb.step(table, grads.emb);
      std::copy(grads.alpha.begin(), grads.alpha.end(), rda_grads.begin());
      std::copy(grads.beta.begin(), grads.beta.end(),
                rda_grads.begin() + static_cast<std::ptrdiff_t>(m));
      rda.step(rda_grads, rda_values);
      std::copy(rda_values.begin(),
                rda_values.begin() + static_cast<std::ptrdiff_t>(m),
                alpha.begin());
      std::copy(rda_values.begin() + static_cast<std::ptrdiff_t>(m),
                rda_values.end(), beta.begin());
      ++step;
      loss_sum += loss * static_cast<double>(batch.size());
      count += batch.size();

      if (step % cfg.mutation.tau == 0) {
        auto events =
            mutate(assignment.kinds, beta, m, cfg.mutation, step, mut_rng);
        for (const MutationEvent& ev : events) {
          const std::size_t p = pair_rank(ev.i, ev.j, m);
          if (op_has_ff(ev.new_kind)) {
            const std::size_t off = lay.ff_offset(p, ev.new_kind);
            const std::size_t in_dim = ff_input_dim(ev.new_kind, d);
            std::span<double> fv(ff.values);
            init_ff_into(ev.new_kind, d, mut_rng, fv.subspan(off, in_dim * d),
                         fv.subspan(off + in_dim * d, d));
            adam_ff.reset_range(off, in_dim * d + d);
          }
          beta[p] = init_rda[m + p];
          rda.reset_coordinate(m + p);
        }
        res.events.insert(res.events.end(), events.begin(), events.end());
      }
      if (step % snap_every == 0)
        res.frames.push_back(
            snapshot_genome(step, m, assignment.kinds, alpha, beta, false));
    }

    const double epoch_loss = loss_sum / static_cast<double>(count);
    res.history.push_back({epoch, epoch_loss});
    res.epochs_run = epoch;
    if (epoch_loss < best_loss) {
      best_loss = epoch_loss;
      best_epoch = epoch;
    }
    if (epoch - best_epoch >= cfg.patience) break;
  }
  res.steps_run = step;

  // Final frame marks truncated interactions as discarded.
  GeneMapFrame final_frame =
      snapshot_genome(step, m, assignment.kinds, alpha, beta, true);
  if (!res.frames.empty() && res.frames.back().iteration == step)
    res.frames.back() = final_frame;
  else
    res.frames.push_back(final_frame);

  // Copy trained FF parameters back into the returned assignment.
  for (std::size_t p = 0; p < P; ++p) {
    assignment.ff[p] = FFParams{};
    if (!op_has_ff(assignment.kinds[p])) continue;
    FFView v = lay.ff_view(ff.values, p, assignment.kinds[p]);
    assignment.ff[p].weight.assign(v.weight.begin(), v.weight.end());
    assignment.ff[p].bias.assign(v.bias.begin(), v.bias.end());
  }
  res.assignment = std::move(assignment);
  res.fitness = RelevanceFitness{std::move(alpha), std::move(beta)};
  return res;
}

}  // namespace cell
