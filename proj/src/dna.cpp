#include "cell/dna.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cell/metrics.hpp"
#include "cell/threading.hpp"

namespace cell {

namespace {

constexpr std::size_t kChunk = 256;

struct PairScratch {
  std::array<OpTape, kNumOpKinds> tapes;
  std::array<double, kNumOpKinds> s{};      // per-op elem_sum
  std::array<double, kNumOpKinds> coeff{};  // softmax mixing
  double mixed = 0.0;
};

}  // namespace

double dna_loss_and_grad(const DnaLayout& lay,
                         std::span<const double> fitness,
                         std::span<const double> weights, const Dataset& ds,
                         std::span<const std::size_t> idx,
                         const EmbeddingView& emb, DnaGrads* grads,
                         bool tape_backward, double* softmax_dev) {
  const std::size_t n = idx.size();
  if (n == 0) throw UserError("dna: empty batch");
  const std::size_t m = lay.m;
  const std::size_t d = lay.dim;
  const std::size_t num_chunks = (n + kChunk - 1) / kChunk;
  const bool want = grads != nullptr;
  const bool tapes_needed = want && tape_backward;

  struct Partial {
    double loss = 0.0;
    double sdev = 0.0;
    DnaGrads g;
    bool used = false;
  };
  std::vector<Partial> parts(num_chunks);

  threading::for_chunks(n, kChunk, [&](std::size_t c, std::size_t b,
                                       std::size_t e) {
    Partial& part = parts[c];
    part.used = true;
    if (want) part.g.init(lay);
    std::vector<PairScratch> ps(lay.pairs);
    Vec out(d), upstream(d), fgrad;
    if (tapes_needed) fgrad.assign(m * d, 0.0);
    std::vector<const double*> rows(m);

    for (std::size_t t = b; t < e; ++t) {
      const Instance& inst = ds.instances[idx[t]];
      for (std::size_t f = 0; f < m; ++f)
        rows[f] = emb.row(f, inst.fields[f]);

      double logit = 0.0;
      std::size_t p = 0;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j, ++p) {
          PairScratch& sc = ps[p];
          const double* th = fitness.data() + lay.theta_offset(p);
          double mx = th[0];
          for (int k = 1; k < kNumOpKinds; ++k) mx = std::max(mx, th[k]);
          double z = 0.0;
          for (int k = 0; k < kNumOpKinds; ++k) {
            sc.coeff[k] = std::exp(th[k] - mx);
            z += sc.coeff[k];
          }
          double csum = 0.0;
          for (int k = 0; k < kNumOpKinds; ++k) {
            sc.coeff[k] /= z;
            csum += sc.coeff[k];
          }
          part.sdev = std::max(part.sdev, std::abs(csum - 1.0));

          double mixed = 0.0;
          for (int k = 0; k < kNumOpKinds; ++k) {
            const OpKind kind = static_cast<OpKind>(k);
            op_forward(kind, std::span<const double>(rows[i], d),
                       std::span<const double>(rows[j], d),
                       lay.ff_view(weights, p, kind), out,
                       tapes_needed ? &sc.tapes[k] : nullptr);
            sc.s[k] = elem_sum(out);
            mixed += sc.coeff[k] * sc.s[k];
          }
          if (!std::isfinite(mixed))
            throw std::runtime_error(
                "dna: non-finite interaction for pair (" + std::to_string(i) +
                "," + std::to_string(j) + ")");
          sc.mixed = mixed;
          logit += weights[lay.w_offset(p)] * mixed;
        }
      }
      part.loss += logloss_from_logit(logit, inst.label);

      if (!want) continue;
      const double dlogit =
          (sigmoid(logit) - static_cast<double>(inst.label)) /
          static_cast<double>(n);
      if (tapes_needed) std::fill(fgrad.begin(), fgrad.end(), 0.0);
      p = 0;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j, ++p) {
          PairScratch& sc = ps[p];
          const double wp = weights[lay.w_offset(p)];
          part.g.weights[lay.w_offset(p)] += dlogit * sc.mixed;
          double* gth = part.g.fitness.data() + lay.theta_offset(p);
          const double dw = dlogit * wp;
          for (int k = 0; k < kNumOpKinds; ++k)
            gth[k] += dw * sc.coeff[k] * (sc.s[k] - sc.mixed);
          if (!tapes_needed) continue;
          for (int k = 0; k < kNumOpKinds; ++k) {
            const OpKind kind = static_cast<OpKind>(k);
            const double a = dw * sc.coeff[k];
            std::fill(upstream.begin(), upstream.end(), a);
            op_backward(sc.tapes[k], upstream, lay.ff_view(weights, p, kind),
                        std::span<double>(fgrad.data() + i * d, d),
                        std::span<double>(fgrad.data() + j * d, d),
                        lay.ff_grad_view(part.g.weights, p, kind));
          }
        }
      }
      if (tapes_needed) {
        for (std::size_t f = 0; f < m; ++f) {
          Vec& dst = part.g.emb.at(f, inst.fields[f], d);
          const double* src = fgrad.data() + f * d;
          for (std::size_t k = 0; k < d; ++k) dst[k] += src[k];
        }
      }
    }
  });

  double loss = 0.0;
  double sdev = 0.0;
  if (want) grads->init(lay);
  for (Partial& part : parts) {
    if (!part.used) continue;
    loss += part.loss;
    sdev = std::max(sdev, part.sdev);
    if (want) {
      for (std::size_t i = 0; i < grads->fitness.size(); ++i)
        grads->fitness[i] += part.g.fitness[i];
      for (std::size_t i = 0; i < grads->weights.size(); ++i)
        grads->weights[i] += part.g.weights[i];
      grads->emb.add(part.g.emb, d);
    }
  }
  if (softmax_dev) *softmax_dev = std::max(*softmax_dev, sdev);
  return loss / static_cast<double>(n);
}

DnaModel::DnaModel(std::size_t m, std::size_t dim, std::uint64_t seed) {
  if (m < 2) throw UserError("dna: need at least 2 fields");
  if (dim < 1) throw UserError("dna: embedding dim must be >= 1");
  lay_.m = m;
  lay_.dim = dim;
  lay_.pairs = pair_count(m);

  fitness_.add_block("op_fitness", 4 * lay_.pairs, /*decay=*/false);
  weights_.add_block("pair_weights", lay_.pairs, /*decay=*/true);
  for (std::size_t p = 0; p < lay_.pairs; ++p) {
    weights_.add_block("pair" + std::to_string(p) + "/product_ff",
                       lay_.pff_size(), true);
    weights_.add_block("pair" + std::to_string(p) + "/concat_ff",
                       lay_.cff_size(), true);
  }

  Rng rng(seed);
  fill_uniform(fitness_.values, 0.01, rng);
  {
    std::uniform_real_distribution<double> dist(-0.01, 0.01);
    for (std::size_t p = 0; p < lay_.pairs; ++p)
      weights_.values[lay_.w_offset(p)] = dist(rng);
  }
  std::span<double> wv(weights_.values);
  for (std::size_t p = 0; p < lay_.pairs; ++p) {
    const std::size_t po = lay_.ff_offset(p, OpKind::ProductFF);
    init_ff_into(OpKind::ProductFF, dim, rng, wv.subspan(po, dim * dim),
                 wv.subspan(po + dim * dim, dim));
    const std::size_t co = lay_.ff_offset(p, OpKind::ConcatFF);
    init_ff_into(OpKind::ConcatFF, dim, rng, wv.subspan(co, 2 * dim * dim),
                 wv.subspan(co + 2 * dim * dim, dim));
  }
}

Vec DnaModel::predict(const Dataset& ds, std::span<const std::size_t> idx,
                      const EmbeddingView& emb) const {
  const std::size_t n = idx.size();
  Vec preds(n);
  const std::size_t d = lay_.dim;
  const std::size_t m = lay_.m;
  threading::for_chunks(n, kChunk, [&](std::size_t, std::size_t b,
                                       std::size_t e) {
    Vec out(d);
    std::vector<const double*> rows(m);
    for (std::size_t t = b; t < e; ++t) {
      const Instance& inst = ds.instances[idx[t]];
      for (std::size_t f = 0; f < m; ++f)
        rows[f] = emb.row(f, inst.fields[f]);
      double logit = 0.0;
      std::size_t p = 0;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j, ++p) {
          const double* th = fitness_.values.data() + lay_.theta_offset(p);
          double mx = th[0];
          for (int k = 1; k < kNumOpKinds; ++k) mx = std::max(mx, th[k]);
          double z = 0.0;
          double coeff[kNumOpKinds];
          for (int k = 0; k < kNumOpKinds; ++k) {
            coeff[k] = std::exp(th[k] - mx);
            z += coeff[k];
          }
          double mixed = 0.0;
          for (int k = 0; k < kNumOpKinds; ++k) {
            const OpKind kind = static_cast<OpKind>(k);
            op_forward(kind, std::span<const double>(rows[i], d),
                       std::span<const double>(rows[j], d),
                       lay_.ff_view(weights_.values, p, kind), out, nullptr);
            mixed += coeff[k] / z * elem_sum(out);
          }
          logit += weights_.values[lay_.w_offset(p)] * mixed;
        }
      preds[t] = sigmoid(logit);
    }
  });
  return preds;
}

void softmax4(const double* theta, double* coeff) {
  double mx = theta[0];
  for (int k = 1; k < kNumOpKinds; ++k) mx = std::max(mx, theta[k]);
  double z = 0.0;
  for (int k = 0; k < kNumOpKinds; ++k) {
    coeff[k] = std::exp(theta[k] - mx);
    z += coeff[k];
  }
  for (int k = 0; k < kNumOpKinds; ++k) coeff[k] /= z;
}

Vec mixed_interaction(std::span<const double> theta_pair,
                      const std::array<Vec, 4>& op_outputs) {
  if (theta_pair.size() != 4)
    throw UserError("mixed_interaction: need 4 fitness values");
  double coeff[4];
  softmax4(theta_pair.data(), coeff);
  const std::size_t d = op_outputs[0].size();
  Vec out(d, 0.0);
  for (int k = 0; k < kNumOpKinds; ++k) {
    if (op_outputs[k].size() != d)
      throw UserError("mixed_interaction: candidate size mismatch");
    for (std::size_t c = 0; c < d; ++c) out[c] += coeff[k] * op_outputs[k][c];
  }
  return out;
}

std::vector<OpKind> discretize(const Vec& op_fitness, std::size_t pairs) {
  if (op_fitness.size() != 4 * pairs)
    throw UserError("discretize: fitness size mismatch");
  if (!all_finite(op_fitness))
    throw UserError("discretize: non-finite fitness");
  std::vector<OpKind> kinds(pairs);
  for (std::size_t p = 0; p < pairs; ++p) {
    const double* th = op_fitness.data() + 4 * p;
    int best = 0;
    for (int k = 1; k < kNumOpKinds; ++k)
      if (th[k] > th[best]) best = k;
    kinds[p] = static_cast<OpKind>(best);
  }
  return kinds;
}

OperationAssignment DnaModel::make_assignment() const {
  OperationAssignment a;
  a.kinds = discretize(fitness_.values, lay_.pairs);
  a.ff.resize(lay_.pairs);
  for (std::size_t p = 0; p < lay_.pairs; ++p) {
    if (!op_has_ff(a.kinds[p])) continue;
    FFView v = lay_.ff_view(weights_.values, p, a.kinds[p]);
    a.ff[p].weight.assign(v.weight.begin(), v.weight.end());
    a.ff[p].bias.assign(v.bias.begin(), v.bias.end());
  }
  return a;
}

namespace {

// Mean Logloss over a full dataset, streamed in large batches.
double full_logloss(const DnaModel& model, const Dataset& ds,
                    const EmbeddingTable& table) {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  Vec preds = model.predict(ds, all, EmbeddingView(table));
  std::vector<int> labels(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) labels[i] = ds.instances[i].label;
  return logloss(preds, labels);
}

}  // namespace

// Second-order fitness gradient with central-difference Hessian-vector
// products around the current weights/embeddings.
Vec dna_second_order_fitness_grad(const DnaModel& model, EmbeddingTable& table,
                                  const Dataset& dtrain,
                                  std::span<const std::size_t> tb,
                                  const Dataset& dval,
                                  std::span<const std::size_t> vb,
                                  const DnaConfig& cfg, double* sdev) {
  const DnaLayout& lay = model.layout();
  const double xi = cfg.learning_rate;
  const std::size_t d = lay.dim;

  DnaGrads gt;
  dna_loss_and_grad(lay, model.fitness().values, model.weights().values,
                    dtrain, tb, EmbeddingView(table), &gt, true, sdev);

  // One virtual SGD step on pair weights and embeddings.
  Vec w_unrolled = model.weights().values;
  for (std::size_t p = 0; p < lay.pairs; ++p)
    w_unrolled[lay.w_offset(p)] -= xi * gt.weights[lay.w_offset(p)];
  EmbeddingGrad emb_unrolled;
  emb_unrolled.init(lay.m);
  for (std::size_t f = 0; f < lay.m; ++f)
    for (const auto& [cat, g] : gt.emb.rows[f]) {
      Vec& r = emb_unrolled.at(f, cat, d);
      const double* base = table.row(f, cat);
      for (std::size_t k = 0; k < d; ++k) r[k] = base[k] - xi * g[k];
    }

  DnaGrads gv;
  dna_loss_and_grad(lay, model.fitness().values, w_unrolled, dval, vb,
                    EmbeddingView(table, emb_unrolled), &gv, true, sdev);
  Vec result = gv.fitness;

  double norm2 = 0.0;
  for (std::size_t p = 0; p < lay.pairs; ++p) {
    const double v = gv.weights[lay.w_offset(p)];
    norm2 += v * v;
  }
  for (const auto& field_rows : gv.emb.rows)
    for (const auto& [cat, g] : field_rows)
      for (double x : g) norm2 += x * x;
  if (norm2 < 1e-24) return result;
  const double eps = cfg.hvp_epsilon / std::sqrt(norm2);

  auto perturbed_eval = [&](double sign, Vec& out_fitness_grad) {
    Vec w_pert = model.weights().values;
    for (std::size_t p = 0; p < lay.pairs; ++p)
      w_pert[lay.w_offset(p)] += sign * eps * gv.weights[lay.w_offset(p)];
    EmbeddingGrad emb_pert;
    emb_pert.init(lay.m);
    for (std::size_t f = 0; f < lay.m; ++f)
      for (const auto& [cat, g] : gv.emb.rows[f]) {
        Vec& r = emb_pert.at(f, cat, d);
        const double* base = table.row(f, cat);
        for (std::size_t k = 0; k < d; ++k)
          r[k] = base[k] + sign * eps * g[k];
      }
    DnaGrads gp;
    dna_loss_and_grad(lay, model.fitness().values, w_pert, dtrain, tb,
                      EmbeddingView(table, emb_pert), &gp, false, sdev);
    out_fitness_grad = std::move(gp.fitness);
  };
  Vec g_plus, g_minus;
  perturbed_eval(1.0, g_plus);
  perturbed_eval(-1.0, g_minus);
  const double scale = xi / (2.0 * eps);
  for (std::size_t i = 0; i < result.size(); ++i)
    result[i] -= scale * (g_plus[i] - g_minus[i]);
  return result;
}

DnaResult run_dna_search(const Dataset& input, EmbeddingTable& table,
                         const DnaConfig& cfg) {
  if (input.size() == 0) throw UserError("dna search: empty dataset");
  if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0))
    throw UserError("dna search: val_fraction must be in (0,1)");
  if (cfg.learning_rate <= 0.0)
    throw UserError("dna search: learning rate must be positive");
  const std::size_t m = table.num_fields();
  const std::size_t d = table.dim();

  Rng master(cfg.seed);
  const std::uint64_t split_seed = master();
  const std::uint64_t model_seed = master();

  auto splits = split(input, {1.0 - cfg.val_fraction, cfg.val_fraction, 0.0},
                      split_seed);
  const Dataset& dtrain = splits[0];
  const Dataset& dval = splits[1];
  if (dtrain.size() == 0 || dval.size() == 0)
    throw UserError("dna search: dataset too small for the train/val split");

  DnaModel model(m, d, model_seed);

  AdamConfig fit_adam = cfg.adam;
  fit_adam.lr = cfg.learning_rate;
  fit_adam.weight_decay = 0.0;  // fitness variables never decay
  AdamConfig w_adam = cfg.adam;
  w_adam.lr = cfg.learning_rate;

  Adam adam_fitness(fit_adam, model.fitness().values.size());
  Adam adam_weights(w_adam, model.weights().values.size());
  SparseAdam adam_emb(w_adam, table);

  DnaResult res;
  res.frames.push_back(snapshot_dna(0, m, model.fitness().values));

  // Early stopping keeps the state of the best validation epoch; training
  // may continue past it for `patience` epochs before giving up.
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  Vec best_fitness, best_weights;
  std::vector<Vec> best_table;
  double sdev = 0.0;
  DnaGrads g_fit, g_train;

  const std::size_t snap_every = std::max<std::size_t>(
      1, cfg.snapshot_every_epochs);
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const std::uint64_t ts = master();
    const std::uint64_t vs = master();
    auto tb_list = batch_indices(dtrain.size(), cfg.batch_size, ts);
    auto vb_list = batch_indices(dval.size(), cfg.batch_size, vs);

    double train_loss_sum = 0.0;
    std::size_t train_count = 0;
    for (std::size_t si = 0; si < tb_list.size(); ++si) {
      const auto& tb = tb_list[si];
      const auto& vb = vb_list[si % vb_list.size()];

      if (cfg.second_order) {
        Vec gtheta = dna_second_order_fitness_grad(model, table, dtrain, tb,
                                                   dval, vb, cfg, &sdev);
        adam_fitness.step(model.fitness(), gtheta);
      } else {
        dna_loss_and_grad(model.layout(), model.fitness().values,
                          model.weights().values, dval, vb,
                          EmbeddingView(table), &g_fit, false, &sdev);
        adam_fitness.step(model.fitness(), g_fit.fitness);
      }

      const double tl =
          model.loss_and_grad(dtrain, tb, EmbeddingView(table), &g_train,
                              true, &sdev);
      if (!std::isfinite(tl))
        throw std::runtime_error("dna search: non-finite training loss");
      adam_weights.step(model.weights(), g_train.weights);
      adam_emb.step(table, g_train.emb);
      train_loss_sum += tl * static_cast<double>(tb.size());
      train_count += tb.size();
    }

    const double val_loss = full_logloss(model, dval, table);
    if (!std::isfinite(val_loss))
      throw std::runtime_error("dna search: non-finite validation loss");
    DnaEpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss_sum / static_cast<double>(train_count);
    rec.val_loss = val_loss;
    rec.op_fitness = model.fitness().values;
    res.history.push_back(std::move(rec));
    if (epoch % snap_every == 0)
      res.frames.push_back(
          snapshot_dna(static_cast<long long>(epoch), m,
                       model.fitness().values));
    res.epochs_run = epoch;

    if (val_loss < best_val) {
      best_val = val_loss;
      best_epoch = epoch;
      best_fitness = model.fitness().values;
      best_weights = model.weights().values;
      best_table.clear();
      for (std::size_t f = 0; f < m; ++f)
        best_table.push_back(table.field_data(f));
    }
    if (epoch - best_epoch >= cfg.patience) break;
  }

  if (!best_fitness.empty()) {
    model.fitness().values = best_fitness;
    model.weights().values = best_weights;
    for (std::size_t f = 0; f < m; ++f)
      table.field_data(f) = best_table[f];
  }
  res.op_fitness = model.fitness().values;
  res.pair_weights.assign(model.pair_weights().begin(),
                          model.pair_weights().end());
  res.assignment = model.make_assignment();
  res.max_softmax_deviation = sdev;
  return res;
}

}  // namespace cell
