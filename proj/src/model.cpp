#include "cell/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cell/metrics.hpp"
#include "cell/threading.hpp"

namespace cell {

namespace {
constexpr std::size_t kChunk = 256;
constexpr std::size_t kNoFF = static_cast<std::size_t>(-1);
}  // namespace

FinalModel::FinalModel(EmbeddingTable table, OperationAssignment assignment,
                       Vec alpha, Vec beta, const MlpConfig& cfg)
    : table_(std::move(table)),
      assignment_(std::move(assignment)),
      alpha_(std::move(alpha)),
      beta_(std::move(beta)),
      cfg_(cfg) {
  const std::size_t m = table_.num_fields();
  const std::size_t d = table_.dim();
  if (alpha_.size() != m || beta_.size() != pair_count(m))
    throw UserError("final model: relevance fitness shape mismatch");
  if (assignment_.kinds.size() != beta_.size())
    throw UserError("final model: assignment does not cover all pairs");
  assignment_.ff.resize(assignment_.kinds.size());

  for (std::size_t i = 0; i < m; ++i)
    if (alpha_[i] != 0.0) retained_features_.push_back(i);
  for (std::size_t p = 0; p < beta_.size(); ++p)
    if (beta_[p] != 0.0) retained_pairs_.push_back(p);
  if (retained_features_.empty() && retained_pairs_.empty())
    throw UserError("empty model: every feature and interaction is discarded");

  input_dim_ = (retained_features_.size() + retained_pairs_.size()) * d;

  Rng rng(derive_seed(cfg_.seed, 1));
  if (cfg_.reset_embeddings)
    table_ = EmbeddingTable(table_.cardinalities(), d, rng(), 0.01);

  // MLP blocks: depth hidden layers of `width`, then a single logit.
  std::size_t in = input_dim_;
  for (std::size_t l = 0; l < cfg_.depth; ++l) {
    layer_in_.push_back(in);
    layer_out_.push_back(cfg_.width);
    layer_w_off_.push_back(
        params_.add_block("mlp/w" + std::to_string(l), in * cfg_.width, true));
    layer_b_off_.push_back(
        params_.add_block("mlp/b" + std::to_string(l), cfg_.width, true));
    in = cfg_.width;
  }
  layer_in_.push_back(in);
  layer_out_.push_back(1);
  layer_w_off_.push_back(params_.add_block("mlp/w_out", in, true));
  layer_b_off_.push_back(params_.add_block("mlp/b_out", 1, true));

  ff_off_.assign(retained_pairs_.size(), kNoFF);
  for (std::size_t r = 0; r < retained_pairs_.size(); ++r) {
    const std::size_t p = retained_pairs_[r];
    const OpKind kind = assignment_.kinds[p];
    if (!op_has_ff(kind)) continue;
    const std::size_t in_dim = ff_input_dim(kind, d);
    ff_off_[r] = params_.add_block("pair" + std::to_string(p) + "/ff",
                                   in_dim * d + d, true);
  }

  // Glorot-uniform weights, zero biases.
  std::span<double> pv(params_.values);
  for (std::size_t l = 0; l < layer_w_off_.size(); ++l) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(layer_in_[l] + layer_out_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t k = 0; k < layer_in_[l] * layer_out_[l]; ++k)
      pv[layer_w_off_[l] + k] = dist(rng);
  }
  for (std::size_t r = 0; r < retained_pairs_.size(); ++r) {
    if (ff_off_[r] == kNoFF) continue;
    const std::size_t p = retained_pairs_[r];
    const OpKind kind = assignment_.kinds[p];
    const std::size_t in_dim = ff_input_dim(kind, d);
    auto w = pv.subspan(ff_off_[r], in_dim * d);
    auto b = pv.subspan(ff_off_[r] + in_dim * d, d);
    if (cfg_.warm_start_ff && assignment_.ff[p].weight.size() == in_dim * d) {
      std::copy(assignment_.ff[p].weight.begin(),
                assignment_.ff[p].weight.end(), w.begin());
      std::copy(assignment_.ff[p].bias.begin(), assignment_.ff[p].bias.end(),
                b.begin());
    } else {
      init_ff_into(kind, d, rng, w, b);
    }
  }
}

void FinalModel::build_input(const Instance& inst, Vec& x) const {
  const std::size_t d = table_.dim();
  x.resize(input_dim_);
  std::size_t off = 0;
  for (std::size_t i : retained_features_) {
    const double* row = table_.lookup(i, inst.fields[i]);
    for (std::size_t k = 0; k < d; ++k) x[off + k] = alpha_[i] * row[k];
    off += d;
  }
  Vec out(d);
  for (std::size_t r = 0; r < retained_pairs_.size(); ++r) {
    const std::size_t p = retained_pairs_[r];
    auto [i, j] = pair_from_rank(p, table_.num_fields());
    FFView ff;
    if (ff_off_[r] != kNoFF) {
      const std::size_t in_dim = ff_input_dim(assignment_.kinds[p], d);
      std::span<const double> pv(params_.values);
      ff = FFView{pv.subspan(ff_off_[r], in_dim * d),
                  pv.subspan(ff_off_[r] + in_dim * d, d)};
    }
    op_forward(assignment_.kinds[p],
               std::span<const double>(table_.lookup(i, inst.fields[i]), d),
               std::span<const double>(table_.lookup(j, inst.fields[j]), d),
               ff, out, nullptr);
    for (std::size_t k = 0; k < d; ++k) x[off + k] = beta_[p] * out[k];
    off += d;
  }
}

double FinalModel::forward_one(const Instance& inst, Vec* x_out) const {
  Vec x;
  build_input(inst, x);
  std::span<const double> pv(params_.values);
  Vec h = x;
  Vec z;
  for (std::size_t l = 0; l < cfg_.depth; ++l) {
    const std::size_t in = layer_in_[l];
    const std::size_t out = layer_out_[l];
    z.assign(pv.begin() + static_cast<std::ptrdiff_t>(layer_b_off_[l]),
             pv.begin() + static_cast<std::ptrdiff_t>(layer_b_off_[l] + out));
    const double* W = pv.data() + layer_w_off_[l];
    for (std::size_t a = 0; a < in; ++a) {
      const double xa = h[a];
      const double* wrow = W + a * out;
      for (std::size_t k = 0; k < out; ++k) z[k] += xa * wrow[k];
    }
    for (double& v : z) v = v > 0.0 ? v : 0.0;
    h = z;
  }
  const std::size_t l = cfg_.depth;
  double logit = pv[layer_b_off_[l]];
  const double* W = pv.data() + layer_w_off_[l];
  for (std::size_t a = 0; a < layer_in_[l]; ++a) logit += h[a] * W[a];
  if (x_out) *x_out = std::move(x);
  return logit;
}

double FinalModel::predict_one(const Instance& inst) const {
  return clamp_probability(sigmoid(forward_one(inst, nullptr)));
}

Vec FinalModel::predict(const Dataset& ds,
                        std::span<const std::size_t> idx) const {
  Vec preds(idx.size());
  threading::for_chunks(idx.size(), kChunk, [&](std::size_t, std::size_t b,
                                                std::size_t e) {
    for (std::size_t t = b; t < e; ++t)
      preds[t] = predict_one(ds.instances[idx[t]]);
  });
  return preds;
}

Vec FinalModel::predict_all(const Dataset& ds) const {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  return predict(ds, all);
}

double FinalModel::loss_and_grad(const Dataset& ds,
                                 std::span<const std::size_t> idx,
                                 Grads* grads) const {
  const std::size_t n = idx.size();
  if (n == 0) throw UserError("final model: empty batch");
  const std::size_t m = table_.num_fields();
  const std::size_t d = table_.dim();
  const bool want = grads != nullptr;
  const std::size_t num_chunks = (n + kChunk - 1) / kChunk;

  struct Partial {
    double loss = 0.0;
    Grads g;
    bool used = false;
  };
  std::vector<Partial> parts(num_chunks);
  std::span<const double> pv(params_.values);

  threading::for_chunks(n, kChunk, [&](std::size_t c, std::size_t b,
                                       std::size_t e) {
    Partial& part = parts[c];
    part.used = true;
    if (want) {
      part.g.flat.assign(params_.values.size(), 0.0);
      part.g.emb.init(m);
    }
    Vec x, out(d), upstream(d), fgrad(m * d, 0.0);
    std::vector<OpTape> tapes(retained_pairs_.size());
    std::vector<Vec> acts(cfg_.depth + 1);  // acts[0] = x, then hidden h
    std::vector<Vec> pre(cfg_.depth);       // pre-activations
    Vec dh, dz;

    for (std::size_t t = b; t < e; ++t) {
      const Instance& inst = ds.instances[idx[t]];

      // Input with tapes for the pair blocks.
      x.resize(input_dim_);
      std::size_t off = 0;
      for (std::size_t i : retained_features_) {
        const double* row = table_.lookup(i, inst.fields[i]);
        for (std::size_t k = 0; k < d; ++k) x[off + k] = alpha_[i] * row[k];
        off += d;
      }
      for (std::size_t r = 0; r < retained_pairs_.size(); ++r) {
        const std::size_t p = retained_pairs_[r];
        auto [i, j] = pair_from_rank(p, m);
        FFView ff;
        if (ff_off_[r] != kNoFF) {
          const std::size_t in_dim = ff_input_dim(assignment_.kinds[p], d);
          ff = FFView{pv.subspan(ff_off_[r], in_dim * d),
                      pv.subspan(ff_off_[r] + in_dim * d, d)};
        }
        op_forward(assignment_.kinds[p],
                   std::span<const double>(table_.lookup(i, inst.fields[i]), d),
                   std::span<const double>(table_.lookup(j, inst.fields[j]), d),
                   ff, out, want ? &tapes[r] : nullptr);
        for (std::size_t k = 0; k < d; ++k) x[off + k] = beta_[p] * out[k];
        off += d;
      }

      acts[0] = x;
      for (std::size_t l = 0; l < cfg_.depth; ++l) {
        const std::size_t in = layer_in_[l];
        const std::size_t outw = layer_out_[l];
        pre[l].assign(
            pv.begin() + static_cast<std::ptrdiff_t>(layer_b_off_[l]),
            pv.begin() + static_cast<std::ptrdiff_t>(layer_b_off_[l] + outw));
        const double* W = pv.data() + layer_w_off_[l];
        const Vec& hin = acts[l];
        for (std::size_t a = 0; a < in; ++a) {
          const double xa = hin[a];
          const double* wrow = W + a * outw;
          double* zp = pre[l].data();
          for (std::size_t k = 0; k < outw; ++k) zp[k] += xa * wrow[k];
        }
        acts[l + 1].resize(outw);
        for (std::size_t k = 0; k < outw; ++k)
          acts[l + 1][k] = pre[l][k] > 0.0 ? pre[l][k] : 0.0;
      }
      const std::size_t lo = cfg_.depth;
      double logit = pv[layer_b_off_[lo]];
      {
        const double* W = pv.data() + layer_w_off_[lo];
        const Vec& hin = acts[lo];
        for (std::size_t a = 0; a < layer_in_[lo]; ++a)
          logit += hin[a] * W[a];
      }
      if (!std::isfinite(logit))
        throw std::runtime_error("final model: non-finite logit");
      part.loss += logloss_from_logit(logit, inst.label);
      if (!want) continue;

      const double dlogit =
          (sigmoid(logit) - static_cast<double>(inst.label)) /
          static_cast<double>(n);

      // Output layer.
      double* gflat = part.g.flat.data();
      gflat[layer_b_off_[lo]] += dlogit;
      {
        const double* W = pv.data() + layer_w_off_[lo];
        double* gW = gflat + layer_w_off_[lo];
        const Vec& hin = acts[lo];
        dh.assign(layer_in_[lo], 0.0);
        for (std::size_t a = 0; a < layer_in_[lo]; ++a) {
          gW[a] += dlogit * hin[a];
          dh[a] = dlogit * W[a];
        }
      }
      // Hidden layers, top down.
      for (std::size_t li = cfg_.depth; li-- > 0;) {
        const std::size_t in = layer_in_[li];
        const std::size_t outw = layer_out_[li];
        dz.assign(outw, 0.0);
        for (std::size_t k = 0; k < outw; ++k)
          dz[k] = pre[li][k] > 0.0 ? dh[k] : 0.0;
        double* gb = gflat + layer_b_off_[li];
        for (std::size_t k = 0; k < outw; ++k) gb[k] += dz[k];
        const double* W = pv.data() + layer_w_off_[li];
        double* gW = gflat + layer_w_off_[li];
        const Vec& hin = acts[li];
        dh.assign(in, 0.0);
        for (std::size_t a = 0; a < in; ++a) {
          const double xa = hin[a];
          const double* wrow = W + a * outw;
          double* gwrow = gW + a * outw;
          double acc = 0.0;
          for (std::size_t k = 0; k < outw; ++k) {
            gwrow[k] += xa * dz[k];
            acc += wrow[k] * dz[k];
          }
          dh[a] = acc;
        }
      }
      // dh is now the input gradient; push through the blocks.
      std::fill(fgrad.begin(), fgrad.end(), 0.0);
      off = 0;
      for (std::size_t i : retained_features_) {
        double* dst = fgrad.data() + i * d;
        for (std::size_t k = 0; k < d; ++k)
          dst[k] += alpha_[i] * dh[off + k];
        off += d;
      }
      for (std::size_t r = 0; r < retained_pairs_.size(); ++r) {
        const std::size_t p = retained_pairs_[r];
        auto [i, j] = pair_from_rank(p, m);
        for (std::size_t k = 0; k < d; ++k)
          upstream[k] = beta_[p] * dh[off + k];
        FFView ff;
        FFGradView ffg;
        if (ff_off_[r] != kNoFF) {
          const std::size_t in_dim = ff_input_dim(assignment_.kinds[p], d);
          ff = FFView{pv.subspan(ff_off_[r], in_dim * d),
                      pv.subspan(ff_off_[r] + in_dim * d, d)};
          std::span<double> gfv(part.g.flat);
          ffg = FFGradView{gfv.subspan(ff_off_[r], in_dim * d),
                           gfv.subspan(ff_off_[r] + in_dim * d, d)};
        }
        op_backward(tapes[r], upstream, ff,
                    std::span<double>(fgrad.data() + i * d, d),
                    std::span<double>(fgrad.data() + j * d, d), ffg);
        off += d;
      }
      for (std::size_t f = 0; f < m; ++f) {
        const double* src = fgrad.data() + f * d;
        bool nonzero = false;
        for (std::size_t k = 0; k < d; ++k)
          if (src[k] != 0.0) {
            nonzero = true;
            break;
          }
        if (!nonzero) continue;
        Vec& dst = part.g.emb.at(f, inst.fields[f], d);
        for (std::size_t k = 0; k < d; ++k) dst[k] += src[k];
      }
    }
  });

  double loss = 0.0;
  if (want) {
    grads->flat.assign(params_.values.size(), 0.0);
    grads->emb.init(m);
  }
  for (Partial& part : parts) {
    if (!part.used) continue;
    loss += part.loss;
    if (want) {
      for (std::size_t i = 0; i < grads->flat.size(); ++i)
        grads->flat[i] += part.g.flat[i];
      grads->emb.add(part.g.emb, d);
    }
  }
  return loss / static_cast<double>(n);
}

FinalModel train_final(const Dataset& train, const Dataset& val,
                       EmbeddingTable table,
                       const OperationAssignment& assignment, const Vec& alpha,
                       const Vec& beta, const MlpConfig& cfg,
                       std::vector<MlpEpochRecord>* history) {
  if (train.size() == 0) throw UserError("final training: empty dataset");
  FinalModel model(std::move(table), assignment, alpha, beta, cfg);

  AdamConfig ac = cfg.adam;
  ac.lr = cfg.learning_rate;
  Adam adam(ac, model.params().values.size());
  SparseAdam adam_emb(ac, model.table());

  Rng master(derive_seed(cfg.seed, 2));
  std::vector<int> val_labels(val.size());
  for (std::size_t i = 0; i < val.size(); ++i)
    val_labels[i] = val.instances[i].label;

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  Vec best_params;
  std::vector<Vec> best_table;
  FinalModel::Grads grads;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const std::uint64_t es = master();
    auto batches = batch_indices(train.size(), cfg.batch_size, es);
    double loss_sum = 0.0;
    std::size_t count = 0;
    for (const auto& batch : batches) {
      const double loss = model.loss_and_grad(train, batch, &grads);
      if (!std::isfinite(loss))
        throw std::runtime_error("final training: non-finite loss");
      adam.step(model.params(), grads.flat);
      adam_emb.step(model.table(), grads.emb);
      loss_sum += loss * static_cast<double>(batch.size());
      count += batch.size();
    }
    const double train_loss = loss_sum / static_cast<double>(count);
    double monitored = train_loss;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    if (!val.instances.empty()) {
      val_loss = logloss(model.predict_all(val), val_labels);
      monitored = val_loss;
    }
    if (history) history->push_back({epoch, train_loss, val_loss});
    if (monitored < best) {
      best = monitored;
      best_epoch = epoch;
      best_params = model.params().values;
      best_table.clear();
      for (std::size_t f = 0; f < model.table().num_fields(); ++f)
        best_table.push_back(model.table().field_data(f));
    }
    if (epoch - best_epoch >= cfg.patience) break;
  }
  if (!best_params.empty()) {
    model.params().values = best_params;
    for (std::size_t f = 0; f < model.table().num_fields(); ++f)
      model.table().field_data(f) = best_table[f];
  }
  return model;
}

}  // namespace cell
