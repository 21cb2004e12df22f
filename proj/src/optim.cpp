#include "cell/optim.hpp"

#include <cmath>

namespace cell {

namespace {

const ParamBlock* block_of(const std::vector<ParamBlock>& blocks,
                           std::size_t idx) {
  for (const ParamBlock& b : blocks)
    if (idx >= b.offset && idx < b.offset + b.size) return &b;
  return nullptr;
}

}  // namespace

void Adam::step(FlatParams& params, const Vec& grads) {
  if (grads.size() != params.values.size() || grads.size() != m_.size())
    throw UserError("adam: gradient size mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      const ParamBlock* b = block_of(params.blocks, i);
      throw std::runtime_error("adam: non-finite gradient in parameter group '" +
                               (b ? b->name : std::string("?")) + "'");
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double decay_factor = 1.0 - cfg_.lr * cfg_.weight_decay;
  for (const ParamBlock& b : params.blocks) {
    const bool decay = b.decay && cfg_.weight_decay != 0.0;
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
      if (decay) params.values[i] *= decay_factor;
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
      const double m_hat = m_[i] / bc1;
      const double v_hat = v_[i] / bc2;
      params.values[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

void Adam::reset_range(std::size_t offset, std::size_t size) {
  for (std::size_t i = offset; i < offset + size && i < m_.size(); ++i) {
    m_[i] = 0.0;
    v_[i] = 0.0;
  }
}

SparseAdam::SparseAdam(AdamConfig cfg, const EmbeddingTable& table)
    : cfg_(cfg) {
  m_.reserve(table.num_fields());
  v_.reserve(table.num_fields());
  for (std::size_t f = 0; f < table.num_fields(); ++f) {
    m_.emplace_back(table.field_data(f).size(), 0.0);
    v_.emplace_back(table.field_data(f).size(), 0.0);
  }
}

void SparseAdam::step(EmbeddingTable& table, const EmbeddingGrad& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double decay_factor = 1.0 - cfg_.lr * cfg_.weight_decay;
  const std::size_t dim = table.dim();
  for (std::size_t f = 0; f < grads.rows.size(); ++f) {
    for (const auto& [cat, g] : grads.rows[f]) {
      for (double x : g)
        if (!std::isfinite(x))
          throw std::runtime_error(
              "adam: non-finite gradient in parameter group 'embeddings/field_" +
              std::to_string(f) + "'");
      double* p = table.row(f, cat);
      double* m = m_[f].data() + static_cast<std::size_t>(cat) * dim;
      double* v = v_[f].data() + static_cast<std::size_t>(cat) * dim;
      for (std::size_t k = 0; k < dim; ++k) {
        if (cfg_.weight_decay != 0.0) p[k] *= decay_factor;
        m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
        v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
        const double m_hat = m[k] / bc1;
        const double v_hat = v[k] / bc2;
        p[k] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
      }
    }
  }
}

double Rda::threshold() const {
  return cfg_.c * std::sqrt(cfg_.lr) *
         std::pow(static_cast<double>(t_) * cfg_.lr, cfg_.mu);
}

void Rda::step(const Vec& grads, Vec& values_out) {
  if (grads.size() != cum_.size())
    throw UserError("rda: gradient size mismatch");
  for (double g : grads)
    if (!std::isfinite(g))
      throw std::runtime_error("rda: non-finite gradient");
  ++t_;
  values_out.resize(cum_.size());
  const double h = threshold();
  for (std::size_t i = 0; i < cum_.size(); ++i) {
    cum_[i] += grads[i];
    const double v = init_[i] - cfg_.lr * cum_[i];
    values_out[i] = soft_threshold(v, h);
  }
}

}  // namespace cell
