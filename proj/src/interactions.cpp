#include "cell/interactions.hpp"

#include <cmath>

namespace cell {

std::string op_name(OpKind k) {
  switch (k) {
    case OpKind::Sum: return "sum";
    case OpKind::Product: return "product";
    case OpKind::ProductFF: return "product_ff";
    case OpKind::ConcatFF: return "concat_ff";
  }
  return "unknown";
}

OpKind op_from_code(int code) {
  if (code < 0 || code >= kNumOpKinds)
    throw UserError("invalid operation code " + std::to_string(code));
  return static_cast<OpKind>(code);
}

void init_ff_into(OpKind kind, std::size_t dim, Rng& rng,
                  std::span<double> weight, std::span<double> bias) {
  const std::size_t in_dim = ff_input_dim(kind, dim);
  if (weight.size() != in_dim * dim || bias.size() != dim)
    throw UserError("init_ff_into: shape mismatch");
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + dim));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& x : weight) x = dist(rng);
  for (double& x : bias) x = 0.0;
}

FFParams init_ff(OpKind kind, std::size_t dim, Rng& rng) {
  if (!op_has_ff(kind)) return {};
  const std::size_t in_dim = ff_input_dim(kind, dim);
  FFParams ff;
  ff.weight.resize(in_dim * dim);
  ff.bias.resize(dim);
  init_ff_into(kind, dim, rng, ff.weight, ff.bias);
  return ff;
}

void op_forward(OpKind kind, std::span<const double> f_i,
                std::span<const double> f_j, FFView ff, Vec& out,
                OpTape* tape) {
  const std::size_t dim = f_i.size();
  if (f_j.size() != dim) throw UserError("op_forward: input size mismatch");
  out.resize(dim);
  if (tape) {
    tape->kind = kind;
    tape->f_i.assign(f_i.begin(), f_i.end());
    tape->f_j.assign(f_j.begin(), f_j.end());
    tape->ff_input.clear();
    tape->pre_act.clear();
  }
  switch (kind) {
    case OpKind::Sum:
      for (std::size_t k = 0; k < dim; ++k) out[k] = f_i[k] + f_j[k];
      return;
    case OpKind::Product:
      for (std::size_t k = 0; k < dim; ++k) out[k] = f_i[k] * f_j[k];
      return;
    case OpKind::ProductFF:
    case OpKind::ConcatFF:
      break;
  }
  if (ff.empty()) throw UserError("op_forward: feed-forward parameters required");
  const std::size_t in_dim = ff_input_dim(kind, dim);
  if (ff.weight.size() != in_dim * dim || ff.bias.size() != dim)
    throw UserError("op_forward: feed-forward shape mismatch");

  Vec input(in_dim);
  if (kind == OpKind::ProductFF) {
    for (std::size_t k = 0; k < dim; ++k) input[k] = f_i[k] * f_j[k];
  } else {
    for (std::size_t k = 0; k < dim; ++k) input[k] = f_i[k];
    for (std::size_t k = 0; k < dim; ++k) input[dim + k] = f_j[k];
  }
  // pre_act = W^T input + b with W stored (in_dim x dim) row-major.
  Vec pre(ff.bias.begin(), ff.bias.end());
  for (std::size_t a = 0; a < in_dim; ++a) {
    const double xa = input[a];
    const double* wrow = ff.weight.data() + a * dim;
    for (std::size_t k = 0; k < dim; ++k) pre[k] += xa * wrow[k];
  }
  for (std::size_t k = 0; k < dim; ++k) out[k] = pre[k] > 0.0 ? pre[k] : 0.0;
  if (tape) {
    tape->ff_input = std::move(input);
    tape->pre_act = std::move(pre);
  }
}

void op_backward(const OpTape& tape, std::span<const double> upstream,
                 FFView ff, std::span<double> grad_f_i,
                 std::span<double> grad_f_j, FFGradView ff_grad) {
  const std::size_t dim = tape.f_i.size();
  if (upstream.size() != dim || grad_f_i.size() != dim ||
      grad_f_j.size() != dim)
    throw UserError("op_backward: upstream/gradient size mismatch");

  switch (tape.kind) {
    case OpKind::Sum:
      for (std::size_t k = 0; k < dim; ++k) {
        grad_f_i[k] += upstream[k];
        grad_f_j[k] += upstream[k];
      }
      return;
    case OpKind::Product:
      for (std::size_t k = 0; k < dim; ++k) {
        grad_f_i[k] += upstream[k] * tape.f_j[k];
        grad_f_j[k] += upstream[k] * tape.f_i[k];
      }
      return;
    case OpKind::ProductFF:
    case OpKind::ConcatFF:
      break;
  }
  if (ff.empty() || tape.pre_act.size() != dim)
    throw UserError("op_backward: tape/kind mismatch");
  if (ff_grad.empty())
    throw UserError("op_backward: feed-forward gradient storage required");
  const std::size_t in_dim = ff_input_dim(tape.kind, dim);

  double dz[256];
  if (dim > 256) throw UserError("op_backward: dim too large");
  for (std::size_t k = 0; k < dim; ++k)
    dz[k] = tape.pre_act[k] > 0.0 ? upstream[k] : 0.0;
  for (std::size_t k = 0; k < dim; ++k) ff_grad.bias[k] += dz[k];

  for (std::size_t a = 0; a < in_dim; ++a) {
    const double xa = tape.ff_input[a];
    const double* wrow = ff.weight.data() + a * dim;
    double* gw = ff_grad.weight.data() + a * dim;
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      gw[k] += xa * dz[k];
      acc += wrow[k] * dz[k];
    }
    if (tape.kind == OpKind::ProductFF) {
      grad_f_i[a] += acc * tape.f_j[a];
      grad_f_j[a] += acc * tape.f_i[a];
    } else {
      if (a < dim)
        grad_f_i[a] += acc;
      else
        grad_f_j[a - dim] += acc;
    }
  }
}

void op_forward(OpKind kind, std::span<const double> f_i,
                std::span<const double> f_j, const FFParams* ff, Vec& out,
                OpTape* tape) {
  op_forward(kind, f_i, f_j, ff ? FFView(*ff) : FFView(), out, tape);
}

void op_backward(const OpTape& tape, std::span<const double> upstream,
                 const FFParams* ff, OpGrads& out) {
  const std::size_t dim = tape.f_i.size();
  if (out.f_i.empty()) out.f_i.assign(dim, 0.0);
  if (out.f_j.empty()) out.f_j.assign(dim, 0.0);
  FFGradView gview;
  if (op_has_ff(tape.kind)) {
    const std::size_t in_dim = ff_input_dim(tape.kind, dim);
    if (out.ff_weight.empty()) out.ff_weight.assign(in_dim * dim, 0.0);
    if (out.ff_bias.empty()) out.ff_bias.assign(dim, 0.0);
    gview = FFGradView{out.ff_weight, out.ff_bias};
  }
  op_backward(tape, upstream, ff ? FFView(*ff) : FFView(), out.f_i, out.f_j,
              gview);
}

}  // namespace cell
