#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "cell/common.hpp"

namespace cell {

// The four interaction operations. Codes are part of the gene-map encoding
// and of serialized assignments; they must not change.
enum class OpKind : int {
  Sum = 0,        // element-wise sum, parameter-free
  Product = 1,    // element-wise product, parameter-free
  ProductFF = 2,  // element-wise product -> feed-forward + ReLU
  ConcatFF = 3,   // concatenation -> feed-forward + ReLU
};

constexpr int kNumOpKinds = 4;

inline bool op_has_ff(OpKind k) {
  return k == OpKind::ProductFF || k == OpKind::ConcatFF;
}

inline std::size_t ff_input_dim(OpKind k, std::size_t dim) {
  return k == OpKind::ConcatFF ? 2 * dim : dim;
}

std::string op_name(OpKind k);
OpKind op_from_code(int code);

// Feed-forward parameters for one (pair, kind): weight is (in_dim x dim)
// row-major, bias has length dim. Output is ReLU(W^T u + b).
struct FFParams {
  Vec weight;
  Vec bias;
};

// Non-owning view, used when parameters live inside a flat vector.
struct FFView {
  std::span<const double> weight;
  std::span<const double> bias;

  FFView() = default;
  FFView(std::span<const double> w, std::span<const double> b)
      : weight(w), bias(b) {}
  explicit FFView(const FFParams& p) : weight(p.weight), bias(p.bias) {}
  bool empty() const { return weight.empty(); }
};

struct FFGradView {
  std::span<double> weight;
  std::span<double> bias;
  bool empty() const { return weight.empty(); }
};

// Glorot-style uniform init, bias zero.
FFParams init_ff(OpKind kind, std::size_t dim, Rng& rng);
void init_ff_into(OpKind kind, std::size_t dim, Rng& rng,
                  std::span<double> weight, std::span<double> bias);

// Everything the backward pass needs from a forward call.
struct OpTape {
  OpKind kind = OpKind::Sum;
  Vec f_i, f_j;
  Vec ff_input;   // product or concatenation, FF kinds only
  Vec pre_act;    // W^T u + b before ReLU, FF kinds only
};

// out is resized to dim. ff is required (and only read) for FF kinds.
void op_forward(OpKind kind, std::span<const double> f_i,
                std::span<const double> f_j, FFView ff, Vec& out,
                OpTape* tape);

// Accumulates exact gradients of the forward map into the given spans;
// the ReLU subgradient at 0 is taken as 0. ff_grad may be empty for
// parameter-free kinds.
void op_backward(const OpTape& tape, std::span<const double> upstream,
                 FFView ff, std::span<double> grad_f_i,
                 std::span<double> grad_f_j, FFGradView ff_grad);

// Convenience wrappers over owning parameter structs.
struct OpGrads {
  Vec f_i, f_j;
  Vec ff_weight, ff_bias;
};

void op_forward(OpKind kind, std::span<const double> f_i,
                std::span<const double> f_j, const FFParams* ff, Vec& out,
                OpTape* tape);
void op_backward(const OpTape& tape, std::span<const double> upstream,
                 const FFParams* ff, OpGrads& out);

}  // namespace cell
