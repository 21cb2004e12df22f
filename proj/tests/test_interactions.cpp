#include <array>
#include <cmath>

#include "cell/interactions.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace cell;

TEST_SUITE_BEGIN("interactions");

TEST_CASE("forward closed forms") {
  Vec fi{1, 2}, fj{3, 4}, out;

  op_forward(OpKind::Sum, fi, fj, FFView{}, out, nullptr);
  CHECK(out == Vec{4, 6});

  op_forward(OpKind::Product, fi, fj, FFView{}, out, nullptr);
  CHECK(out == Vec{3, 8});

  // ProductFF with identity weights and zero bias passes ReLU unchanged
  // when the product is positive.
  FFParams id;
  id.weight = {1, 0, 0, 1};
  id.bias = {0, 0};
  op_forward(OpKind::ProductFF, fi, fj, FFView(id), out, nullptr);
  CHECK(out == Vec{3, 8});

  // ConcatFF with zero weights: output is ReLU(bias).
  FFParams zero;
  zero.weight.assign(4 * 2, 0.0);
  zero.bias = {-1, 5};
  op_forward(OpKind::ConcatFF, fi, fj, FFView(zero), out, nullptr);
  CHECK(out == Vec{0, 5});
}

TEST_CASE("forward errors") {
  Vec fi{1, 2}, fj{3}, out;
  CHECK_THROWS_AS(op_forward(OpKind::Sum, fi, fj, FFView{}, out, nullptr),
                  UserError);
  Vec fj2{3, 4};
  CHECK_THROWS_AS(
      op_forward(OpKind::ProductFF, fi, fj2, FFView{}, out, nullptr),
      UserError);
  FFParams bad;
  bad.weight.assign(3, 0.0);
  bad.bias.assign(2, 0.0);
  CHECK_THROWS_AS(
      op_forward(OpKind::ProductFF, fi, fj2, FFView(bad), out, nullptr),
      UserError);
}

TEST_CASE("backward closed forms") {
  Vec fi{1, 2}, fj{3, 4}, out;
  Vec upstream{0.5, -2.0};

  OpTape tape;
  op_forward(OpKind::Sum, fi, fj, FFView{}, out, &tape);
  OpGrads g;
  op_backward(tape, upstream, nullptr, g);
  CHECK(g.f_i == upstream);
  CHECK(g.f_j == upstream);

  op_forward(OpKind::Product, fi, fj, FFView{}, out, &tape);
  OpGrads g2;
  op_backward(tape, upstream, nullptr, g2);
  CHECK(g2.f_i == Vec{0.5 * 3, -2.0 * 4});
  CHECK(g2.f_j == Vec{0.5 * 1, -2.0 * 2});

  // Mismatched tape: product tape fed to an FF backward path.
  OpTape blank;
  blank.kind = OpKind::ProductFF;
  blank.f_i = fi;
  blank.f_j = fj;
  OpGrads g3;
  CHECK_THROWS_AS(op_backward(blank, upstream, nullptr, g3), UserError);
}

TEST_CASE("commutativity") {
  Rng rng(3);
  Vec fi(5), fj(5), a, b;
  fill_gaussian(fi, 1.0, rng);
  fill_gaussian(fj, 1.0, rng);
  FFParams pff = init_ff(OpKind::ProductFF, 5, rng);
  FFParams cff = init_ff(OpKind::ConcatFF, 5, rng);

  op_forward(OpKind::Sum, fi, fj, FFView{}, a, nullptr);
  op_forward(OpKind::Sum, fj, fi, FFView{}, b, nullptr);
  CHECK(a == b);
  op_forward(OpKind::Product, fi, fj, FFView{}, a, nullptr);
  op_forward(OpKind::Product, fj, fi, FFView{}, b, nullptr);
  CHECK(a == b);
  op_forward(OpKind::ProductFF, fi, fj, FFView(pff), a, nullptr);
  op_forward(OpKind::ProductFF, fj, fi, FFView(pff), b, nullptr);
  CHECK(a == b);
  op_forward(OpKind::ConcatFF, fi, fj, FFView(cff), a, nullptr);
  op_forward(OpKind::ConcatFF, fj, fi, FFView(cff), b, nullptr);
  CHECK(a != b);  // concatenation is order-sensitive
}

// The complexity contract as a footprint count: parameter-free kinds carry
// no parameters and O(dim) tape state; FF kinds carry Theta(dim^2) weights.
TEST_CASE("complexity footprint") {
  const std::size_t d = 16;
  Rng rng(1);
  CHECK(ff_input_dim(OpKind::Sum, d) == d);
  CHECK(init_ff(OpKind::Sum, d, rng).weight.empty());
  CHECK(init_ff(OpKind::Product, d, rng).weight.empty());
  CHECK(init_ff(OpKind::ProductFF, d, rng).weight.size() == d * d);
  CHECK(init_ff(OpKind::ConcatFF, d, rng).weight.size() == 2 * d * d);

  Vec fi(d, 0.5), fj(d, 0.25), out;
  OpTape tape;
  op_forward(OpKind::Sum, fi, fj, FFView{}, out, &tape);
  CHECK(tape.ff_input.size() + tape.pre_act.size() == 0);  // O(dim) state
  FFParams cff = init_ff(OpKind::ConcatFF, d, rng);
  op_forward(OpKind::ConcatFF, fi, fj, FFView(cff), out, &tape);
  CHECK(tape.ff_input.size() == 2 * d);
  CHECK(tape.pre_act.size() == d);
}

// Finite-difference oracle over 100 seeded configurations, all four kinds,
// with ReLU pre-activations bounded away from zero.
TEST_CASE("backward matches finite differences") {
  const std::size_t d = 4;
  oracles::GradCheck check;
  int accepted = 0;
  for (std::uint64_t seed = 0; accepted < 100 && seed < 400; ++seed) {
    Rng rng(seed * 7919 + 13);
    Vec fi(d), fj(d), r(d);
    fill_gaussian(fi, 1.0, rng);
    fill_gaussian(fj, 1.0, rng);
    fill_gaussian(r, 1.0, rng);
    FFParams pff = init_ff(OpKind::ProductFF, d, rng);
    FFParams cff = init_ff(OpKind::ConcatFF, d, rng);

    // Keep pre-activations away from the ReLU kink.
    bool ok = true;
    for (OpKind kind : {OpKind::ProductFF, OpKind::ConcatFF}) {
      Vec out;
      OpTape tape;
      const FFParams& ff = kind == OpKind::ProductFF ? pff : cff;
      op_forward(kind, fi, fj, FFView(ff), out, &tape);
      for (double z : tape.pre_act)
        if (std::abs(z) < 1e-3) ok = false;
    }
    if (!ok) continue;
    ++accepted;

    for (int k = 0; k < kNumOpKinds; ++k) {
      const OpKind kind = static_cast<OpKind>(k);
      FFParams* ff = kind == OpKind::ProductFF
                         ? &pff
                         : (kind == OpKind::ConcatFF ? &cff : nullptr);
      auto loss = [&]() {
        Vec out;
        op_forward(kind, fi, fj, ff ? FFView(*ff) : FFView(), out, nullptr);
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += r[c] * out[c];
        return s;
      };
      Vec out;
      OpTape tape;
      op_forward(kind, fi, fj, ff ? FFView(*ff) : FFView(), out, &tape);
      OpGrads g;
      op_backward(tape, r, ff, g);

      const double h = 1e-6;
      check.check_span(loss, fi.data(), g.f_i.data(), d, h, "f_i");
      check.check_span(loss, fj.data(), g.f_j.data(), d, h, "f_j");
      if (ff) {
        check.check_span(loss, ff->weight.data(), g.ff_weight.data(),
                         ff->weight.size(), h, "ff_w");
        check.check_span(loss, ff->bias.data(), g.ff_bias.data(),
                         ff->bias.size(), h, "ff_b");
      }
    }
  }
  REQUIRE(accepted == 100);
  INFO("worst coordinate: ", check.worst_coord, " analytic ",
       check.worst_analytic, " numeric ", check.worst_numeric);
  CHECK(check.max_rel_err < 1e-6);
}

TEST_SUITE_END();
