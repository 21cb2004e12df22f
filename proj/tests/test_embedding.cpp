#include "cell/embedding.hpp"
#include "doctest.h"

using namespace cell;

TEST_SUITE_BEGIN("embedding");

TEST_CASE("init shapes and determinism") {
  EmbeddingTable t({3, 5}, 8, 42);
  CHECK(t.num_fields() == 2);
  CHECK(t.dim() == 8);
  CHECK(t.field_data(0).size() == 3 * 8);
  CHECK(t.field_data(1).size() == 5 * 8);

  EmbeddingTable u({3, 5}, 8, 42);
  CHECK(t.field_data(0) == u.field_data(0));
  CHECK(t.field_data(1) == u.field_data(1));

  EmbeddingTable v({3, 5}, 8, 43);
  CHECK(t.field_data(0) != v.field_data(0));

  CHECK_THROWS_AS(EmbeddingTable({3}, 0, 1), UserError);
}

TEST_CASE("lookup returns rows verbatim") {
  EmbeddingTable t({2, 3}, 4, 7);
  Instance inst{1, {0, 1}};
  auto rows = lookup(t, inst);
  REQUIRE(rows.size() == 2);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(rows[0][k] == t.field_data(0)[k]);
    CHECK(rows[1][k] == t.field_data(1)[4 + k]);
  }
  // Repeated lookup without updates is identical.
  auto rows2 = lookup(t, inst);
  CHECK(rows2[0] == rows[0]);
  CHECK(rows2[1] == rows[1]);

  Instance bad{0, {2, 0}};  // index == cardinality
  CHECK_THROWS_AS(lookup(t, bad), UserError);
  Instance wrong_m{0, {0}};
  CHECK_THROWS_AS(lookup(t, wrong_m), UserError);
}

TEST_CASE("embedding view overlay") {
  EmbeddingTable t({2}, 3, 1);
  EmbeddingGrad overlay;
  overlay.init(1);
  overlay.at(0, 1, 3) = {9.0, 8.0, 7.0};
  EmbeddingView plain(t);
  EmbeddingView patched(t, overlay);
  CHECK(plain.row(0, 0) == t.row(0, 0));
  CHECK(patched.row(0, 0) == t.row(0, 0));
  CHECK(patched.row(0, 1)[0] == 9.0);
  CHECK(patched.row(0, 1)[2] == 7.0);
}

TEST_SUITE_END();
