#include <fstream>

#include "cell/genemap.hpp"
#include "doctest.h"

using namespace cell;

TEST_SUITE_BEGIN("genemap");

TEST_CASE("dna snapshot uses argmax codes and uniform relevance") {
  Rng rng(4);
  Vec theta(4 * pair_count(4));
  fill_uniform(theta, 1.0, rng);
  GeneMapFrame fr = snapshot_dna(0, 4, theta);
  CHECK(fr.iteration == 0);
  CHECK(fr.stage == "dna");
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(fr.code(i, i) == kFeatureCode);
    CHECK(fr.rel(i, i) == 1.0);
    for (std::size_t j = i + 1; j < 4; ++j) {
      const double* th = theta.data() + 4 * pair_rank(i, j, 4);
      int best = 0;
      for (int k = 1; k < 4; ++k)
        if (th[k] > th[best]) best = k;
      CHECK(fr.code(i, j) == best);
      CHECK(fr.code(j, i) == best);  // mirrored
      CHECK(fr.rel(i, j) == 1.0);
    }
  }
  // Unchanged state gives an identical snapshot.
  GeneMapFrame fr2 = snapshot_dna(0, 4, theta);
  CHECK(fr2.op_codes == fr.op_codes);
  CHECK(fr2.relevance == fr.relevance);
}

TEST_CASE("genome snapshot marks discards at convergence") {
  std::vector<OpKind> kinds{OpKind::Product, OpKind::ConcatFF, OpKind::Sum};
  Vec alpha{0.5, -0.25, 0.0};
  Vec beta{0.0, 0.75, -0.4};
  GeneMapFrame live = snapshot_genome(10, 3, kinds, alpha, beta, false);
  CHECK(live.code(0, 1) == 1);  // current assignment while searching
  CHECK(live.rel(0, 1) == 0.0);
  CHECK(live.rel(0, 2) == 0.75);
  CHECK(live.rel(1, 2) == 0.4);  // |beta|
  CHECK(live.rel(1, 1) == 0.25); // |alpha|

  GeneMapFrame done = snapshot_genome(11, 3, kinds, alpha, beta, true);
  CHECK(done.code(0, 1) == kDiscardedCode);
  CHECK(done.code(1, 0) == kDiscardedCode);
  CHECK(done.code(0, 2) == 3);
}

TEST_CASE("csv export row count and round trip") {
  std::vector<OpKind> kinds{OpKind::Product};
  Vec alpha{0.5, -0.25};
  Vec beta{0.125};
  std::vector<GeneMapFrame> frames;
  frames.push_back(snapshot_genome(0, 2, kinds, alpha, beta, false));
  frames.push_back(snapshot_genome(7, 2, kinds, alpha, beta, true));

  const std::string path = "/tmp/cell_test_genemap.csv";
  export_csv(frames, path);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "iter,i,j,code,relevance");
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2 * 3);  // per frame: 1 interaction row + 2 diagonal rows

  auto parsed = import_csv(path);
  REQUIRE(parsed.size() == frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    CHECK(parsed[k].iteration == frames[k].iteration);
    CHECK(parsed[k].m == frames[k].m);
    CHECK(parsed[k].op_codes == frames[k].op_codes);
    CHECK(parsed[k].relevance == frames[k].relevance);  // exact round trip
  }
  CHECK_THROWS_AS(export_csv({}, path), UserError);
}

TEST_CASE("pgm export pixel mapping") {
  std::vector<OpKind> kinds{OpKind::ConcatFF};
  Vec alpha{1.0, 0.5};
  Vec beta{0.0};
  GeneMapFrame fr = snapshot_genome(3, 2, kinds, alpha, beta, true);
  const std::string codes = "/tmp/cell_test_codes.pgm";
  const std::string rel = "/tmp/cell_test_rel.pgm";
  export_pgm(fr, codes, rel);

  std::ifstream in(codes, std::ios::binary);
  std::string magic, dims;
  std::getline(in, magic);
  CHECK(magic == "P5");
  std::getline(in, dims);
  CHECK(dims == "2 2");
  std::getline(in, dims);
  CHECK(dims == "255");
  unsigned char px[4];
  in.read(reinterpret_cast<char*>(px), 4);
  CHECK(px[0] == 250);  // diagonal, code 4 -> 50*(4+1)
  CHECK(px[1] == 0);    // discarded, code -1 -> 0
  CHECK(px[2] == 0);
  CHECK(px[3] == 250);

  std::ifstream rin(rel, std::ios::binary);
  std::getline(rin, magic);
  std::getline(rin, dims);
  std::getline(rin, dims);
  unsigned char rp[4];
  rin.read(reinterpret_cast<char*>(rp), 4);
  CHECK(rp[0] == 255);  // max relevance 1.0
  CHECK(rp[1] == 0);    // zero beta
  CHECK(rp[3] == 128);  // 0.5/1.0 -> round(127.5)
}

TEST_SUITE_END();
