#include "cell/genemap.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cell {

namespace {

int argmax_kind(const double* four) {
  int best = 0;
  for (int k = 1; k < kNumOpKinds; ++k)
    if (four[k] > four[best]) best = k;
  return best;
}

}  // namespace

GeneMapFrame snapshot_dna(long long iteration, std::size_t m,
                          const Vec& op_fitness) {
  GeneMapFrame fr;
  fr.iteration = iteration;
  fr.stage = "dna";
  fr.m = m;
  fr.op_codes.assign(m * m, kFeatureCode);
  fr.relevance.assign(m * m, 1.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const std::size_t p = pair_rank(i, j, m);
      const int code = argmax_kind(op_fitness.data() + 4 * p);
      fr.op_codes[i * m + j] = code;
      fr.op_codes[j * m + i] = code;
    }
  return fr;
}

GeneMapFrame snapshot_genome(long long iteration, std::size_t m,
                             const std::vector<OpKind>& kinds,
                             const Vec& alpha, const Vec& beta,
                             bool mark_discards) {
  GeneMapFrame fr;
  fr.iteration = iteration;
  fr.stage = "genome";
  fr.m = m;
  fr.op_codes.assign(m * m, kFeatureCode);
  fr.relevance.assign(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    fr.relevance[i * m + i] = std::abs(alpha[i]);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const std::size_t p = pair_rank(i, j, m);
      int code = static_cast<int>(kinds[p]);
      if (mark_discards && beta[p] == 0.0) code = kDiscardedCode;
      fr.op_codes[i * m + j] = code;
      fr.op_codes[j * m + i] = code;
      fr.relevance[i * m + j] = std::abs(beta[p]);
      fr.relevance[j * m + i] = std::abs(beta[p]);
    }
  return fr;
}

void export_csv(const std::vector<GeneMapFrame>& frames,
                const std::string& path) {
  if (frames.empty()) throw UserError("gene-map export: no frames");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write gene-map file: " + path);
  out << "iter,i,j,code,relevance\n";
  char buf[64];
  for (const GeneMapFrame& fr : frames) {
    for (std::size_t i = 0; i < fr.m; ++i)
      for (std::size_t j = i; j < fr.m; ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", fr.rel(i, j));
        out << fr.iteration << ',' << i << ',' << j << ',' << fr.code(i, j)
            << ',' << buf << '\n';
      }
  }
  if (!out) throw UserError("write failure: " + path);
}

std::vector<GeneMapFrame> import_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open gene-map file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("iter,i,j,code,relevance", 0) != 0)
    throw UserError("gene-map file missing header: " + path);

  struct Row {
    long long iter;
    std::size_t i, j;
    int code;
    double rel;
  };
  std::vector<Row> rows;
  std::size_t max_field = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Row r;
    char* end = nullptr;
    const char* s = line.c_str();
    r.iter = std::strtoll(s, &end, 10);
    r.i = static_cast<std::size_t>(std::strtoull(end + 1, &end, 10));
    r.j = static_cast<std::size_t>(std::strtoull(end + 1, &end, 10));
    r.code = static_cast<int>(std::strtol(end + 1, &end, 10));
    r.rel = std::strtod(end + 1, &end);
    max_field = std::max(max_field, std::max(r.i, r.j));
    rows.push_back(r);
  }
  const std::size_t m = max_field + 1;
  std::vector<GeneMapFrame> frames;
  for (const Row& r : rows) {
    if (frames.empty() || frames.back().iteration != r.iter) {
      GeneMapFrame fr;
      fr.iteration = r.iter;
      fr.m = m;
      fr.op_codes.assign(m * m, kFeatureCode);
      fr.relevance.assign(m * m, 0.0);
      frames.push_back(std::move(fr));
    }
    GeneMapFrame& fr = frames.back();
    fr.op_codes[r.i * m + r.j] = r.code;
    fr.op_codes[r.j * m + r.i] = r.code;
    fr.relevance[r.i * m + r.j] = r.rel;
    fr.relevance[r.j * m + r.i] = r.rel;
  }
  return frames;
}

void export_pgm(const GeneMapFrame& frame, const std::string& codes_path,
                const std::string& relevance_path) {
  auto write_pgm = [&](const std::string& path,
                       const std::vector<unsigned char>& pixels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UserError("cannot write image file: " + path);
    out << "P5\n" << frame.m << ' ' << frame.m << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw UserError("write failure: " + path);
  };

  std::vector<unsigned char> code_px(frame.m * frame.m);
  for (std::size_t k = 0; k < code_px.size(); ++k)
    code_px[k] = static_cast<unsigned char>(50 * (frame.op_codes[k] + 1));
  write_pgm(codes_path, code_px);

  double max_rel = 0.0;
  for (double r : frame.relevance) max_rel = std::max(max_rel, r);
  std::vector<unsigned char> rel_px(frame.m * frame.m, 0);
  if (max_rel > 0.0)
    for (std::size_t k = 0; k < rel_px.size(); ++k)
      rel_px[k] = static_cast<unsigned char>(
          std::llround(255.0 * frame.relevance[k] / max_rel));
  write_pgm(relevance_path, rel_px);
}

}  // namespace cell
