#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cell/common.hpp"
#include "cell/interactions.hpp"

namespace cell {

// Reserved code for diagonal (per-feature) entries in exports.
constexpr int kFeatureCode = 4;
// Code for a discarded interaction (relevance truncated to zero at
// stage-II convergence or later).
constexpr int kDiscardedCode = -1;

// An m x m snapshot of the evolving model: operation codes for every pair
// (mirrored across the diagonal, diagonal = feature marker) and relevance
// intensities (diagonal = |alpha_i|, off-diagonal = |beta_ij|).
struct GeneMapFrame {
  long long iteration = 0;
  std::string stage;  // "dna" or "genome"
  std::size_t m = 0;
  std::vector<int> op_codes;  // m*m, row-major
  Vec relevance;              // m*m, row-major

  int code(std::size_t i, std::size_t j) const { return op_codes[i * m + j]; }
  double rel(std::size_t i, std::size_t j) const { return relevance[i * m + j]; }
};

// Stage-I snapshot: codes from the per-pair argmax of the operation
// fitness values, uniform relevance.
GeneMapFrame snapshot_dna(long long iteration, std::size_t m,
                          const Vec& op_fitness);

// Stage-II snapshot from the current assignment and |alpha|, |beta|.
// With mark_discards, pairs whose beta is exactly zero get code -1.
GeneMapFrame snapshot_genome(long long iteration, std::size_t m,
                             const std::vector<OpKind>& kinds,
                             const Vec& alpha, const Vec& beta,
                             bool mark_discards);

// CSV schema: header `iter,i,j,code,relevance`; one row per (i, j) with
// i <= j; diagonal rows carry code 4 and |alpha_i|.
void export_csv(const std::vector<GeneMapFrame>& frames,
                const std::string& path);
std::vector<GeneMapFrame> import_csv(const std::string& path);

// Binary (P5) PGM pair: code map pixel = 50 * (code + 1); relevance map
// pixel = round(255 * rel / max rel).
void export_pgm(const GeneMapFrame& frame, const std::string& codes_path,
                const std::string& relevance_path);

}  // namespace cell
