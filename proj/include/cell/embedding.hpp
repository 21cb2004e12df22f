#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "cell/common.hpp"
#include "cell/dataset.hpp"

namespace cell {

// Per-field dense lookup table. Field f owns cardinality_f rows of `dim`
// reals, stored contiguously row-major.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::uint32_t> cardinalities, std::size_t dim,
                 std::uint64_t seed, double init_std = 0.01);

  std::size_t dim() const { return dim_; }
  std::size_t num_fields() const { return cardinalities_.size(); }
  const std::vector<std::uint32_t>& cardinalities() const {
    return cardinalities_;
  }

  double* row(std::size_t field, std::uint32_t category);
  const double* row(std::size_t field, std::uint32_t category) const;

  // Bounds-checked row access for instance lookups.
  const double* lookup(std::size_t field, std::uint32_t category) const;

  Vec& field_data(std::size_t field) { return tables_[field]; }
  const Vec& field_data(std::size_t field) const { return tables_[field]; }

 private:
  std::vector<std::uint32_t> cardinalities_;
  std::size_t dim_ = 0;
  std::vector<Vec> tables_;
};

// Returns the m embedding rows addressed by an instance.
std::vector<const double*> lookup(const EmbeddingTable& table,
                                  const Instance& inst);

// Sparse accumulator for embedding gradients: (field, category) -> dim reals.
struct EmbeddingGrad {
  std::vector<std::unordered_map<std::uint32_t, Vec>> rows;

  void init(std::size_t num_fields) { rows.assign(num_fields, {}); }
  Vec& at(std::size_t field, std::uint32_t category, std::size_t dim) {
    Vec& g = rows[field][category];
    if (g.empty()) g.assign(dim, 0.0);
    return g;
  }
  void add(const EmbeddingGrad& other, std::size_t dim) {
    for (std::size_t f = 0; f < other.rows.size(); ++f)
      for (const auto& [cat, g] : other.rows[f]) {
        Vec& dst = at(f, cat, dim);
        for (std::size_t k = 0; k < dim; ++k) dst[k] += g[k];
      }
  }
  void scale(double s) {
    for (auto& field_rows : rows)
      for (auto& [cat, g] : field_rows)
        for (double& x : g) x *= s;
  }
};

// Read-only view of a table with an optional sparse row overlay; used by
// the unrolled virtual steps of the bilevel search.
class EmbeddingView {
 public:
  explicit EmbeddingView(const EmbeddingTable& base) : base_(&base) {}
  EmbeddingView(const EmbeddingTable& base, const EmbeddingGrad& overlay)
      : base_(&base), overlay_(&overlay) {}

  std::size_t dim() const { return base_->dim(); }
  std::size_t num_fields() const { return base_->num_fields(); }

  const double* row(std::size_t field, std::uint32_t category) const {
    if (overlay_) {
      const auto& fr = overlay_->rows[field];
      auto it = fr.find(category);
      if (it != fr.end()) return it->second.data();
    }
    return base_->row(field, category);
  }

 private:
  const EmbeddingTable* base_;
  const EmbeddingGrad* overlay_ = nullptr;
};

}  // namespace cell
