#include "cell/embedding.hpp"

namespace cell {

EmbeddingTable::EmbeddingTable(std::vector<std::uint32_t> cardinalities,
                               std::size_t dim, std::uint64_t seed,
                               double init_std)
    : cardinalities_(std::move(cardinalities)), dim_(dim) {
  if (dim_ == 0) throw UserError("embedding dim must be >= 1");
  Rng rng(seed);
  tables_.reserve(cardinalities_.size());
  for (std::uint32_t card : cardinalities_) {
    Vec t(static_cast<std::size_t>(card) * dim_);
    fill_gaussian(t, init_std, rng);
    tables_.push_back(std::move(t));
  }
}

double* EmbeddingTable::row(std::size_t field, std::uint32_t category) {
  return tables_[field].data() + static_cast<std::size_t>(category) * dim_;
}

const double* EmbeddingTable::row(std::size_t field,
                                  std::uint32_t category) const {
  return tables_[field].data() + static_cast<std::size_t>(category) * dim_;
}

const double* EmbeddingTable::lookup(std::size_t field,
                                     std::uint32_t category) const {
  if (field >= cardinalities_.size())
    throw UserError("embedding lookup: field out of range");
  if (category >= cardinalities_[field])
    throw UserError("embedding lookup: category " + std::to_string(category) +
                    " out of range for field " + std::to_string(field));
  return row(field, category);
}

std::vector<const double*> lookup(const EmbeddingTable& table,
                                  const Instance& inst) {
  if (inst.fields.size() != table.num_fields())
    throw UserError("embedding lookup: instance field count mismatch");
  std::vector<const double*> rows(inst.fields.size());
  for (std::size_t f = 0; f < inst.fields.size(); ++f)
    rows[f] = table.lookup(f, inst.fields[f]);
  return rows;
}

}  // namespace cell
