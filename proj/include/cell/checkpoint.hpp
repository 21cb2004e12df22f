#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cell/common.hpp"
#include "json.hpp"

namespace cell {

// Versioned container: a JSON header followed by little-endian 64-bit-float
// blobs at declared offsets. Loads reproduce the stored doubles exactly on
// the same platform.
struct Checkpoint {
  int version = 1;
  int stage = 0;  // 1, 2 or 3
  std::size_t dim = 0;
  std::vector<std::uint32_t> cardinalities;
  std::vector<int> assignment_kinds;
  nlohmann::json config_echo;
  nlohmann::json extra;  // histories, gene-map frames, mutation events
  std::vector<std::pair<std::string, Vec>> arrays;  // ordered blobs

  const Vec* find_array(const std::string& name) const {
    for (const auto& [n, v] : arrays)
      if (n == name) return &v;
    return nullptr;
  }
  const Vec& require_array(const std::string& name) const {
    const Vec* v = find_array(name);
    if (!v) throw UserError("checkpoint: missing array '" + name + "'");
    return *v;
  }
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cell
