#include "cell/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace cell {

namespace {
constexpr char kMagic[8] = {'C', 'E', 'L', 'L', 'C', 'K', 'P', '1'};
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json header;
  header["version"] = ckpt.version;
  header["stage"] = ckpt.stage;
  header["dim"] = ckpt.dim;
  header["cardinalities"] = ckpt.cardinalities;
  header["assignment_kinds"] = ckpt.assignment_kinds;
  header["config"] = ckpt.config_echo;
  header["extra"] = ckpt.extra;
  nlohmann::json dir = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, values] : ckpt.arrays) {
    dir.push_back({{"name", name},
                   {"offset", offset},
                   {"count", values.size()}});
    offset += values.size() * sizeof(double);
  }
  header["arrays"] = dir;

  const std::string htext = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& [name, values] : ckpt.arrays)
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw UserError("write failure: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw UserError("not a checkpoint file: " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw UserError("truncated checkpoint header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(htext);
  } catch (const nlohmann::json::exception& e) {
    throw UserError("bad checkpoint header in " + path + ": " + e.what());
  }

  Checkpoint ckpt;
  ckpt.version = header.at("version").get<int>();
  if (ckpt.version != 1)
    throw UserError("unsupported checkpoint version in " + path);
  ckpt.stage = header.at("stage").get<int>();
  ckpt.dim = header.at("dim").get<std::size_t>();
  ckpt.cardinalities =
      header.at("cardinalities").get<std::vector<std::uint32_t>>();
  ckpt.assignment_kinds =
      header.at("assignment_kinds").get<std::vector<int>>();
  ckpt.config_echo = header.at("config");
  ckpt.extra = header.at("extra");

  const std::size_t blob_start =
      sizeof(kMagic) + sizeof(std::uint64_t) + hlen;
  for (const auto& entry : header.at("arrays")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t count = entry.at("count").get<std::size_t>();
    Vec values(count);
    in.seekg(static_cast<std::streamoff>(blob_start + offset));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw UserError("truncated checkpoint blob '" + name + "' in " +
                             path);
    ckpt.arrays.emplace_back(name, std::move(values));
  }
  return ckpt;
}

}  // namespace cell
