#include "cell/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace cell {

namespace {

// FNV-1a over the little-endian bytes of a double array. Used only as a
// reproducibility fingerprint, not for security.
std::string fnv1a_hex(const std::vector<Vec>& arrays) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const unsigned char* p, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      h ^= p[k];
      h *= 1099511628211ull;
    }
  };
  for (const Vec& a : arrays)
    for (double x : a)
      mix(reinterpret_cast<const unsigned char*>(&x), sizeof(double));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

long long parse_int_token(std::string_view tok, std::size_t line_no) {
  while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t'))
    tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' ||
                          tok.back() == '\r'))
    tok.remove_suffix(1);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw UserError("parse error at line " + std::to_string(line_no) +
                    ": bad integer token '" + std::string(tok) + "'");
  return value;
}

}  // namespace

Dataset load_csv(const std::string& path, std::size_t num_fields) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open dataset file: " + path);
  Dataset ds;
  ds.name = path;
  ds.field_cardinalities.assign(num_fields, 0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    Instance inst;
    inst.fields.reserve(num_fields);
    std::size_t start = 0;
    std::size_t token_idx = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      std::size_t end = comma == std::string::npos ? line.size() : comma;
      std::string_view tok(line.data() + start, end - start);
      long long v = parse_int_token(tok, line_no);
      if (token_idx == 0) {
        if (v != 0 && v != 1)
          throw UserError("parse error at line " + std::to_string(line_no) +
                          ": label must be 0 or 1");
        inst.label = static_cast<int>(v);
      } else {
        if (v < 0)
          throw UserError("parse error at line " + std::to_string(line_no) +
                          ": negative category index");
        if (token_idx > num_fields)
          throw UserError("schema error at line " + std::to_string(line_no) +
                          ": expected " + std::to_string(num_fields) +
                          " fields");
        inst.fields.push_back(static_cast<std::uint32_t>(v));
      }
      ++token_idx;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (inst.fields.size() != num_fields)
      throw UserError("schema error at line " + std::to_string(line_no) +
                      ": expected " + std::to_string(num_fields) +
                      " fields, got " + std::to_string(inst.fields.size()));
    for (std::size_t f = 0; f < num_fields; ++f)
      ds.field_cardinalities[f] =
          std::max(ds.field_cardinalities[f], inst.fields[f] + 1);
    ds.instances.push_back(std::move(inst));
  }
  if (ds.instances.empty()) throw UserError("no instances in " + path);
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write dataset file: " + path);
  std::string line;
  for (const Instance& inst : ds.instances) {
    line.clear();
    line += inst.label ? '1' : '0';
    for (std::uint32_t idx : inst.fields) {
      line += ',';
      line += std::to_string(idx);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw UserError("write failure: " + path);
}

std::array<Dataset, 3> split(const Dataset& ds, const SplitRatios& ratios,
                             std::uint64_t seed) {
  if (ds.instances.empty()) throw UserError("cannot split an empty dataset");
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0)
    throw UserError("split ratios must be non-negative");
  double sum = ratios.train + ratios.val + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw UserError("split ratios must sum to 1");

  const std::size_t n = ds.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const std::size_t n_val = static_cast<std::size_t>(
      std::floor(ratios.val * static_cast<double>(n)));
  const std::size_t n_test = static_cast<std::size_t>(
      std::floor(ratios.test * static_cast<double>(n)));
  const std::size_t n_train = n - n_val - n_test;

  std::array<Dataset, 3> out;
  const char* tags[3] = {"train", "val", "test"};
  std::size_t sizes[3] = {n_train, n_val, n_test};
  std::size_t pos = 0;
  for (int s = 0; s < 3; ++s) {
    out[s].field_cardinalities = ds.field_cardinalities;
    out[s].name = ds.name + "/" + tags[s];
    out[s].instances.reserve(sizes[s]);
    for (std::size_t k = 0; k < sizes[s]; ++k)
      out[s].instances.push_back(ds.instances[perm[pos++]]);
  }
  return out;
}

std::vector<std::vector<std::size_t>> batch_indices(
    std::size_t n, std::size_t batch_size,
    std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw UserError("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> batches;
  batches.reserve((n + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::pair<Dataset, GroundTruth> generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.m < 2) throw UserError("synthetic config: need at least 2 fields");
  if (cfg.total_categories < cfg.m)
    throw UserError("synthetic config: need at least one category per field");
  if (cfg.latent_dim < 1) throw UserError("synthetic config: latent_dim >= 1");
  if (cfg.n_instances < 1) throw UserError("synthetic config: n_instances >= 1");
  if (cfg.noise_std < 0) throw UserError("synthetic config: noise_std >= 0");
  auto check_pairs = [&](const std::vector<std::pair<std::size_t, std::size_t>>&
                             pairs) {
    for (auto [i, j] : pairs)
      if (i >= cfg.m || j >= cfg.m || i == j)
        throw UserError("synthetic config: invalid pair (" +
                        std::to_string(i) + "," + std::to_string(j) + ")");
  };
  check_pairs(cfg.sum_pairs);
  check_pairs(cfg.product_pairs);
  for (auto [i, j] : cfg.sum_pairs)
    for (auto [k, l] : cfg.product_pairs)
      if ((i == k && j == l) || (i == l && j == k))
        throw UserError("synthetic config: C1 and C2 overlap on (" +
                        std::to_string(i) + "," + std::to_string(j) + ")");

  // Near-even split of N categories over m fields; spare categories go to
  // the lowest-numbered fields.
  std::vector<std::uint32_t> cards(cfg.m,
                                   static_cast<std::uint32_t>(
                                       cfg.total_categories / cfg.m));
  for (std::size_t f = 0; f < cfg.total_categories % cfg.m; ++f) cards[f] += 1;

  Rng rng(cfg.seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  std::vector<Vec> latents;
  latents.reserve(cfg.total_categories);
  std::vector<std::size_t> field_offset(cfg.m, 0);
  {
    std::size_t off = 0;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t f = 0; f < cfg.m; ++f) {
      field_offset[f] = off;
      for (std::uint32_t c = 0; c < cards[f]; ++c) {
        Vec v(cfg.latent_dim);
        for (double& x : v) x = gauss(rng) * scale;
        latents.push_back(std::move(v));
      }
      off += cards[f];
    }
  }

  Dataset ds;
  ds.name = "synthetic";
  ds.field_cardinalities = cards;
  ds.instances.resize(cfg.n_instances);
  for (std::size_t t = 0; t < cfg.n_instances; ++t) {
    auto& inst = ds.instances[t];
    inst.fields.resize(cfg.m);
    for (std::size_t f = 0; f < cfg.m; ++f) {
      std::uniform_int_distribution<std::uint32_t> pick(0, cards[f] - 1);
      inst.fields[f] = pick(rng);
    }
  }

  auto latent_of = [&](const Instance& inst, std::size_t f) -> const Vec& {
    return latents[field_offset[f] + inst.fields[f]];
  };

  Vec q(cfg.n_instances, 0.0);
  for (std::size_t t = 0; t < cfg.n_instances; ++t) {
    const Instance& inst = ds.instances[t];
    double acc = 0.0;
    for (auto [i, j] : cfg.sum_pairs) {
      const Vec& a = latent_of(inst, i);
      const Vec& b = latent_of(inst, j);
      for (std::size_t k = 0; k < cfg.latent_dim; ++k) acc += a[k] + b[k];
    }
    for (auto [i, j] : cfg.product_pairs) {
      const Vec& a = latent_of(inst, i);
      const Vec& b = latent_of(inst, j);
      for (std::size_t k = 0; k < cfg.latent_dim; ++k) acc += a[k] * b[k];
    }
    q[t] = acc;
  }

  if (cfg.noise_std > 0) {
    double mean = std::accumulate(q.begin(), q.end(), 0.0) /
                  static_cast<double>(q.size());
    double var = 0.0;
    for (double x : q) var += (x - mean) * (x - mean);
    var /= static_cast<double>(q.size());
    const double eps_std = cfg.noise_std * std::sqrt(var);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (double& x : q) x += eps_std * noise(rng);
  }

  double threshold = cfg.fixed_threshold;
  if (cfg.threshold_mode == ThresholdMode::Median) {
    Vec sorted = q;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    threshold = n % 2 == 1 ? sorted[n / 2]
                           : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  }

  std::size_t positives = 0;
  for (std::size_t t = 0; t < cfg.n_instances; ++t) {
    ds.instances[t].label = q[t] >= threshold ? 1 : 0;
    positives += static_cast<std::size_t>(ds.instances[t].label);
  }

  GroundTruth gt;
  for (auto [i, j] : cfg.sum_pairs)
    gt.pairs.push_back({std::min(i, j), std::max(i, j), 0});
  for (auto [i, j] : cfg.product_pairs)
    gt.pairs.push_back({std::min(i, j), std::max(i, j), 1});
  gt.threshold = threshold;
  gt.seed = cfg.seed;
  gt.field_cardinalities = cards;
  gt.latents_digest = fnv1a_hex(latents);
  gt.latents = std::move(latents);
  gt.degenerate = positives == 0 || positives == cfg.n_instances;
  return {std::move(ds), std::move(gt)};
}

void save_ground_truth(const GroundTruth& gt, const std::string& path) {
  nlohmann::json j;
  j["pairs"] = nlohmann::json::array();
  for (const PlantedPair& p : gt.pairs)
    j["pairs"].push_back({{"i", p.i}, {"j", p.j}, {"op_code", p.op_code}});
  j["threshold"] = gt.threshold;
  j["seed"] = gt.seed;
  j["latents_digest"] = gt.latents_digest;
  j["field_cardinalities"] = gt.field_cardinalities;
  j["degenerate"] = gt.degenerate;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write ground-truth file: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw UserError("write failure: " + path);
}

double information_value(const Dataset& ds, std::size_t field) {
  if (field >= ds.num_fields())
    throw UserError("information_value: field index out of range");
  const std::uint32_t card = ds.field_cardinalities[field];
  std::vector<double> pos(card, 0.0), neg(card, 0.0);
  double total_pos = 0.0, total_neg = 0.0;
  for (const Instance& inst : ds.instances) {
    if (inst.label) {
      pos[inst.fields[field]] += 1.0;
      total_pos += 1.0;
    } else {
      neg[inst.fields[field]] += 1.0;
      total_neg += 1.0;
    }
  }
  if (total_pos == 0.0 || total_neg == 0.0)
    throw UserError("information_value: dataset needs both classes");
  double iv = 0.0;
  for (std::uint32_t c = 0; c < card; ++c) {
    double p = pos[c], n = neg[c];
    if (p == 0.0 || n == 0.0) {
      p += 0.5;
      n += 0.5;
    }
    const double pf = p / total_pos;
    const double nf = n / total_neg;
    iv += (pf - nf) * std::log(pf / nf);
  }
  return iv;
}

}  // namespace cell
