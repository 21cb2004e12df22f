#include "cell/config.hpp"

#include <fstream>

namespace cell {

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw UserError(std::string("config: bad value for key '") + key + "'");
    }
  }
}

std::vector<std::pair<std::size_t, std::size_t>> read_pairs(
    const nlohmann::json& j, const char* key) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (!j.contains(key)) return out;
  for (const auto& e : j.at(key)) {
    if (!e.is_array() || e.size() != 2)
      throw UserError(std::string("config: '") + key +
                      "' entries must be [i, j] pairs");
    out.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
  }
  return out;
}

}  // namespace

SyntheticConfig synthetic_from_json(const nlohmann::json& j) {
  SyntheticConfig cfg;
  read_key(j, "m", cfg.m);
  read_key(j, "total_categories", cfg.total_categories);
  read_key(j, "latent_dim", cfg.latent_dim);
  cfg.sum_pairs = read_pairs(j, "c1_pairs");
  cfg.product_pairs = read_pairs(j, "c2_pairs");
  read_key(j, "noise_std", cfg.noise_std);
  if (j.contains("threshold_mode")) {
    const std::string mode = j.at("threshold_mode").get<std::string>();
    if (mode == "median")
      cfg.threshold_mode = ThresholdMode::Median;
    else if (mode == "fixed")
      cfg.threshold_mode = ThresholdMode::Fixed;
    else
      throw UserError("config: threshold_mode must be 'median' or 'fixed'");
  }
  read_key(j, "fixed_threshold", cfg.fixed_threshold);
  read_key(j, "n_instances", cfg.n_instances);
  read_key(j, "seed", cfg.seed);
  return cfg;
}

nlohmann::json synthetic_to_json(const SyntheticConfig& cfg) {
  nlohmann::json j;
  j["m"] = cfg.m;
  j["total_categories"] = cfg.total_categories;
  j["latent_dim"] = cfg.latent_dim;
  auto pairs_json = [](const auto& pairs) {
    nlohmann::json arr = nlohmann::json::array();
    for (auto [i, k] : pairs) arr.push_back({i, k});
    return arr;
  };
  j["c1_pairs"] = pairs_json(cfg.sum_pairs);
  j["c2_pairs"] = pairs_json(cfg.product_pairs);
  j["noise_std"] = cfg.noise_std;
  j["threshold_mode"] =
      cfg.threshold_mode == ThresholdMode::Median ? "median" : "fixed";
  j["fixed_threshold"] = cfg.fixed_threshold;
  j["n_instances"] = cfg.n_instances;
  j["seed"] = cfg.seed;
  return j;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  read_key(j, "seed", c.seed);
  read_key(j, "embedding_dim", c.embedding_dim);
  read_key(j, "train_csv", c.train_csv);
  read_key(j, "test_csv", c.test_csv);
  read_key(j, "num_fields", c.num_fields);
  read_key(j, "holdout_fraction", c.holdout_fraction);
  if (j.contains("synthetic"))
    c.synthetic = synthetic_from_json(j.at("synthetic"));
  read_key(j, "synthetic_test_fraction", c.synthetic_test_fraction);

  read_key(j, "adam_beta1", c.adam_beta1);
  read_key(j, "adam_beta2", c.adam_beta2);
  read_key(j, "adam_eps", c.adam_eps);
  read_key(j, "weight_decay", c.weight_decay);

  read_key(j, "dna_learning_rate", c.dna_learning_rate);
  read_key(j, "dna_val_fraction", c.dna_val_fraction);
  read_key(j, "dna_max_epochs", c.dna_max_epochs);
  read_key(j, "dna_patience", c.dna_patience);
  read_key(j, "dna_batch_size", c.dna_batch_size);
  read_key(j, "dna_second_order", c.dna_second_order);
  read_key(j, "dna_hvp_epsilon", c.dna_hvp_epsilon);
  read_key(j, "dna_snapshot_epochs", c.dna_snapshot_epochs);

  read_key(j, "rda_learning_rate", c.rda_learning_rate);
  read_key(j, "rda_c", c.rda_c);
  read_key(j, "rda_mu", c.rda_mu);
  read_key(j, "genome_learning_rate", c.genome_learning_rate);
  read_key(j, "mutation_lambda", c.mutation_lambda);
  read_key(j, "mutation_sigma", c.mutation_sigma);
  read_key(j, "mutation_tau", c.mutation_tau);
  read_key(j, "genome_max_epochs", c.genome_max_epochs);
  read_key(j, "genome_patience", c.genome_patience);
  read_key(j, "genome_batch_size", c.genome_batch_size);
  read_key(j, "genome_snapshot_steps", c.genome_snapshot_steps);
  read_key(j, "genome_normalize", c.genome_normalize);
  read_key(j, "relevance_init_scale", c.relevance_init_scale);

  read_key(j, "mlp_depth", c.mlp_depth);
  read_key(j, "mlp_width", c.mlp_width);
  read_key(j, "mlp_learning_rate", c.mlp_learning_rate);
  read_key(j, "mlp_max_epochs", c.mlp_max_epochs);
  read_key(j, "mlp_patience", c.mlp_patience);
  read_key(j, "mlp_batch_size", c.mlp_batch_size);
  read_key(j, "mlp_val_fraction", c.mlp_val_fraction);
  read_key(j, "mlp_warm_start_ff", c.mlp_warm_start_ff);
  read_key(j, "mlp_reset_embeddings", c.mlp_reset_embeddings);

  read_key(j, "skip_dna", c.skip_dna);
  read_key(j, "skip_genome", c.skip_genome);
  return c;
}

nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["embedding_dim"] = c.embedding_dim;
  j["train_csv"] = c.train_csv;
  j["test_csv"] = c.test_csv;
  j["num_fields"] = c.num_fields;
  j["holdout_fraction"] = c.holdout_fraction;
  if (c.synthetic) j["synthetic"] = synthetic_to_json(*c.synthetic);
  j["synthetic_test_fraction"] = c.synthetic_test_fraction;

  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["weight_decay"] = c.weight_decay;

  j["dna_learning_rate"] = c.dna_learning_rate;
  j["dna_val_fraction"] = c.dna_val_fraction;
  j["dna_max_epochs"] = c.dna_max_epochs;
  j["dna_patience"] = c.dna_patience;
  j["dna_batch_size"] = c.dna_batch_size;
  j["dna_second_order"] = c.dna_second_order;
  j["dna_hvp_epsilon"] = c.dna_hvp_epsilon;
  j["dna_snapshot_epochs"] = c.dna_snapshot_epochs;

  j["rda_learning_rate"] = c.rda_learning_rate;
  j["rda_c"] = c.rda_c;
  j["rda_mu"] = c.rda_mu;
  j["genome_learning_rate"] = c.genome_learning_rate;
  j["mutation_lambda"] = c.mutation_lambda;
  j["mutation_sigma"] = c.mutation_sigma;
  j["mutation_tau"] = c.mutation_tau;
  j["genome_max_epochs"] = c.genome_max_epochs;
  j["genome_patience"] = c.genome_patience;
  j["genome_batch_size"] = c.genome_batch_size;
  j["genome_snapshot_steps"] = c.genome_snapshot_steps;
  j["genome_normalize"] = c.genome_normalize;
  j["relevance_init_scale"] = c.relevance_init_scale;

  j["mlp_depth"] = c.mlp_depth;
  j["mlp_width"] = c.mlp_width;
  j["mlp_learning_rate"] = c.mlp_learning_rate;
  j["mlp_max_epochs"] = c.mlp_max_epochs;
  j["mlp_patience"] = c.mlp_patience;
  j["mlp_batch_size"] = c.mlp_batch_size;
  j["mlp_val_fraction"] = c.mlp_val_fraction;
  j["mlp_warm_start_ff"] = c.mlp_warm_start_ff;
  j["mlp_reset_embeddings"] = c.mlp_reset_embeddings;

  j["skip_dna"] = c.skip_dna;
  j["skip_genome"] = c.skip_genome;
  return j;
}

namespace {
nlohmann::json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open config file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UserError("bad JSON in " + path + ": " + e.what());
  }
}
}  // namespace

PipelineConfig load_config(const std::string& path) {
  return config_from_json(parse_file(path));
}

SyntheticConfig load_synthetic_config(const std::string& path) {
  return synthetic_from_json(parse_file(path));
}

}  // namespace cell
