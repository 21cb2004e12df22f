#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cell/dataset.hpp"
#include "json.hpp"

namespace cell {

// Flat pipeline configuration. Every training hyper-parameter carries the
// published default; see README for the full key reference.
struct PipelineConfig {
  std::uint64_t seed = 1;
  std::size_t embedding_dim = 8;

  // Data: either CSV paths or an inline synthetic block.
  std::string train_csv;
  std::string test_csv;
  std::size_t num_fields = 0;
  double holdout_fraction = 0.0;  // carve a test split when test_csv is empty
  std::optional<SyntheticConfig> synthetic;
  double synthetic_test_fraction = 1.0 / 6.0;

  // Shared Adam hyper-parameters.
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-3;

  // Stage I: operation search.
  double dna_learning_rate = 1e-3;
  double dna_val_fraction = 0.5;
  std::size_t dna_max_epochs = 15;
  std::size_t dna_patience = 3;
  std::size_t dna_batch_size = 2048;
  bool dna_second_order = false;
  double dna_hvp_epsilon = 1e-2;
  std::size_t dna_snapshot_epochs = 1;

  // Stage II: relevance search.
  double rda_learning_rate = 1e-3;
  double rda_c = 0.5;
  double rda_mu = 0.8;
  double genome_learning_rate = 1e-3;
  double mutation_lambda = 0.1;
  double mutation_sigma = 5.0;
  long long mutation_tau = 100;
  std::size_t genome_max_epochs = 30;
  std::size_t genome_patience = 3;
  std::size_t genome_batch_size = 2048;
  long long genome_snapshot_steps = 0;  // 0 -> mutation_tau
  bool genome_normalize = false;
  double relevance_init_scale = 0.01;

  // Stage III: retraining.
  std::size_t mlp_depth = 2;
  std::size_t mlp_width = 400;
  double mlp_learning_rate = 1e-3;
  std::size_t mlp_max_epochs = 30;
  std::size_t mlp_patience = 3;
  std::size_t mlp_batch_size = 2048;
  double mlp_val_fraction = 0.1;
  bool mlp_warm_start_ff = false;
  bool mlp_reset_embeddings = false;

  // Ablations.
  bool skip_dna = false;
  bool skip_genome = false;
};

PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::string& path);

SyntheticConfig synthetic_from_json(const nlohmann::json& j);
nlohmann::json synthetic_to_json(const SyntheticConfig& cfg);
SyntheticConfig load_synthetic_config(const std::string& path);

}  // namespace cell
