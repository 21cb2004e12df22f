#pragma once

#include <optional>
#include <string>

#include "cell/checkpoint.hpp"
#include "cell/config.hpp"
#include "cell/dna.hpp"
#include "cell/genome.hpp"
#include "cell/metrics.hpp"
#include "cell/model.hpp"

namespace cell {

// In-memory result of running the staged pipeline on resolved datasets.
struct PipelineArtifacts {
  std::optional<DnaResult> dna;
  OperationAssignment assignment;  // after stage I (or random when ablated)
  std::optional<GenomeResult> genome;
  RelevanceFitness fitness;  // after stage II (all ones when ablated)
  std::optional<FinalModel> model;
  std::vector<MlpEpochRecord> mlp_history;
  std::optional<EvalReport> test_report;
};

struct ResolvedData {
  Dataset train;
  std::optional<Dataset> test;
  std::optional<GroundTruth> ground_truth;
};

ResolvedData resolve_datasets(const PipelineConfig& cfg);

// Stage-level configs derived from the pipeline config (seeds included).
DnaConfig make_dna_config(const PipelineConfig& cfg);
GenomeConfig make_genome_config(const PipelineConfig& cfg);
MlpConfig make_mlp_config(const PipelineConfig& cfg);
EmbeddingTable make_embedding_table(const PipelineConfig& cfg,
                                    const Dataset& train);

// Runs stages I-III in memory (all three; ablation flags honored).
PipelineArtifacts run_stages(const PipelineConfig& cfg, const Dataset& train,
                             const Dataset* test);

// CLI-facing variant: resolves datasets, supports per-stage execution with
// checkpoint resume, and writes checkpoints plus exports into out_dir.
// stage: 0 = all, otherwise 1..3.
struct TrainOutputs {
  std::string stage1_ckpt, stage2_ckpt, stage3_ckpt;
  std::optional<EvalReport> test_report;
};
TrainOutputs run_training(const PipelineConfig& cfg, const std::string& out_dir,
                          int stage);

// Rebuilds the stage-III model from a checkpoint; predictions match the
// saved model bit-for-bit.
FinalModel model_from_checkpoint(const Checkpoint& ckpt);

// Writes gene-map CSVs/PGMs and the mutation log from a checkpoint and
// returns a text summary of the top-k interactions by |relevance|.
std::string diagnose_checkpoint(const Checkpoint& ckpt,
                                const std::string& out_dir, std::size_t top_k);

}  // namespace cell
