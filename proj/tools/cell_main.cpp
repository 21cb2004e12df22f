// cell: CLI driver for the three-stage feature-interaction selection
// pipeline (operation search, relevance search, retraining).
//
// Exit codes: 0 success, 1 user error (bad input/config), 2 internal error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cell/checkpoint.hpp"
#include "cell/config.hpp"
#include "cell/metrics.hpp"
#include "cell/pipeline.hpp"

namespace {

int parse_stage(const std::string& s) {
  if (s == "all") return 0;
  if (s == "1" || s == "2" || s == "3") return s[0] - '0';
  throw cell::UserError("--stage must be 1, 2, 3 or all");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CELL: evolutionary feature-interaction selection"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand(
      "synth", "generate a synthetic poly-2 dataset + ground truth");
  std::string synth_config, synth_out = ".", synth_name = "synthetic";
  std::uint64_t synth_seed = 0;
  bool synth_seed_set = false;
  synth->add_option("--config", synth_config, "synthetic config JSON")
      ->required();
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--name", synth_name, "output file basename");
  synth->add_option("--seed", synth_seed, "override config seed")
      ->each([&](const std::string&) { synth_seed_set = true; });

  // train
  auto* train = app.add_subcommand("train", "run the staged training pipeline");
  std::string train_config, train_out = ".", train_stage = "all";
  std::uint64_t train_seed = 0;
  bool train_seed_set = false, flag_skip_dna = false, flag_skip_genome = false;
  train->add_option("--config", train_config, "pipeline config JSON")
      ->required();
  train->add_option("--out", train_out, "output directory");
  train->add_option("--stage", train_stage, "1|2|3|all (later stages resume "
                                            "from checkpoints in --out)");
  train->add_option("--seed", train_seed, "override config seed")
      ->each([&](const std::string&) { train_seed_set = true; });
  train->add_flag("--skip-dna", flag_skip_dna,
                  "assign operations uniformly at random");
  train->add_flag("--skip-genome", flag_skip_genome,
                  "keep all features/interactions with relevance 1");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a stage-3 checkpoint");
  std::string eval_ckpt, eval_data, eval_out;
  eval->add_option("--checkpoint", eval_ckpt, "stage-3 checkpoint")->required();
  eval->add_option("--data", eval_data, "CSV dataset to score")->required();
  eval->add_option("--out", eval_out, "also write the report to this file");

  // diagnose
  auto* diag = app.add_subcommand(
      "diagnose", "export gene maps and the mutation log from a checkpoint");
  std::string diag_ckpt, diag_out = ".";
  std::size_t diag_top = 10;
  diag->add_option("--checkpoint", diag_ckpt, "checkpoint with history")
      ->required();
  diag->add_option("--out", diag_out, "output directory");
  diag->add_option("--top", diag_top, "how many interactions to list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      cell::SyntheticConfig cfg = cell::load_synthetic_config(synth_config);
      if (synth_seed_set) cfg.seed = synth_seed;
      auto [ds, gt] = cell::generate_synthetic(cfg);
      std::filesystem::create_directories(synth_out);
      const std::string csv = synth_out + "/" + synth_name + ".csv";
      const std::string gtp =
          synth_out + "/" + synth_name + ".groundtruth.json";
      cell::save_csv(ds, csv);
      cell::save_ground_truth(gt, gtp);
      std::size_t pos = 0;
      for (const auto& inst : ds.instances)
        pos += static_cast<std::size_t>(inst.label);
      std::printf("wrote %s (%zu instances, positive ratio %.4f)\n",
                  csv.c_str(), ds.size(),
                  static_cast<double>(pos) / static_cast<double>(ds.size()));
      std::printf("wrote %s (threshold %.6g%s)\n", gtp.c_str(), gt.threshold,
                  gt.degenerate ? ", WARNING: degenerate labels" : "");
      return 0;
    }

    if (*train) {
      cell::PipelineConfig cfg = cell::load_config(train_config);
      if (train_seed_set) cfg.seed = train_seed;
      if (flag_skip_dna) cfg.skip_dna = true;
      if (flag_skip_genome) cfg.skip_genome = true;
      const int stage = parse_stage(train_stage);
      cell::TrainOutputs outs = cell::run_training(cfg, train_out, stage);
      if (stage == 0 || stage == 1)
        std::printf("stage 1 checkpoint: %s\n", outs.stage1_ckpt.c_str());
      if (stage == 0 || stage == 2)
        std::printf("stage 2 checkpoint: %s\n", outs.stage2_ckpt.c_str());
      if (stage == 0 || stage == 3)
        std::printf("stage 3 checkpoint: %s\n", outs.stage3_ckpt.c_str());
      if (outs.test_report)
        std::printf("test report:\n%s\n", outs.test_report->to_json().c_str());
      return 0;
    }

    if (*eval) {
      cell::Checkpoint ck = cell::load_checkpoint(eval_ckpt);
      cell::FinalModel model = cell::model_from_checkpoint(ck);
      cell::Dataset ds =
          cell::load_csv(eval_data, model.table().num_fields());
      cell::Vec preds = model.predict_all(ds);
      std::vector<int> labels(ds.size());
      for (std::size_t i = 0; i < ds.size(); ++i)
        labels[i] = ds.instances[i].label;
      cell::EvalReport report = cell::evaluate(preds, labels);
      std::printf("%s\n", report.to_json().c_str());
      if (!eval_out.empty()) {
        std::ofstream out(eval_out, std::ios::binary);
        out << report.to_json() << "\n";
        if (!out) throw cell::UserError("cannot write report: " + eval_out);
      }
      return 0;
    }

    if (*diag) {
      cell::Checkpoint ck = cell::load_checkpoint(diag_ckpt);
      std::string summary =
          cell::diagnose_checkpoint(ck, diag_out, diag_top);
      std::printf("%s", summary.c_str());
      return 0;
    }
  } catch (const cell::UserError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
  return 1;
}
