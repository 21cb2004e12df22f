#include "cell/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace cell {

namespace {

// Sub-seed salts for the pipeline stages.
enum : std::uint64_t {
  kSeedEmbedding = 1,
  kSeedDna = 2,
  kSeedGenome = 3,
  kSeedMlp = 4,
  kSeedRandomAssign = 5,
  kSeedHoldout = 6,
  kSeedMlpVal = 7,
  kSeedSyntheticSplit = 8,
};

AdamConfig shared_adam(const PipelineConfig& c) {
  AdamConfig a;
  a.beta1 = c.adam_beta1;
  a.beta2 = c.adam_beta2;
  a.eps = c.adam_eps;
  a.weight_decay = c.weight_decay;
  return a;
}

}  // namespace

DnaConfig make_dna_config(const PipelineConfig& c) {
  DnaConfig d;
  d.learning_rate = c.dna_learning_rate;
  d.val_fraction = c.dna_val_fraction;
  d.max_epochs = c.dna_max_epochs;
  d.patience = c.dna_patience;
  d.second_order = c.dna_second_order;
  d.hvp_epsilon = c.dna_hvp_epsilon;
  d.batch_size = c.dna_batch_size;
  d.seed = derive_seed(c.seed, kSeedDna);
  d.adam = shared_adam(c);
  d.snapshot_every_epochs = c.dna_snapshot_epochs;
  return d;
}

GenomeConfig make_genome_config(const PipelineConfig& c) {
  GenomeConfig g;
  g.rda = RdaConfig{c.rda_learning_rate, c.rda_c, c.rda_mu};
  g.adam = shared_adam(c);
  g.adam.lr = c.genome_learning_rate;
  g.mutation = MutationConfig{c.mutation_lambda, c.mutation_sigma,
                              c.mutation_tau};
  g.batch_size = c.genome_batch_size;
  g.max_epochs = c.genome_max_epochs;
  g.patience = c.genome_patience;
  g.seed = derive_seed(c.seed, kSeedGenome);
  g.snapshot_every = c.genome_snapshot_steps;
  g.normalize_interactions = c.genome_normalize;
  g.relevance_init_scale = c.relevance_init_scale;
  return g;
}

MlpConfig make_mlp_config(const PipelineConfig& c) {
  MlpConfig m;
  m.depth = c.mlp_depth;
  m.width = c.mlp_width;
  m.learning_rate = c.mlp_learning_rate;
  m.adam = shared_adam(c);
  m.batch_size = c.mlp_batch_size;
  m.max_epochs = c.mlp_max_epochs;
  m.patience = c.mlp_patience;
  m.seed = derive_seed(c.seed, kSeedMlp);
  m.warm_start_ff = c.mlp_warm_start_ff;
  m.reset_embeddings = c.mlp_reset_embeddings;
  return m;
}

EmbeddingTable make_embedding_table(const PipelineConfig& cfg,
                                    const Dataset& train) {
  return EmbeddingTable(train.field_cardinalities, cfg.embedding_dim,
                        derive_seed(cfg.seed, kSeedEmbedding));
}

namespace {

OperationAssignment random_assignment(std::size_t m, std::size_t dim,
                                      std::uint64_t seed) {
  const std::size_t P = pair_count(m);
  OperationAssignment a;
  a.kinds.resize(P);
  a.ff.resize(P);
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, kNumOpKinds - 1);
  for (std::size_t p = 0; p < P; ++p) {
    a.kinds[p] = static_cast<OpKind>(pick(rng));
    if (op_has_ff(a.kinds[p])) a.ff[p] = init_ff(a.kinds[p], dim, rng);
  }
  return a;
}

// ---------------------------------------------------------------------------
// JSON serialization of histories, frames and events
// ---------------------------------------------------------------------------

nlohmann::json frames_to_json(const std::vector<GeneMapFrame>& frames) {
  nlohmann::json arr = nlohmann::json::array();
  for (const GeneMapFrame& fr : frames)
    arr.push_back({{"iteration", fr.iteration},
                   {"stage", fr.stage},
                   {"m", fr.m},
                   {"codes", fr.op_codes},
                   {"relevance", fr.relevance}});
  return arr;
}

std::vector<GeneMapFrame> frames_from_json(const nlohmann::json& arr) {
  std::vector<GeneMapFrame> frames;
  for (const auto& e : arr) {
    GeneMapFrame fr;
    fr.iteration = e.at("iteration").get<long long>();
    fr.stage = e.at("stage").get<std::string>();
    fr.m = e.at("m").get<std::size_t>();
    fr.op_codes = e.at("codes").get<std::vector<int>>();
    fr.relevance = e.at("relevance").get<Vec>();
    frames.push_back(std::move(fr));
  }
  return frames;
}

nlohmann::json events_to_json(const std::vector<MutationEvent>& events) {
  nlohmann::json arr = nlohmann::json::array();
  for (const MutationEvent& ev : events)
    arr.push_back({{"step", ev.step},
                   {"i", ev.i},
                   {"j", ev.j},
                   {"old", static_cast<int>(ev.old_kind)},
                   {"new", static_cast<int>(ev.new_kind)},
                   {"beta", ev.beta}});
  return arr;
}

nlohmann::json dna_history_json(const DnaResult& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const DnaEpochRecord& e : r.history)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"op_fitness", e.op_fitness}});
  return {{"epochs", epochs},
          {"epochs_run", r.epochs_run},
          {"max_softmax_deviation", r.max_softmax_deviation}};
}

nlohmann::json genome_history_json(const GenomeResult& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const GenomeEpochRecord& e : r.history)
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}});
  return {{"epochs", epochs},
          {"epochs_run", r.epochs_run},
          {"steps_run", r.steps_run}};
}

// ---------------------------------------------------------------------------
// Checkpoint assembly
// ---------------------------------------------------------------------------

void put_embeddings(Checkpoint& ck, const EmbeddingTable& table) {
  for (std::size_t f = 0; f < table.num_fields(); ++f)
    ck.arrays.emplace_back("embeddings/field_" + std::to_string(f),
                           table.field_data(f));
}

EmbeddingTable embeddings_from(const Checkpoint& ck) {
  EmbeddingTable table(ck.cardinalities, ck.dim, 0);
  for (std::size_t f = 0; f < table.num_fields(); ++f) {
    const Vec& data =
        ck.require_array("embeddings/field_" + std::to_string(f));
    if (data.size() != table.field_data(f).size())
      throw UserError("checkpoint: embedding shape mismatch in field " +
                      std::to_string(f));
    table.field_data(f) = data;
  }
  return table;
}

void put_assignment(Checkpoint& ck, const OperationAssignment& a) {
  ck.assignment_kinds.clear();
  for (OpKind k : a.kinds) ck.assignment_kinds.push_back(static_cast<int>(k));
  for (std::size_t p = 0; p < a.kinds.size(); ++p) {
    if (!op_has_ff(a.kinds[p])) continue;
    ck.arrays.emplace_back("assignment/ff_w/" + std::to_string(p),
                           a.ff[p].weight);
    ck.arrays.emplace_back("assignment/ff_b/" + std::to_string(p),
                           a.ff[p].bias);
  }
}

OperationAssignment assignment_from(const Checkpoint& ck) {
  OperationAssignment a;
  for (int code : ck.assignment_kinds) a.kinds.push_back(op_from_code(code));
  a.ff.resize(a.kinds.size());
  for (std::size_t p = 0; p < a.kinds.size(); ++p) {
    if (!op_has_ff(a.kinds[p])) continue;
    a.ff[p].weight = ck.require_array("assignment/ff_w/" + std::to_string(p));
    a.ff[p].bias = ck.require_array("assignment/ff_b/" + std::to_string(p));
  }
  return a;
}

void write_mutation_log(const nlohmann::json& events,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write mutation log: " + path);
  char buf[256];
  for (const auto& ev : events) {
    std::snprintf(buf, sizeof(buf),
                  "{\"step\":%lld,\"i\":%zu,\"j\":%zu,\"old\":%d,\"new\":%d,"
                  "\"beta\":%.17g}\n",
                  ev.at("step").get<long long>(),
                  ev.at("i").get<std::size_t>(), ev.at("j").get<std::size_t>(),
                  ev.at("old").get<int>(), ev.at("new").get<int>(),
                  ev.at("beta").get<double>());
    out << buf;
  }
  if (!out) throw UserError("write failure: " + path);
}

void write_stage_exports(const std::string& out_dir, const std::string& tag,
                         const std::vector<GeneMapFrame>& frames) {
  if (frames.empty()) return;
  export_csv(frames, out_dir + "/gene_map_" + tag + ".csv");
  export_pgm(frames.back(), out_dir + "/gene_map_" + tag + ".codes.pgm",
             out_dir + "/gene_map_" + tag + ".relevance.pgm");
}

}  // namespace

ResolvedData resolve_datasets(const PipelineConfig& cfg) {
  ResolvedData data;
  if (cfg.synthetic) {
    auto [ds, gt] = generate_synthetic(*cfg.synthetic);
    data.ground_truth = std::move(gt);
    if (cfg.synthetic_test_fraction > 0.0) {
      auto parts = split(ds,
                         {1.0 - cfg.synthetic_test_fraction, 0.0,
                          cfg.synthetic_test_fraction},
                         derive_seed(cfg.seed, kSeedSyntheticSplit));
      data.train = std::move(parts[0]);
      data.test = std::move(parts[2]);
    } else {
      data.train = std::move(ds);
    }
    return data;
  }
  if (cfg.train_csv.empty())
    throw UserError("config: either train_csv or a synthetic block is required");
  if (cfg.num_fields == 0)
    throw UserError("config: num_fields is required with CSV data");
  data.train = load_csv(cfg.train_csv, cfg.num_fields);
  if (!cfg.test_csv.empty()) {
    data.test = load_csv(cfg.test_csv, cfg.num_fields);
  } else if (cfg.holdout_fraction > 0.0) {
    auto parts = split(data.train,
                       {1.0 - cfg.holdout_fraction, 0.0, cfg.holdout_fraction},
                       derive_seed(cfg.seed, kSeedHoldout));
    data.train = std::move(parts[0]);
    data.test = std::move(parts[2]);
  }
  return data;
}

PipelineArtifacts run_stages(const PipelineConfig& cfg, const Dataset& train,
                             const Dataset* test) {
  PipelineArtifacts art;
  const std::size_t m = train.num_fields();
  EmbeddingTable table(train.field_cardinalities, cfg.embedding_dim,
                       derive_seed(cfg.seed, kSeedEmbedding));

  if (cfg.skip_dna) {
    art.assignment = random_assignment(m, cfg.embedding_dim,
                                       derive_seed(cfg.seed, kSeedRandomAssign));
  } else {
    art.dna = run_dna_search(train, table, make_dna_config(cfg));
    art.assignment = art.dna->assignment;
  }

  if (cfg.skip_genome) {
    art.fitness.alpha.assign(m, 1.0);
    art.fitness.beta.assign(pair_count(m), 1.0);
  } else {
    art.genome =
        run_genome_search(train, table, art.assignment, make_genome_config(cfg));
    art.assignment = art.genome->assignment;
    art.fitness = art.genome->fitness;
  }

  auto parts = split(train,
                     {1.0 - cfg.mlp_val_fraction, cfg.mlp_val_fraction, 0.0},
                     derive_seed(cfg.seed, kSeedMlpVal));
  art.model = train_final(parts[0], parts[1], std::move(table), art.assignment,
                          art.fitness.alpha, art.fitness.beta,
                          make_mlp_config(cfg), &art.mlp_history);

  if (test && !test->instances.empty()) {
    Vec preds = art.model->predict_all(*test);
    std::vector<int> labels(test->size());
    for (std::size_t i = 0; i < test->size(); ++i)
      labels[i] = test->instances[i].label;
    art.test_report = evaluate(preds, labels);
  }
  return art;
}

TrainOutputs run_training(const PipelineConfig& cfg, const std::string& out_dir,
                          int stage) {
  if (stage < 0 || stage > 3)
    throw UserError("train: stage must be 1, 2, 3 or all");
  std::filesystem::create_directories(out_dir);
  TrainOutputs outs;
  outs.stage1_ckpt = out_dir + "/stage1.ckpt";
  outs.stage2_ckpt = out_dir + "/stage2.ckpt";
  outs.stage3_ckpt = out_dir + "/stage3.ckpt";

  const bool run1 = stage == 0 || stage == 1;
  const bool run2 = stage == 0 || stage == 2;
  const bool run3 = stage == 0 || stage == 3;

  ResolvedData data;
  if (run1 || run2 || run3) data = resolve_datasets(cfg);
  const nlohmann::json cfg_echo = config_to_json(cfg);
  if (data.ground_truth)
    save_ground_truth(*data.ground_truth, out_dir + "/ground_truth.json");

  EmbeddingTable table;
  OperationAssignment assignment;
  RelevanceFitness fitness;
  nlohmann::json carried;  // histories and frames accumulated across stages
  Vec op_fitness_values;

  if (run1) {
    table = EmbeddingTable(data.train.field_cardinalities, cfg.embedding_dim,
                           derive_seed(cfg.seed, kSeedEmbedding));
    std::vector<GeneMapFrame> frames;
    if (cfg.skip_dna) {
      assignment = random_assignment(data.train.num_fields(),
                                     cfg.embedding_dim,
                                     derive_seed(cfg.seed, kSeedRandomAssign));
      carried["dna_skipped"] = true;
    } else {
      DnaResult dna = run_dna_search(data.train, table, make_dna_config(cfg));
      assignment = std::move(dna.assignment);
      op_fitness_values = dna.op_fitness;
      carried["dna_history"] = dna_history_json(dna);
      carried["frames_dna"] = frames_to_json(dna.frames);
      frames = std::move(dna.frames);
      Checkpoint ck;
      ck.stage = 1;
      ck.dim = cfg.embedding_dim;
      ck.cardinalities = data.train.field_cardinalities;
      ck.config_echo = cfg_echo;
      ck.extra = carried;
      put_assignment(ck, assignment);
      put_embeddings(ck, table);
      ck.arrays.emplace_back("op_fitness", dna.op_fitness);
      ck.arrays.emplace_back("pair_weights", dna.pair_weights);
      save_checkpoint(ck, outs.stage1_ckpt);
      write_stage_exports(out_dir, "dna", frames);
    }
    if (cfg.skip_dna) {
      Checkpoint ck;
      ck.stage = 1;
      ck.dim = cfg.embedding_dim;
      ck.cardinalities = data.train.field_cardinalities;
      ck.config_echo = cfg_echo;
      ck.extra = carried;
      put_assignment(ck, assignment);
      put_embeddings(ck, table);
      save_checkpoint(ck, outs.stage1_ckpt);
    }
  }

  if (run2) {
    if (!run1) {
      Checkpoint ck = load_checkpoint(outs.stage1_ckpt);
      if (ck.stage != 1)
        throw UserError("train --stage 2: " + outs.stage1_ckpt +
                        " is not a stage-1 checkpoint");
      table = embeddings_from(ck);
      assignment = assignment_from(ck);
      carried = ck.extra;
      if (const Vec* th = ck.find_array("op_fitness")) op_fitness_values = *th;
    }
    std::vector<GeneMapFrame> frames;
    nlohmann::json events = nlohmann::json::array();
    if (cfg.skip_genome) {
      fitness.alpha.assign(table.num_fields(), 1.0);
      fitness.beta.assign(pair_count(table.num_fields()), 1.0);
      carried["genome_skipped"] = true;
    } else {
      GenomeResult genome = run_genome_search(data.train, table, assignment,
                                              make_genome_config(cfg));
      assignment = std::move(genome.assignment);
      fitness = std::move(genome.fitness);
      events = events_to_json(genome.events);
      carried["genome_history"] = genome_history_json(genome);
      carried["frames_genome"] = frames_to_json(genome.frames);
      carried["mutation_events"] = events;
      frames = std::move(genome.frames);
    }
    Checkpoint ck;
    ck.stage = 2;
    ck.dim = cfg.embedding_dim;
    ck.cardinalities = table.cardinalities();
    ck.config_echo = cfg_echo;
    ck.extra = carried;
    put_assignment(ck, assignment);
    put_embeddings(ck, table);
    if (!op_fitness_values.empty())
      ck.arrays.emplace_back("op_fitness", op_fitness_values);
    ck.arrays.emplace_back("feature_relevance", fitness.alpha);
    ck.arrays.emplace_back("pair_relevance", fitness.beta);
    save_checkpoint(ck, outs.stage2_ckpt);
    write_stage_exports(out_dir, "genome", frames);
    if (!cfg.skip_genome)
      write_mutation_log(events, out_dir + "/mutation_events.jsonl");
  }

  if (run3) {
    if (!run2) {
      Checkpoint ck = load_checkpoint(outs.stage2_ckpt);
      if (ck.stage != 2)
        throw UserError("train --stage 3: " + outs.stage2_ckpt +
                        " is not a stage-2 checkpoint");
      table = embeddings_from(ck);
      assignment = assignment_from(ck);
      fitness.alpha = ck.require_array("feature_relevance");
      fitness.beta = ck.require_array("pair_relevance");
      carried = ck.extra;
      if (const Vec* th = ck.find_array("op_fitness")) op_fitness_values = *th;
    }
    auto parts = split(data.train,
                       {1.0 - cfg.mlp_val_fraction, cfg.mlp_val_fraction, 0.0},
                       derive_seed(cfg.seed, kSeedMlpVal));
    std::vector<MlpEpochRecord> history;
    FinalModel model =
        train_final(parts[0], parts[1], std::move(table), assignment,
                    fitness.alpha, fitness.beta, make_mlp_config(cfg),
                    &history);
    nlohmann::json hist = nlohmann::json::array();
    for (const MlpEpochRecord& e : history) {
      nlohmann::json he = {{"epoch", e.epoch}, {"train_loss", e.train_loss}};
      if (std::isfinite(e.val_loss)) he["val_loss"] = e.val_loss;
      hist.push_back(he);
    }
    carried["mlp_history"] = hist;
    carried["mlp_depth"] = cfg.mlp_depth;
    carried["mlp_width"] = cfg.mlp_width;

    Checkpoint ck;
    ck.stage = 3;
    ck.dim = cfg.embedding_dim;
    ck.cardinalities = model.table().cardinalities();
    ck.config_echo = cfg_echo;
    ck.extra = carried;
    put_assignment(ck, model.assignment());
    put_embeddings(ck, model.table());
    if (!op_fitness_values.empty())
      ck.arrays.emplace_back("op_fitness", op_fitness_values);
    ck.arrays.emplace_back("feature_relevance", model.alpha());
    ck.arrays.emplace_back("pair_relevance", model.beta());
    ck.arrays.emplace_back("final_params", model.params().values);
    save_checkpoint(ck, outs.stage3_ckpt);

    if (data.test && !data.test->instances.empty()) {
      Vec preds = model.predict_all(*data.test);
      std::vector<int> labels(data.test->size());
      for (std::size_t i = 0; i < data.test->size(); ++i)
        labels[i] = data.test->instances[i].label;
      outs.test_report = evaluate(preds, labels);
      std::ofstream out(out_dir + "/eval.json", std::ios::binary);
      out << outs.test_report->to_json() << "\n";
    }
  }
  return outs;
}

FinalModel model_from_checkpoint(const Checkpoint& ck) {
  if (ck.stage != 3)
    throw UserError("expected a stage-3 checkpoint, got stage " +
                    std::to_string(ck.stage));
  EmbeddingTable table = embeddings_from(ck);
  OperationAssignment assignment = assignment_from(ck);
  MlpConfig mc;
  mc.depth = ck.extra.at("mlp_depth").get<std::size_t>();
  mc.width = ck.extra.at("mlp_width").get<std::size_t>();
  mc.warm_start_ff = false;
  mc.reset_embeddings = false;
  FinalModel model(std::move(table), std::move(assignment),
                   ck.require_array("feature_relevance"),
                   ck.require_array("pair_relevance"), mc);
  const Vec& params = ck.require_array("final_params");
  if (params.size() != model.params().values.size())
    throw UserError("checkpoint: final parameter size mismatch");
  model.params().values = params;
  return model;
}

std::string diagnose_checkpoint(const Checkpoint& ck,
                                const std::string& out_dir,
                                std::size_t top_k) {
  const bool has_dna = ck.extra.contains("frames_dna");
  const bool has_genome = ck.extra.contains("frames_genome");
  if (!has_dna && !has_genome)
    throw UserError("checkpoint carries no search history to diagnose");
  std::filesystem::create_directories(out_dir);

  if (has_dna)
    write_stage_exports(out_dir, "dna",
                        frames_from_json(ck.extra.at("frames_dna")));
  if (has_genome)
    write_stage_exports(out_dir, "genome",
                        frames_from_json(ck.extra.at("frames_genome")));
  if (ck.extra.contains("mutation_events"))
    write_mutation_log(ck.extra.at("mutation_events"),
                       out_dir + "/mutation_events.jsonl");

  std::string summary;
  const Vec* beta = ck.find_array("pair_relevance");
  if (beta) {
    const std::size_t m = ck.cardinalities.size();
    std::vector<std::size_t> order(beta->size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return std::abs((*beta)[a]) > std::abs((*beta)[b]);
                     });
    const std::size_t k = std::min(top_k, order.size());
    summary += "top " + std::to_string(k) + " interactions by |relevance|:\n";
    char buf[128];
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t p = order[r];
      auto [i, j] = pair_from_rank(p, m);
      const OpKind kind = op_from_code(ck.assignment_kinds[p]);
      std::snprintf(buf, sizeof(buf), "  (%zu,%zu) op=%s |beta|=%.6g\n", i, j,
                    op_name(kind).c_str(), std::abs((*beta)[p]));
      summary += buf;
    }
  } else {
    summary = "stage-1 checkpoint: no relevance fitness yet\n";
  }
  return summary;
}

}  // namespace cell
