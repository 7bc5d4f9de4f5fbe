#pragma once

#include "igap/checkpoint.hpp"
#include "igap/config.hpp"

namespace igap {

struct MetricsRow {
  std::string mode;
  int best_epoch = 0;
  double val_metric = 0.0;
  double test_metric = 0.0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  double pretrain_initial_loss = 0.0;
  double pretrain_final_loss = 0.0;

  std::string csv() const;
};

// pretrain -> finetune (one row per ablation mode) -> test evaluation.
// Writes metrics.csv, the resolved config, loss trace and checkpoints under
// cfg.out_dir. Stage failures are rethrown with a stage label.
MetricsReport run_experiment(const ExperimentConfig& cfg);

// Data stage shared by run_experiment and the CLI: the pre-train graph and
// the labeled fine-tune graph with its splits.
struct PreparedData {
  Graph pretrain_graph;
  Graph finetune_graph;
  std::vector<NodeId> train_ids, val_ids, test_ids;
};

PreparedData prepare_node_data(const ExperimentConfig& cfg);

}  // namespace igap
