#pragma once

#include "igap/graph.hpp"

namespace igap {

enum class Setting { Transductive, SemiInductive, Inductive };

Setting setting_from_string(const std::string& s);
std::string to_string(Setting s);

// Pre-train / fine-tune protocol. Fine-tune ids index into finetune_graph;
// finetune_to_original maps them back to g. Class-set relations:
//   transductive   pre-train graph == fine-tune graph
//   semi-inductive fine-tune classes are a strict subset, nodes a subset
//   inductive      class sets and node sets disjoint, labels remapped
struct DatasetSplit {
  Setting setting = Setting::Transductive;
  std::vector<int> pretrain_classes;  // original class ids
  std::vector<int> finetune_classes;
  Graph pretrain_graph;
  Graph finetune_graph;
  std::vector<NodeId> pretrain_to_original;
  std::vector<NodeId> finetune_to_original;
  std::vector<NodeId> train_ids, val_ids, test_ids;  // into finetune_graph
};

struct SplitConfig {
  int per_class_train = 100;
  double val_fraction = 0.2;  // of the remainder (2:8 val:test)
  double finetune_class_fraction = 0.25;
  double pretrain_class_fraction = 0.6;  // inductive only
  std::uint64_t seed = 0;
};

DatasetSplit make_splits(const Graph& g, Setting setting, const SplitConfig& cfg);

// Throws ContractError if any protocol invariant fails.
void check_split(const DatasetSplit& split);

void save_split(const DatasetSplit& split, const std::string& path);

// Reads back the id lists written by save_split (classes and id maps
// included); graphs themselves are not stored in split files.
struct SplitIds {
  Setting setting = Setting::Transductive;
  std::vector<int> pretrain_classes, finetune_classes;
  std::vector<NodeId> train_ids, val_ids, test_ids;
  std::vector<NodeId> finetune_to_original;
};

SplitIds load_split(const std::string& path);

}  // namespace igap
