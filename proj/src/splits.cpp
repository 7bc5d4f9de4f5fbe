#include "igap/splits.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "igap/rng.hpp"

namespace igap {

Setting setting_from_string(const std::string& s) {
  if (s == "transductive") return Setting::Transductive;
  if (s == "semi-inductive" || s == "semiinductive") return Setting::SemiInductive;
  if (s == "inductive") return Setting::Inductive;
  throw ContractError("unknown split setting: " + s);
}

std::string to_string(Setting s) {
  switch (s) {
    case Setting::Transductive: return "transductive";
    case Setting::SemiInductive: return "semi-inductive";
    case Setting::Inductive: return "inductive";
  }
  return "?";
}

namespace {

// Induced subgraph on the nodes whose label lies in `classes`; labels are
// remapped to 0..|classes|-1 in the listed order when remap is set.
Graph induced_by_classes(const Graph& g, const std::vector<int>& classes, bool remap,
                         std::vector<NodeId>& node_map) {
  std::map<int, int> class_index;
  for (std::size_t i = 0; i < classes.size(); ++i) class_index[classes[i]] = int(i);

  node_map.clear();
  std::vector<Eigen::Index> inv(g.n_nodes, -1);
  for (NodeId i = 0; i < g.n_nodes; ++i) {
    if (g.node_labels[i] >= 0 && class_index.count(g.node_labels[i])) {
      inv[i] = Eigen::Index(node_map.size());
      node_map.push_back(i);
    }
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (auto [u, v] : g.edges) {
    if (inv[u] >= 0 && inv[v] >= 0) edges.emplace_back(NodeId(inv[u]), NodeId(inv[v]));
  }
  Mat signals(node_map.size(), g.signals.cols());
  std::vector<int> labels(node_map.size());
  for (std::size_t i = 0; i < node_map.size(); ++i) {
    signals.row(Eigen::Index(i)) = g.signals.row(node_map[i]);
    const int y = g.node_labels[node_map[i]];
    labels[i] = remap ? class_index[y] : y;
  }
  const int n_classes = remap ? int(classes.size()) : g.n_classes;
  return make_graph(NodeId(node_map.size()), std::move(edges), std::move(signals),
                    std::move(labels), n_classes);
}

// per-class training sample, remainder val:test at cfg.val_fraction
void sample_train_val_test(const Graph& g, const SplitConfig& cfg, Rng& rng, DatasetSplit& out) {
  std::map<int, std::vector<NodeId>> by_class;
  for (NodeId i = 0; i < g.n_nodes; ++i) {
    if (g.node_labels[i] >= 0) by_class[g.node_labels[i]].push_back(i);
  }
  std::vector<NodeId> rest;
  for (auto& [cls, ids] : by_class) {
    if (int(ids.size()) < cfg.per_class_train)
      throw ContractError("make_splits: class " + std::to_string(cls) + " has " +
                          std::to_string(ids.size()) + " nodes, fewer than per_class_train = " +
                          std::to_string(cfg.per_class_train));
    rng.shuffle(ids);
    out.train_ids.insert(out.train_ids.end(), ids.begin(), ids.begin() + cfg.per_class_train);
    rest.insert(rest.end(), ids.begin() + cfg.per_class_train, ids.end());
  }
  rng.shuffle(rest);
  const std::size_t n_val = std::size_t(cfg.val_fraction * double(rest.size()) + 0.5);
  out.val_ids.assign(rest.begin(), rest.begin() + n_val);
  out.test_ids.assign(rest.begin() + n_val, rest.end());
  std::sort(out.train_ids.begin(), out.train_ids.end());
  std::sort(out.val_ids.begin(), out.val_ids.end());
  std::sort(out.test_ids.begin(), out.test_ids.end());
}

std::vector<int> all_classes(const Graph& g) {
  std::set<int> seen;
  for (int y : g.node_labels)
    if (y >= 0) seen.insert(y);
  return {seen.begin(), seen.end()};
}

}  // namespace

DatasetSplit make_splits(const Graph& g, Setting setting, const SplitConfig& cfg) {
  if (!g.labeled()) throw ContractError("make_splits: graph carries no labels");
  Rng rng = Rng(cfg.seed).derive("splits");
  DatasetSplit out;
  out.setting = setting;
  const std::vector<int> classes = all_classes(g);

  switch (setting) {
    case Setting::Transductive: {
      out.pretrain_classes = classes;
      out.finetune_classes = classes;
      out.pretrain_graph = g;
      out.finetune_graph = g;
      out.pretrain_to_original.resize(g.n_nodes);
      out.finetune_to_original.resize(g.n_nodes);
      for (NodeId i = 0; i < g.n_nodes; ++i) {
        out.pretrain_to_original[i] = i;
        out.finetune_to_original[i] = i;
      }
      sample_train_val_test(g, cfg, rng, out);
      break;
    }
    case Setting::SemiInductive: {
      const int n_ft = std::max(1, std::min<int>(int(classes.size()) - 1,
                                                 int(cfg.finetune_class_fraction * double(classes.size()) + 0.5)));
      std::vector<int> shuffled = classes;
      rng.shuffle(shuffled);
      out.finetune_classes.assign(shuffled.begin(), shuffled.begin() + n_ft);
      std::sort(out.finetune_classes.begin(), out.finetune_classes.end());
      out.pretrain_classes = classes;  // pre-training sees the whole graph
      out.pretrain_graph = g;
      out.pretrain_to_original.resize(g.n_nodes);
      for (NodeId i = 0; i < g.n_nodes; ++i) out.pretrain_to_original[i] = i;
      out.finetune_graph = induced_by_classes(g, out.finetune_classes, true, out.finetune_to_original);
      sample_train_val_test(out.finetune_graph, cfg, rng, out);
      break;
    }
    case Setting::Inductive: {
      if (classes.size() < 2) throw ContractError("make_splits: inductive needs at least two classes");
      std::vector<int> shuffled = classes;
      rng.shuffle(shuffled);
      int n_pt = std::max(1, std::min<int>(int(classes.size()) - 1,
                                           int(cfg.pretrain_class_fraction * double(classes.size()) + 0.5)));
      out.pretrain_classes.assign(shuffled.begin(), shuffled.begin() + n_pt);
      out.finetune_classes.assign(shuffled.begin() + n_pt, shuffled.end());
      std::sort(out.pretrain_classes.begin(), out.pretrain_classes.end());
      std::sort(out.finetune_classes.begin(), out.finetune_classes.end());
      out.pretrain_graph = induced_by_classes(g, out.pretrain_classes, true, out.pretrain_to_original);
      out.finetune_graph = induced_by_classes(g, out.finetune_classes, true, out.finetune_to_original);
      sample_train_val_test(out.finetune_graph, cfg, rng, out);
      break;
    }
  }
  check_split(out);
  return out;
}

void check_split(const DatasetSplit& s) {
  std::set<NodeId> train(s.train_ids.begin(), s.train_ids.end());
  std::set<NodeId> val(s.val_ids.begin(), s.val_ids.end());
  std::set<NodeId> test(s.test_ids.begin(), s.test_ids.end());
  for (NodeId id : val) {
    if (train.count(id)) throw ContractError("split invariant: train/val overlap");
  }
  for (NodeId id : test) {
    if (train.count(id) || val.count(id)) throw ContractError("split invariant: test overlap");
  }
  for (NodeId id : s.train_ids) {
    if (id >= s.finetune_graph.n_nodes) throw ContractError("split invariant: id out of range");
  }

  std::set<int> pt(s.pretrain_classes.begin(), s.pretrain_classes.end());
  std::set<int> ft(s.finetune_classes.begin(), s.finetune_classes.end());
  switch (s.setting) {
    case Setting::Transductive:
      if (pt != ft) throw ContractError("split invariant: transductive class sets differ");
      if (s.pretrain_graph.n_nodes != s.finetune_graph.n_nodes)
        throw ContractError("split invariant: transductive graphs differ");
      break;
    case Setting::SemiInductive: {
      if (ft.size() >= pt.size()) throw ContractError("split invariant: fine-tune classes must be a strict subset");
      for (int c : ft) {
        if (!pt.count(c)) throw ContractError("split invariant: fine-tune class outside pre-train set");
      }
      std::set<NodeId> pt_nodes(s.pretrain_to_original.begin(), s.pretrain_to_original.end());
      for (NodeId id : s.finetune_to_original) {
        if (!pt_nodes.count(id)) throw ContractError("split invariant: fine-tune node outside pre-train set");
      }
      break;
    }
    case Setting::Inductive: {
      for (int c : ft) {
        if (pt.count(c)) throw ContractError("split invariant: inductive class sets intersect");
      }
      std::set<NodeId> pt_nodes(s.pretrain_to_original.begin(), s.pretrain_to_original.end());
      for (NodeId id : s.finetune_to_original) {
        if (pt_nodes.count(id)) throw ContractError("split invariant: inductive node sets intersect");
      }
      break;
    }
  }
}

void save_split(const DatasetSplit& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write split file: " + path);
  out << "setting " << to_string(s.setting) << '\n';
  auto dump = [&out](const char* tag, const auto& ids) {
    out << tag;
    for (auto id : ids) out << ' ' << id;
    out << '\n';
  };
  dump("pretrain_classes", s.pretrain_classes);
  dump("finetune_classes", s.finetune_classes);
  dump("train", s.train_ids);
  dump("val", s.val_ids);
  dump("test", s.test_ids);
  dump("finetune_to_original", s.finetune_to_original);
}

SplitIds load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open split file: " + path);
  SplitIds out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "setting") {
      std::string value;
      if (!(ss >> value)) throw ParseError("split: missing setting value", line_no);
      out.setting = setting_from_string(value);
      continue;
    }
    auto read_ints = [&ss](auto& vec) {
      long long v;
      while (ss >> v) vec.push_back(static_cast<typename std::decay_t<decltype(vec)>::value_type>(v));
    };
    if (tag == "pretrain_classes") read_ints(out.pretrain_classes);
    else if (tag == "finetune_classes") read_ints(out.finetune_classes);
    else if (tag == "train") read_ints(out.train_ids);
    else if (tag == "val") read_ints(out.val_ids);
    else if (tag == "test") read_ints(out.test_ids);
    else if (tag == "finetune_to_original") read_ints(out.finetune_to_original);
    else throw ParseError("split: unknown section `" + tag + "`", line_no);
  }
  return out;
}

}  // namespace igap
