#include "igap/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace igap {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string pt_mode_str(const PromptConfig& f) {
  if (f.pt_mode == PtMode::Dense) return "dense";
  return "lowrank:" + std::to_string(f.pt_rank);
}

void set_pt_mode(PromptConfig& f, const std::string& v) {
  if (v == "dense") {
    f.pt_mode = PtMode::Dense;
    return;
  }
  if (v.rfind("lowrank:", 0) == 0) {
    f.pt_mode = PtMode::LowRank;
    f.pt_rank = std::stoi(v.substr(8));
    return;
  }
  throw ContractError("config: pt_mode must be dense or lowrank:R, got " + v);
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += v[i];
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}


struct Field {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  const double d = std::stod(v, &pos);
  if (pos != v.size()) throw ContractError("config: bad number " + v);
  return d;
}

long parse_long(const std::string& v) {
  std::size_t pos = 0;
  const long d = std::stol(v, &pos);
  if (pos != v.size()) throw ContractError("config: bad integer " + v);
  return d;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ContractError("config: bad boolean " + v);
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& piece : split_commas(s)) out.push_back(int(parse_long(piece)));
  return out;
}

#define F_DOUBLE(expr)                                                            \
  Field{[](const ExperimentConfig& c) { return fmt_double(c.expr); },             \
        [](ExperimentConfig& c, const std::string& v) { c.expr = parse_double(v); }}
#define F_INT(expr)                                                               \
  Field{[](const ExperimentConfig& c) { return std::to_string(c.expr); },         \
        [](ExperimentConfig& c, const std::string& v) { c.expr = int(parse_long(v)); }}
#define F_U64(expr)                                                               \
  Field{[](const ExperimentConfig& c) { return std::to_string(c.expr); },         \
        [](ExperimentConfig& c, const std::string& v) { c.expr = std::stoull(v); }}
#define F_STR(expr)                                                               \
  Field{[](const ExperimentConfig& c) { return c.expr; },                         \
        [](ExperimentConfig& c, const std::string& v) { c.expr = v; }}
#define F_BOOL(expr)                                                              \
  Field{[](const ExperimentConfig& c) { return c.expr ? "true" : "false"; },      \
        [](ExperimentConfig& c, const std::string& v) { c.expr = parse_bool(v); }}

const std::map<std::string, Field>& registry() {
  static const std::map<std::string, Field> fields = {
      {"seed", F_U64(seed)},
      {"data.source", F_STR(data_source)},
      {"data.graph", F_STR(graph_path)},
      {"data.graphset", F_STR(graphset_path)},
      {"data.sbm.blocks", F_INT(sbm.blocks)},
      {"data.sbm.nodes_per_block", F_INT(sbm.nodes_per_block)},
      {"data.sbm.p_in", F_DOUBLE(sbm.p_in)},
      {"data.sbm.p_out", F_DOUBLE(sbm.p_out)},
      {"data.sbm.feature_dim", F_INT(sbm.feature_dim)},
      {"data.sbm.mean_scale", F_DOUBLE(sbm.mean_scale)},
      {"data.sbm.noise_sigma", F_DOUBLE(sbm.noise_sigma)},
      {"data.pair.signal_shift", F_DOUBLE(pair_signal_shift)},
      {"data.pair.structure_shift", F_DOUBLE(pair_structure_shift)},
      {"split.setting",
       Field{[](const ExperimentConfig& c) { return to_string(c.setting); },
             [](ExperimentConfig& c, const std::string& v) { c.setting = setting_from_string(v); }}},
      {"split.per_class_train", F_INT(split.per_class_train)},
      {"split.val_fraction", F_DOUBLE(split.val_fraction)},
      {"split.finetune_class_fraction", F_DOUBLE(split.finetune_class_fraction)},
      {"split.pretrain_class_fraction", F_DOUBLE(split.pretrain_class_fraction)},
      {"pretrain.framework",
       Field{[](const ExperimentConfig& c) { return to_string(c.pretrain.framework); },
             [](ExperimentConfig& c, const std::string& v) { c.pretrain.framework = framework_from_string(v); }}},
      {"pretrain.epochs", F_INT(pretrain.epochs)},
      {"pretrain.lr", F_DOUBLE(pretrain.lr)},
      {"pretrain.tau", F_DOUBLE(pretrain.tau)},
      {"pretrain.batch_size", F_INT(pretrain.batch_size)},
      {"pretrain.ego_radius", F_INT(pretrain.ego_radius)},
      {"pretrain.mask_rate", F_DOUBLE(pretrain.mask_rate)},
      {"pretrain.dense_cap", F_INT(pretrain.dense_cap)},
      {"pretrain.k_pre", F_INT(pretrain.k_pre)},
      {"pretrain.aug.pos_edge_rate", F_DOUBLE(pretrain.augment.pos_edge_rate)},
      {"pretrain.aug.pos_signal_sparsity", F_DOUBLE(pretrain.augment.pos_signal_sparsity)},
      {"pretrain.aug.pos_signal_scale", F_DOUBLE(pretrain.augment.pos_signal_scale)},
      {"pretrain.aug.neg_edge_rate", F_DOUBLE(pretrain.augment.neg_edge_rate)},
      {"pretrain.aug.neg_signal_density", F_DOUBLE(pretrain.augment.neg_signal_density)},
      {"pretrain.aug.neg_signal_scale", F_DOUBLE(pretrain.augment.neg_signal_scale)},
      {"finetune.L", F_INT(finetune.L)},
      {"finetune.K", F_INT(finetune.K)},
      {"finetune.lr", F_DOUBLE(finetune.lr)},
      {"finetune.epochs", F_INT(finetune.epochs)},
      {"finetune.checkpoint_every", F_INT(finetune.checkpoint_every)},
      {"finetune.pt_mode",
       Field{[](const ExperimentConfig& c) { return pt_mode_str(c.finetune); },
             [](ExperimentConfig& c, const std::string& v) { set_pt_mode(c.finetune, v); }}},
      {"finetune.ortho_penalty", F_DOUBLE(finetune.ortho_penalty)},
      {"finetune.tau", F_DOUBLE(finetune.tau)},
      {"finetune.apply_pt_right", F_BOOL(finetune.apply_pt_right)},
      {"finetune.head_hidden", F_INT(finetune.head_hidden)},
      {"finetune.head_out", F_INT(finetune.head_out)},
      {"finetune.dense_cap", F_INT(finetune.dense_cap)},
      {"finetune.ablations",
       Field{[](const ExperimentConfig& c) { return join(c.ablations); },
             [](ExperimentConfig& c, const std::string& v) {
               c.ablations = split_commas(v);
               if (c.ablations.empty()) throw ContractError("config: empty ablation list");
               for (const auto& a : c.ablations) ablation_from_string(a);  // validate
             }}},
      {"finetune.sweep_L",
       Field{[](const ExperimentConfig& c) { return join_ints(c.sweep_L); },
             [](ExperimentConfig& c, const std::string& v) { c.sweep_L = parse_int_list(v); }}},
      {"finetune.sweep_K",
       Field{[](const ExperimentConfig& c) { return join_ints(c.sweep_K); },
             [](ExperimentConfig& c, const std::string& v) { c.sweep_K = parse_int_list(v); }}},
      {"finetune.task", F_INT(task)},
      {"out.dir", F_STR(out_dir)},
  };
  return fields;
}

#undef F_DOUBLE
#undef F_INT
#undef F_U64
#undef F_STR
#undef F_BOOL

}  // namespace

std::string ExperimentConfig::resolved_text() const {
  std::string out;
  for (const auto& [key, field] : registry()) {
    out += key;
    out += '=';
    out += field.get(*this);
    out += '\n';
  }
  return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(resolved_text()); }

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::string body = line.substr(first, last - first + 1);
    if (body[0] == '#' || body[0] == ';') continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ParseError("config: unterminated section header", line_no);
      section = body.substr(1, body.size() - 2);
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected key=value", line_no);
    std::string key = body.substr(0, eq);
    std::string value = body.substr(eq + 1);
    auto strip = [](std::string& s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
    };
    strip(key);
    strip(value);
    if (!section.empty()) key = section + "." + key;
    auto it = registry().find(key);
    if (it == registry().end()) throw ParseError("config: unknown key `" + key + "`", line_no);
    try {
      it->second.set(cfg, value);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError("config: bad value for `" + key + "`: " + e.what(), line_no);
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ContractError("override must be key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  auto it = registry().find(key);
  if (it == registry().end()) throw ContractError("override: unknown key `" + key + "`");
  it->second.set(cfg, value);
}

}  // namespace igap
