#pragma once

#include <string>
#include <vector>

#include "igap/pretrain.hpp"
#include "igap/prompt.hpp"
#include "igap/splits.hpp"
#include "igap/synth.hpp"

namespace igap {

// One structured document holding every knob of a run. Parsed from key=value
// text with [section] headers; unknown keys are rejected. Stage seeds derive
// from the single master seed.
struct ExperimentConfig {
  std::uint64_t seed = 0;

  std::string data_source = "sbm";  // sbm | pair | file | fileset
  SbmConfig sbm;
  double pair_signal_shift = 1.5;
  double pair_structure_shift = 0.3;
  std::string graph_path;
  std::string graphset_path;

  Setting setting = Setting::Inductive;
  SplitConfig split;

  PretrainConfig pretrain;

  PromptConfig finetune;
  std::vector<std::string> ablations{"none"};
  std::vector<int> sweep_L;  // empty = just finetune.L
  std::vector<int> sweep_K;
  int task = 0;

  std::string out_dir = "runs/exp";

  // canonical serialized form; stable key order, one key=value per line
  std::string resolved_text() const;
  std::uint64_t hash() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// key=value override, same key space as the file format
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

std::uint64_t fnv1a(const std::string& text);

}  // namespace igap
