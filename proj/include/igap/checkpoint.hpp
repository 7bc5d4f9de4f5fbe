#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "igap/model.hpp"
#include "igap/prompt.hpp"

namespace igap {

// Versioned binary state container: magic "IGAP", little-endian,
// length-prefixed arrays of 64-bit floats. Round-trips bit-exactly.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string stage;  // "pretrain" | "finetune"
  std::uint64_t config_hash = 0;
  std::uint64_t master_seed = 0;
  std::int32_t epoch = 0;
  std::map<std::string, std::string> meta;
  std::map<std::string, Mat> arrays;

  void put(const std::string& name, const Mat& m) { arrays[name] = m; }
  const Mat& get(const std::string& name) const;
  bool has(const std::string& name) const { return arrays.count(name) > 0; }

  void put_meta(const std::string& key, const std::string& value) { meta[key] = value; }
  std::string get_meta(const std::string& key) const;
  long get_meta_long(const std::string& key) const;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// model/optimizer packing
void pack_model(Checkpoint& ck, const ModelParams& p);
ModelParams unpack_model(const Checkpoint& ck);
void pack_adam(Checkpoint& ck, const AdamState& st);
AdamState unpack_adam(const Checkpoint& ck);

void pack_node_prompts(Checkpoint& ck, const SignalPrompt& sp, const AlignmentPrompt& ap,
                       const LabelPrompt& lp, const Head& head);

}  // namespace igap
