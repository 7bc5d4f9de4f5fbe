#include "igap/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace igap {

namespace {

constexpr char kMagic[4] = {'I', 'G', 'A', 'P'};

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_i32(std::ostream& out, std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, std::uint32_t(s.size()));
  out.write(s.data(), std::streamsize(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw ParseError("checkpoint truncated", 0);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) throw ParseError("checkpoint truncated", 0);
  return v;
}

std::int32_t read_i32(std::istream& in) {
  std::int32_t v;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw ParseError("checkpoint truncated", 0);
  return v;
}

std::string read_string(std::istream& in) {
  const std::uint32_t len = read_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), std::streamsize(len));
  if (!in) throw ParseError("checkpoint truncated", 0);
  return s;
}

}  // namespace

const Mat& Checkpoint::get(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw ContractError("checkpoint: missing array " + name);
  return it->second;
}

std::string Checkpoint::get_meta(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw ContractError("checkpoint: missing meta " + key);
  return it->second;
}

long Checkpoint::get_meta_long(const std::string& key) const { return std::stol(get_meta(key)); }

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_u32(out, Checkpoint::kVersion);
  write_u64(out, ck.config_hash);
  write_u64(out, ck.master_seed);
  write_i32(out, ck.epoch);
  write_string(out, ck.stage);
  write_u32(out, std::uint32_t(ck.meta.size()));
  for (const auto& [k, v] : ck.meta) {
    write_string(out, k);
    write_string(out, v);
  }
  write_u32(out, std::uint32_t(ck.arrays.size()));
  for (const auto& [name, m] : ck.arrays) {
    write_string(out, name);
    write_u32(out, std::uint32_t(m.rows()));
    write_u32(out, std::uint32_t(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double v = m(i, j);
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
    }
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("checkpoint: bad magic bytes", 0);
  const std::uint32_t version = read_u32(in);
  if (version != Checkpoint::kVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version), 0);
  Checkpoint ck;
  ck.config_hash = read_u64(in);
  ck.master_seed = read_u64(in);
  ck.epoch = read_i32(in);
  ck.stage = read_string(in);
  const std::uint32_t n_meta = read_u32(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = read_string(in);
    ck.meta[k] = read_string(in);
  }
  const std::uint32_t n_arrays = read_u32(in);
  for (std::uint32_t a = 0; a < n_arrays; ++a) {
    std::string name = read_string(in);
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    Mat m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) {
        double v;
        in.read(reinterpret_cast<char*>(&v), 8);
        if (!in) throw ParseError("checkpoint truncated", 0);
        m(i, j) = v;
      }
    }
    ck.arrays[name] = std::move(m);
  }
  return ck;
}

void pack_model(Checkpoint& ck, const ModelParams& p) {
  ck.put_meta("model.layers", std::to_string(p.layers.size()));
  ck.put_meta("model.frozen", p.frozen ? "1" : "0");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string base = "layer" + std::to_string(l);
    ck.put(base + ".filter", p.layers[l].filter.coeffs);
    ck.put(base + ".filter_scale", Mat::Constant(1, 1, p.layers[l].filter.lambda_scale));
    ck.put(base + ".W", p.layers[l].W);
  }
  ck.put("head.W1", p.head.W1);
  ck.put("head.b1", p.head.b1);
  ck.put("head.W2", p.head.W2);
  ck.put("head.b2", p.head.b2);
}

ModelParams unpack_model(const Checkpoint& ck) {
  ModelParams p;
  const long layers = ck.get_meta_long("model.layers");
  p.frozen = ck.get_meta("model.frozen") == "1";
  for (long l = 0; l < layers; ++l) {
    const std::string base = "layer" + std::to_string(l);
    GnnLayer layer;
    layer.filter.coeffs = ck.get(base + ".filter");
    layer.filter.lambda_scale = ck.get(base + ".filter_scale")(0, 0);
    layer.W = ck.get(base + ".W");
    p.layers.push_back(std::move(layer));
  }
  p.head.W1 = ck.get("head.W1");
  p.head.b1 = ck.get("head.b1");
  p.head.W2 = ck.get("head.W2");
  p.head.b2 = ck.get("head.b2");
  return p;
}

void pack_adam(Checkpoint& ck, const AdamState& st) {
  ck.put_meta("adam.t", std::to_string(st.t));
  for (const auto& [name, m] : st.m) ck.put("adam.m." + name, m);
  for (const auto& [name, v] : st.v) ck.put("adam.v." + name, v);
}

AdamState unpack_adam(const Checkpoint& ck) {
  AdamState st;
  st.t = ck.get_meta_long("adam.t");
  for (const auto& [name, m] : ck.arrays) {
    if (name.rfind("adam.m.", 0) == 0) st.m[name.substr(7)] = m;
    if (name.rfind("adam.v.", 0) == 0) st.v[name.substr(7)] = m;
  }
  return st;
}

void pack_node_prompts(Checkpoint& ck, const SignalPrompt& sp, const AlignmentPrompt& ap,
                       const LabelPrompt& lp, const Head& head) {
  ck.put("prompt.Ps", sp.Ps);
  ck.put("prompt.alpha", sp.alpha);
  ck.put_meta("prompt.pt_mode", ap.mode == PtMode::Dense ? "dense" : "lowrank");
  ck.put_meta("prompt.pt_frame", ap.spectral_frame ? "spectral" : "node");
  if (ap.mode == PtMode::Dense) {
    ck.put("prompt.Pt", ap.Pt);
  } else {
    ck.put("prompt.PtA", ap.A);
    ck.put("prompt.PtB", ap.B);
  }
  ck.put("prompt.Pl", lp.Pl);
  ck.put("tunehead.W1", head.W1);
  ck.put("tunehead.b1", head.b1);
  ck.put("tunehead.W2", head.W2);
  ck.put("tunehead.b2", head.b2);
}

}  // namespace igap
