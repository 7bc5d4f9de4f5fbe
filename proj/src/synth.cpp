#include "igap/synth.hpp"

#include <cmath>

#include "igap/rng.hpp"

namespace igap {

void SbmConfig::validate() const {
  if (blocks < 1 || nodes_per_block < 1) throw ContractError("SbmConfig: sizes must be positive");
  if (!(p_in > p_out)) throw ContractError("SbmConfig: p_in must exceed p_out");
  if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0 || p_out > 1.0)
    throw ContractError("SbmConfig: probabilities must lie in [0,1]");
  if (feature_dim < 1) throw ContractError("SbmConfig: feature_dim must be positive");
}

namespace {

Graph gen_sbm_impl(const SbmConfig& cfg, const Mat& block_means, Rng& rng) {
  const NodeId n = NodeId(cfg.blocks) * NodeId(cfg.nodes_per_block);
  std::vector<int> labels(n);
  for (NodeId i = 0; i < n; ++i) labels[i] = int(i) / cfg.nodes_per_block;

  Rng edge_rng = rng.derive("edges");
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) {
      const double p = labels[i] == labels[j] ? cfg.p_in : cfg.p_out;
      if (edge_rng.bernoulli(p)) edges.emplace_back(i, j);
    }
  }

  Rng feat_rng = rng.derive("features");
  Mat X(n, cfg.feature_dim);
  for (NodeId i = 0; i < n; ++i) {
    for (int f = 0; f < cfg.feature_dim; ++f) {
      X(i, f) = block_means(labels[i], f) + cfg.noise_sigma * feat_rng.normal();
    }
  }
  return make_graph(n, std::move(edges), std::move(X), std::move(labels), cfg.blocks);
}

Mat draw_block_means(const SbmConfig& cfg, Rng rng) {
  Mat means(cfg.blocks, cfg.feature_dim);
  for (int b = 0; b < cfg.blocks; ++b)
    for (int f = 0; f < cfg.feature_dim; ++f) means(b, f) = cfg.mean_scale * rng.normal();
  return means;
}

}  // namespace

Graph gen_sbm(const SbmConfig& cfg) {
  cfg.validate();
  Rng rng = Rng(cfg.seed).derive("sbm");
  const Mat means = draw_block_means(cfg, rng.derive("means"));
  Rng body = rng.derive("body");
  return gen_sbm_impl(cfg, means, body);
}

TransferPair gen_transfer_pair(const SbmConfig& base, double signal_shift, double structure_shift,
                               std::uint64_t seed) {
  base.validate();
  if (signal_shift < 0.0 || structure_shift < 0.0)
    throw ContractError("gen_transfer_pair: shifts must be >= 0");
  if (structure_shift > 1.0) throw ContractError("gen_transfer_pair: structure_shift must be <= 1");

  Rng rng = Rng(seed).derive("pair");
  const Mat means = draw_block_means(base, rng.derive("means"));

  SbmConfig pt_cfg = base;
  TransferPair pair;
  {
    Rng body = rng.derive("pretrain");
    pair.pretrain = gen_sbm_impl(pt_cfg, means, body);
  }

  // shifted block means: exact distance signal_shift * sigma per block
  Mat ft_means = means;
  Rng dir_rng = rng.derive("shift.dirs");
  for (int b = 0; b < base.blocks; ++b) {
    Vec dir(base.feature_dim);
    double nrm = 0.0;
    while (nrm < 1e-12) {
      for (int f = 0; f < base.feature_dim; ++f) dir[f] = dir_rng.normal();
      nrm = dir.norm();
    }
    ft_means.row(b) += (signal_shift * base.noise_sigma / nrm) * dir.transpose();
  }

  // interpolate edge probabilities toward equal-density Erdos-Renyi
  SbmConfig ft_cfg = base;
  const double npb = double(base.nodes_per_block);
  const double within_pairs = double(base.blocks) * npb * (npb - 1.0) / 2.0;
  const double total_n = double(base.blocks) * npb;
  const double total_pairs = total_n * (total_n - 1.0) / 2.0;
  const double between_pairs = total_pairs - within_pairs;
  const double p_bar = (base.p_in * within_pairs + base.p_out * between_pairs) / total_pairs;
  ft_cfg.p_in = (1.0 - structure_shift) * base.p_in + structure_shift * p_bar;
  ft_cfg.p_out = (1.0 - structure_shift) * base.p_out + structure_shift * p_bar;
  if (structure_shift >= 1.0) ft_cfg.p_in = ft_cfg.p_out + 1e-9;  // keep p_in > p_out

  {
    Rng body = rng.derive("finetune");
    pair.finetune = gen_sbm_impl(ft_cfg, ft_means, body);
  }
  return pair;
}

}  // namespace igap
