#pragma once

#include "igap/graph.hpp"

namespace igap {

// Stochastic block model with block-conditioned Gaussian features. Labels are
// block indices. Disconnected draws are allowed; callers that care should
// check connected_components.
struct SbmConfig {
  int blocks = 4;
  int nodes_per_block = 100;
  double p_in = 0.1;
  double p_out = 0.01;
  int feature_dim = 32;
  double mean_scale = 1.0;   // block means ~ N(0, mean_scale^2 I)
  double noise_sigma = 1.0;  // per-node noise around the block mean
  std::uint64_t seed = 0;

  void validate() const;
};

Graph gen_sbm(const SbmConfig& cfg);

struct TransferPair {
  Graph pretrain;
  Graph finetune;
};

// Two SBMs from one block-structure family with disjoint node identities.
// signal_shift moves each fine-tune block mean by signal_shift * noise_sigma
// along a random unit direction; structure_shift interpolates the edge
// probabilities toward an Erdos-Renyi graph of equal expected density.
TransferPair gen_transfer_pair(const SbmConfig& base, double signal_shift, double structure_shift,
                               std::uint64_t seed);

}  // namespace igap
