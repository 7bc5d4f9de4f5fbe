#pragma once


#include "igap/graph.hpp"
#include "igap/model.hpp"
#include "igap/rng.hpp"

namespace igap {

// Positive views: sparse, small signal transform (I + F_sp) and light edge
// perturbation that leaves the spectral basis essentially unrotated.
// Negative views: dense transform (I + F_dt) and heavy rewiring.
struct AugmentConfig {
  double pos_edge_rate = 0.05;
  double pos_signal_sparsity = 0.05;
  double pos_signal_scale = 0.05;
  double neg_edge_rate = 0.4;
  double neg_signal_density = 0.5;
  double neg_signal_scale = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Framework { Subgraph, LinkPred, LocalGlobal };

Framework framework_from_string(const std::string& s);
std::string to_string(Framework f);

struct ContrastiveBatch {
  Framework framework = Framework::Subgraph;
  std::vector<Graph> anchors;
  std::vector<Graph> positives;   // positives[i] pairs anchors[i]
  std::vector<Graph> negatives;   // shared pool
  std::vector<int> negative_source;  // anchor index each negative was derived from, -1 if none
};

Graph augment_positive(const Graph& g, const AugmentConfig& cfg);
Graph augment_negative(const Graph& g, const AugmentConfig& cfg);

// Row-permutes the signal matrix, structure untouched.
Graph shuffle_features(const Graph& g, std::uint64_t seed);

struct MaskedEdges {
  Graph remaining;
  std::vector<std::pair<NodeId, NodeId>> masked;
  std::vector<std::pair<NodeId, NodeId>> negatives;  // non-adjacent in the original graph
};

MaskedEdges mask_edges(const Graph& g, double rate, std::uint64_t seed);

ContrastiveBatch sample_contrastive_batch(const Graph& g, Framework framework,
                                          const AugmentConfig& cfg, int batch_size,
                                          std::uint64_t seed, int ego_radius = 2,
                                          double mask_rate = 0.15);
ContrastiveBatch sample_contrastive_batch(const GraphSet& gs, Framework framework,
                                          const AugmentConfig& cfg, int batch_size,
                                          std::uint64_t seed, int ego_radius = 2,
                                          double mask_rate = 0.15);

// InfoNCE over exp(cos/tau) scores; one positive per anchor. pos_scores[i] is
// cos(a_i, p_i); neg row i are the scores of anchor i against the shared
// negative pool. Reference implementation used as the oracle for the tape.
double info_nce_scores(const Vec& pos_scores, const Mat& neg_scores, double tau);

// Tape version. negs < 0 means no explicit negative pool; in_batch adds the
// other anchors' positives to each denominator.
int info_nce_tape(ad::Tape& t, int anchors, int positives, int negs, double tau, bool in_batch);

struct PretrainConfig {
  Framework framework = Framework::Subgraph;
  AugmentConfig augment;
  int epochs = 500;
  double lr = 1e-4;
  double tau = 0.5;
  int batch_size = 16;
  int ego_radius = 2;
  double mask_rate = 0.15;  // link-pred
  int dense_cap = kDenseCapDefault;
  int k_pre = 256;  // truncation when a view exceeds the dense cap
  std::uint64_t seed = 0;
};

struct PretrainResult {
  ModelParams model;
  std::vector<double> loss_trace;
  AdamState adam;
  int epochs_done = 0;
};

struct ResumePoint {
  AdamState adam;
  int start_epoch = 0;
  std::vector<double> loss_trace;
};

// Contrastive pre-training. Deterministic per (config seed, epoch): resuming
// from epoch e reproduces the straight-through run bit-exactly.
PretrainResult pretrain_loop(const Graph& g, ModelParams model, const PretrainConfig& cfg,
                             const ResumePoint* resume = nullptr);
PretrainResult pretrain_loop(const GraphSet& gs, ModelParams model, const PretrainConfig& cfg,
                             const ResumePoint* resume = nullptr);

// Basis for a view under the pre-training truncation policy.
SpectralBasis view_basis(const Graph& g, int dense_cap, int k_pre, std::uint64_t seed);

}  // namespace igap
