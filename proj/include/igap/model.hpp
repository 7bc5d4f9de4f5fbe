#pragma once

#include <map>
#include <string>
#include <vector>

#include "igap/rng.hpp"
#include "igap/spectral.hpp"
#include "igap/tape.hpp"

namespace igap {

// Polynomial spectral filter g(lambda) = sum_p c_p (lambda/s)^p. A polynomial
// in lambda transfers to any other graph's spectrum, which the alignment
// prompt relies on. The fixed global scale s bounds the per-coefficient
// leverage of the high-order terms; raw graph eigenvalues reach ~2*max degree
// and their squares would otherwise dwarf every other gradient.
struct FilterKernel {
  Mat coeffs;  // (P+1) x 1 column, c_0 .. c_P
  double lambda_scale = 1.0;

  int degree() const { return static_cast<int>(coeffs.rows()) - 1; }
  double response(double lambda) const;
  Vec response(const Vec& lambdas) const;
};

inline constexpr double kFilterLambdaScale = 1.8;  // default for trained models

// (lambdas/s)^p Vandermonde, K x (P+1); filter values = vandermonde * coeffs
Mat filter_vandermonde(const Vec& lambdas, int degree, double lambda_scale = 1.0);

struct GnnLayer {
  FilterKernel filter;
  Mat W;  // in_dim x out_dim
};

struct Head {
  Mat W1, b1;  // b as 1 x dim rows
  Mat W2, b2;

  int out_dim() const { return static_cast<int>(W2.cols()); }
};

struct ModelParams {
  std::vector<GnnLayer> layers;
  Head head;
  bool frozen = false;

  int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().W.rows()); }
  int embed_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().W.cols()); }
};

// 2-layer spectral GNN by default: identity-start filters, uniform
// +-1/sqrt(fan_in) channel weights, fresh head of the same recipe.
ModelParams init_model(int input_dim, const std::vector<int>& layer_dims, int head_hidden,
                       int head_out, int filter_degree, Rng rng);

Head init_head(int in_dim, int hidden, int out, Rng rng);

using Embedding = Mat;

// Z <- ReLU(U diag(g(lambda)) U^T Z W) per layer, ReLU omitted on the last.
Embedding spectral_forward(const SpectralBasis& basis, const ModelParams& params, const Mat& X);

Embedding readout_mean(const Embedding& Z);

Embedding head_forward(const Head& head, const Embedding& Z);
inline Embedding head_forward(const ModelParams& p, const Embedding& Z) {
  return head_forward(p.head, Z);
}

// ---- tape integration -------------------------------------------------

// Named handles of trainable leaves on a tape.
struct ParamLeaves {
  std::vector<std::pair<std::string, int>> ids;

  int find(const std::string& name) const;
  void add(const std::string& name, int id) { ids.emplace_back(name, id); }
};

// Mounts every layer (filters + channel weights) on the tape. trainable=false
// mounts them as constants (frozen backbone).
ParamLeaves mount_layers(ad::Tape& t, const ModelParams& p, bool trainable);
ParamLeaves mount_head(ad::Tape& t, const Head& h, bool trainable, const std::string& prefix = "head");

// Shared spectral filtering pass. basis_left/basis_right are node ids of the
// (possibly prompt-transformed) n x K basis factors; they may be the same id.
// Returns the node-level embedding node.
int filtered_forward_tape(ad::Tape& t, int basis_left, int basis_right, const Vec& lambdas,
                          const ModelParams& shapes, const ParamLeaves& layer_leaves, int x_node);

int head_forward_tape(ad::Tape& t, const ParamLeaves& head_leaves, int z_node,
                      const std::string& prefix = "head");

// ---- gradients + optimizer --------------------------------------------

using GradientBundle = std::map<std::string, Mat>;

// Pulls gradients for every mounted leaf; frozen leaves are absent.
GradientBundle collect_gradients(const ad::Tape& t, const ParamLeaves& leaves);

using ParamRefs = std::vector<std::pair<std::string, Mat*>>;

ParamRefs model_param_refs(ModelParams& p);
ParamRefs head_param_refs(Head& h, const std::string& prefix = "head");

long param_count(const ParamRefs& refs);

struct AdamState {
  std::map<std::string, Mat> m, v;
  long t = 0;
};

// Adam, beta = (0.9, 0.999), eps = 1e-8, no weight decay.
void adam_step(const ParamRefs& params, const GradientBundle& grads, AdamState& state, double lr);

}  // namespace igap
