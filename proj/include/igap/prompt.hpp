#pragma once


#include "igap/graph.hpp"
#include "igap/model.hpp"

namespace igap {

// Additive signal compensation x_i <- x_i + sum_j alpha[i][j] Ps[j]; a bank
// of L prompt vectors shared across nodes keeps the trainable count at
// N*L + L*F instead of N*F.
struct SignalPrompt {
  Mat Ps;     // L x F
  Mat alpha;  // N x L
};

enum class PtMode { Dense, LowRank };

// Learnable transform aligning the fine-tune graph's K-smallest spectral
// components with the (inaccessible) pre-training basis. Initialized to the
// exact identity. Node tasks use an M x M transform in node space; graph-set
// tasks share a K x K transform acting on spectral coordinates.
struct AlignmentPrompt {
  PtMode mode = PtMode::Dense;
  int dim = 0;              // M (node space) or K (spectral frame)
  bool spectral_frame = false;
  Mat Pt;                   // dense mode: dim x dim
  Mat A, B;                 // low-rank mode: Pt = I + A B^T, dim x r each

  Mat matrix() const;  // materialized transform
};

struct LabelPrompt {
  Mat Pl;  // d x H, one row per class
};

enum class Ablation { None, NoPs, NoPt, EndToEnd, Probe };

Ablation ablation_from_string(const std::string& s);
std::string to_string(Ablation a);

struct PromptConfig {
  int L = 16;
  int K = 32;
  double lr = 1e-3;
  int epochs = 100;
  int checkpoint_every = 10;
  PtMode pt_mode = PtMode::Dense;
  int pt_rank = 16;
  double ortho_penalty = 0.0;
  double tau = 0.5;
  bool apply_pt_right = true;  // Eq-literal: the input projection is also rotated
  Ablation ablate = Ablation::None;
  int head_hidden = 128;
  int head_out = 128;
  int dense_cap = kDenseCapDefault;
  std::uint64_t seed = 0;

  void validate() const;
};

Mat apply_signal_prompt(const Mat& X, const SignalPrompt& sp);

// Z per layer = Pt U_K g(Lambda) U_K^T Pt^T X W with the inter-layer ReLU of
// spectral_forward; requires the frozen flag (training never flows through
// this path, it is the evaluation/oracle route).
Mat aligned_forward(const SpectralBasis& basis_k, const AlignmentPrompt& ap,
                    const ModelParams& params, const Mat& Xt, bool apply_pt_right = true);

// Classification InfoNCE against trainable label representations.
double label_infonce(const Mat& head_out, const std::vector<int>& labels, const LabelPrompt& lp,
                     double tau);

// argmax_j cos(p_j, head(z_i)); ties resolved to the lowest class index.
std::vector<int> predict(const Mat& head_out, const LabelPrompt& lp);

// trainable-count helpers
long signal_prompt_param_count(long n_nodes, long L, long F);
long alignment_prompt_param_count(long dim, PtMode mode, long rank);
long label_prompt_param_count(long d, long H);

struct FinetuneTracePoint {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = -1.0;  // -1 when not a checkpoint epoch
};

struct FinetuneResult {
  SignalPrompt sp;
  AlignmentPrompt ap;
  LabelPrompt lp;
  Head head;
  ModelParams model;  // backbone; differs from input only in end-to-end mode
  std::vector<FinetuneTracePoint> trace;
  int best_epoch = 0;
  double best_val = 0.0;
};

// Node classification fine-tuning on a single graph with given train/val
// splits (ids into g_ft). The backbone stays frozen except in the explicit
// end-to-end ablation.
FinetuneResult finetune_node(const ModelParams& pretrained, const Graph& g_ft,
                             const std::vector<NodeId>& train_ids,
                             const std::vector<NodeId>& val_ids, const PromptConfig& cfg);

// Node-level embeddings under the current prompts (evaluation path).
Mat prompted_node_embeddings(const ModelParams& model, const SpectralBasis& basis_k,
                             const SignalPrompt& sp, const AlignmentPrompt& ap, const Mat& X,
                             bool apply_pt_right);

// The K-smallest basis the fine-tune loop trains against, derived solely
// from (graph, cfg) so evaluation code can reproduce it.
SpectralBasis finetune_basis(const Graph& g_ft, const PromptConfig& cfg);

// Graph classification fine-tuning over a GraphSet; `task` selects the label
// column. alpha comes from a shared linear map of raw signals so shapes stay
// graph-independent, and Pt acts on spectral coordinates.
struct GraphSetFinetuneResult {
  Mat Ps;
  Mat Walpha;  // F x L shared alpha generator
  Mat Qt;      // K x K spectral-frame transform
  LabelPrompt lp;
  Head head;
  ModelParams model;
  std::vector<FinetuneTracePoint> trace;
  int best_epoch = 0;
  double best_val = 0.0;
};

GraphSetFinetuneResult finetune_graphset(const ModelParams& pretrained, const GraphSet& gs,
                                         const std::vector<int>& train_ids,
                                         const std::vector<int>& val_ids, int task,
                                         const PromptConfig& cfg);

// Evaluation helpers used by the harness.
double evaluate_node_accuracy(const ModelParams& model, const SpectralBasis& basis_k,
                              const SignalPrompt& sp, const AlignmentPrompt& ap, const Head& head,
                              const LabelPrompt& lp, const Graph& g,
                              const std::vector<NodeId>& ids, bool apply_pt_right);

}  // namespace igap
