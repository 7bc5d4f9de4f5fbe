#include "igap/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "igap/analysis.hpp"

namespace igap {

Mat AlignmentPrompt::matrix() const {
  if (mode == PtMode::Dense) return Pt;
  return Mat::Identity(dim, dim) + A * B.transpose();
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "none") return Ablation::None;
  if (s == "ps") return Ablation::NoPs;
  if (s == "pt") return Ablation::NoPt;
  if (s == "pl") return Ablation::EndToEnd;
  if (s == "probe") return Ablation::Probe;
  throw ContractError("unknown ablation mode: " + s);
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::NoPs: return "ps";
    case Ablation::NoPt: return "pt";
    case Ablation::EndToEnd: return "pl";
    case Ablation::Probe: return "probe";
  }
  return "?";
}

void PromptConfig::validate() const {
  if (L < 1) throw ContractError("PromptConfig: L must be >= 1");
  if (K < 1) throw ContractError("PromptConfig: K must be >= 1");
  if (epochs < 0) throw ContractError("PromptConfig: epochs must be >= 0");
  if (checkpoint_every < 1) throw ContractError("PromptConfig: checkpoint_every must be >= 1");
  if (pt_mode == PtMode::LowRank && pt_rank < 1) throw ContractError("PromptConfig: pt_rank must be >= 1");
}

Mat apply_signal_prompt(const Mat& X, const SignalPrompt& sp) {
  if (sp.alpha.rows() != X.rows() || sp.alpha.cols() != sp.Ps.rows() || sp.Ps.cols() != X.cols())
    throw ContractError("apply_signal_prompt: shape mismatch");
  return X + sp.alpha * sp.Ps;
}

namespace {

// Evaluation-path forward; the public aligned_forward adds the frozen check.
Mat aligned_embed(const SpectralBasis& basis_k, const AlignmentPrompt& ap,
                  const ModelParams& params, const Mat& Xt, bool apply_pt_right) {
  if (Xt.rows() != basis_k.n) throw ContractError("aligned_forward: X rows != basis n");
  const Mat P = ap.matrix();
  Mat Bl;
  if (ap.spectral_frame) {
    if (P.rows() != basis_k.K()) throw ContractError("aligned_forward: spectral-frame Pt must be K x K");
    Bl = basis_k.U * P;
  } else {
    if (P.rows() != basis_k.n) throw ContractError("aligned_forward: Pt must be M x M");
    Bl = P * basis_k.U;
  }
  const Mat& Br = apply_pt_right ? Bl : basis_k.U;

  Mat Z = Xt;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    const Vec gains = layer.filter.response(basis_k.eigenvalues);
    Mat S = Br.transpose() * Z;
    S = gains.asDiagonal() * S;
    Z = Bl * S;
    Z = Z * layer.W;
    if (l + 1 < params.layers.size()) Z = Z.cwiseMax(0.0);
  }
  return Z;
}

Mat row_selection(const std::vector<NodeId>& ids, Eigen::Index n) {
  Mat S = Mat::Zero(Eigen::Index(ids.size()), n);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (Eigen::Index(ids[i]) >= n) throw ContractError("row selection: id out of range");
    S(Eigen::Index(i), ids[i]) = 1.0;
  }
  return S;
}

Mat small_normal(Eigen::Index rows, Eigen::Index cols, double scale, Rng rng) {
  Mat M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = scale * rng.normal();
  return M;
}

// Leaves + parameter refs registered together so gradients and Adam stay
// congruent by construction.
struct Mounter {
  ad::Tape& t;
  ParamRefs refs;
  ParamLeaves leaves;

  int mount(const std::string& name, Mat& m, bool trainable) {
    const int id = t.leaf(m, trainable, name);
    leaves.add(name, id);
    if (trainable) refs.emplace_back(name, &m);
    return id;
  }
};

// -log softmax at the label entry, summed over rows.
int nll_from_scores_tape(ad::Tape& t, int scores, const std::vector<int>& labels) {
  const int lse = t.logsumexp_rows(scores);
  const int picked = t.gather_cols(scores, labels);
  return t.sum(t.add(lse, t.scale(picked, -1.0)));
}

LabelPrompt init_label_prompt(const Mat& H0, const std::vector<int>& labels, int d, Rng rng) {
  LabelPrompt lp;
  lp.Pl = Mat::Zero(d, H0.cols());
  std::vector<int> counts(d, 0);
  for (Eigen::Index i = 0; i < H0.rows(); ++i) {
    lp.Pl.row(labels[i]) += H0.row(i);
    ++counts[labels[i]];
  }
  for (int c = 0; c < d; ++c) {
    if (counts[c] > 0) lp.Pl.row(c) /= double(counts[c]);
    if (counts[c] == 0 || lp.Pl.row(c).norm() < 1e-12)
      lp.Pl.row(c) = small_normal(1, H0.cols(), 0.1, rng.derive("row", c));
  }
  return lp;
}

}  // namespace

Mat aligned_forward(const SpectralBasis& basis_k, const AlignmentPrompt& ap,
                    const ModelParams& params, const Mat& Xt, bool apply_pt_right) {
  if (!params.frozen)
    throw ContractError("aligned_forward: pretrained parameters must be frozen");
  return aligned_embed(basis_k, ap, params, Xt, apply_pt_right);
}

Mat prompted_node_embeddings(const ModelParams& model, const SpectralBasis& basis_k,
                             const SignalPrompt& sp, const AlignmentPrompt& ap, const Mat& X,
                             bool apply_pt_right) {
  return aligned_embed(basis_k, ap, model, apply_signal_prompt(X, sp), apply_pt_right);
}

SpectralBasis finetune_basis(const Graph& g_ft, const PromptConfig& cfg) {
  const int M = int(g_ft.n_nodes);
  if (cfg.K > M) throw ContractError("finetune: K exceeds fine-tune node count");
  Laplacian L = build_laplacian(g_ft);
  if (M <= cfg.dense_cap) return truncate(eig_dense(L, cfg.dense_cap), cfg.K);
  return eig_lanczos(L, cfg.K, Rng(cfg.seed).derive("basis").next_u64());
}

double label_infonce(const Mat& head_out, const std::vector<int>& labels, const LabelPrompt& lp,
                     double tau) {
  if (Eigen::Index(labels.size()) != head_out.rows())
    throw ContractError("label_infonce: one label per row required");
  const int d = int(lp.Pl.rows());
  for (int y : labels) {
    if (y < 0 || y >= d) throw ContractError("label_infonce: label out of range");
  }
  for (Eigen::Index j = 0; j < lp.Pl.rows(); ++j) {
    if (lp.Pl.row(j).norm() <= 0.0) throw NumericError("label_infonce: zero-norm label prompt");
  }
  double loss = 0.0;
  for (Eigen::Index i = 0; i < head_out.rows(); ++i) {
    const double hn = head_out.row(i).norm();
    if (hn <= 0.0) throw NumericError("label_infonce: zero-norm embedding");
    Vec s(d);
    for (int j = 0; j < d; ++j)
      s[j] = head_out.row(i).dot(lp.Pl.row(j)) / (hn * lp.Pl.row(j).norm()) / tau;
    const double mx = s.maxCoeff();
    double denom = 0.0;
    for (int j = 0; j < d; ++j) denom += std::exp(s[j] - mx);
    loss += mx + std::log(denom) - s[labels[i]];
  }
  return loss;
}

std::vector<int> predict(const Mat& head_out, const LabelPrompt& lp) {
  const int d = int(lp.Pl.rows());
  for (Eigen::Index j = 0; j < lp.Pl.rows(); ++j) {
    if (lp.Pl.row(j).norm() <= 0.0) throw NumericError("predict: zero-norm label prompt");
  }
  std::vector<int> out(head_out.rows());
  for (Eigen::Index i = 0; i < head_out.rows(); ++i) {
    const double hn = head_out.row(i).norm();
    if (hn <= 0.0) throw NumericError("predict: zero-norm embedding");
    int best = 0;
    double best_cos = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j) {
      const double c = head_out.row(i).dot(lp.Pl.row(j)) / (hn * lp.Pl.row(j).norm());
      if (c > best_cos) {
        best_cos = c;
        best = j;
      }
    }
    out[i] = best;
  }
  return out;
}

long signal_prompt_param_count(long n_nodes, long L, long F) { return n_nodes * L + L * F; }

long alignment_prompt_param_count(long dim, PtMode mode, long rank) {
  return mode == PtMode::Dense ? dim * dim : 2 * dim * rank;
}

long label_prompt_param_count(long d, long H) { return d * H; }

double evaluate_node_accuracy(const ModelParams& model, const SpectralBasis& basis_k,
                              const SignalPrompt& sp, const AlignmentPrompt& ap, const Head& head,
                              const LabelPrompt& lp, const Graph& g,
                              const std::vector<NodeId>& ids, bool apply_pt_right) {
  const Mat Z = prompted_node_embeddings(model, basis_k, sp, ap, g.signals, apply_pt_right);
  Mat rows(ids.size(), Z.cols());
  std::vector<int> labels(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    rows.row(Eigen::Index(i)) = Z.row(ids[i]);
    labels[i] = g.node_labels[ids[i]];
  }
  const Mat H = head_forward(head, rows);
  std::vector<int> pred;
  if (lp.Pl.rows() > 0) {
    pred = predict(H, lp);
  } else {
    // end-to-end mode: logits straight from the head
    pred.resize(H.rows());
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
      Eigen::Index arg;
      H.row(i).maxCoeff(&arg);
      pred[i] = int(arg);
    }
  }
  return accuracy(pred, labels);
}

FinetuneResult finetune_node(const ModelParams& pretrained, const Graph& g_ft,
                             const std::vector<NodeId>& train_ids,
                             const std::vector<NodeId>& val_ids, const PromptConfig& cfg) {
  cfg.validate();
  const int M = int(g_ft.n_nodes);
  if (cfg.K > M) throw ContractError("finetune: K exceeds fine-tune node count");
  if (!g_ft.labeled()) throw ContractError("finetune: fine-tune graph carries no labels");
  if (train_ids.empty()) throw ContractError("finetune: empty training split");
  for (NodeId id : train_ids) {
    if (id >= g_ft.n_nodes || g_ft.node_labels[id] < 0)
      throw ContractError("finetune: missing labels in training split");
  }

  Rng master(cfg.seed);
  const bool end2end = cfg.ablate == Ablation::EndToEnd;
  const bool use_ps = cfg.ablate != Ablation::NoPs && cfg.ablate != Ablation::Probe;
  const bool use_pt = cfg.ablate != Ablation::NoPt && cfg.ablate != Ablation::Probe;
  const bool use_pl = !end2end;
  const int d = g_ft.n_classes;

  SpectralBasis basis = finetune_basis(g_ft, cfg);

  FinetuneResult st;
  st.model = pretrained;
  st.model.frozen = !end2end;
  st.sp.Ps = small_normal(cfg.L, g_ft.signal_dim(), 0.1, master.derive("Ps"));
  st.sp.alpha = Mat::Zero(M, cfg.L);
  st.ap.mode = cfg.pt_mode;
  st.ap.dim = M;
  st.ap.spectral_frame = false;
  if (cfg.pt_mode == PtMode::Dense) {
    st.ap.Pt = Mat::Identity(M, M);
  } else {
    st.ap.A = small_normal(M, cfg.pt_rank, 0.1, master.derive("PtA"));
    st.ap.B = Mat::Zero(M, cfg.pt_rank);  // Pt starts as the exact identity
  }
  st.head = init_head(st.model.embed_dim(), cfg.head_hidden, use_pl ? cfg.head_out : d,
                      master.derive("head"));

  std::vector<int> train_labels(train_ids.size());
  for (std::size_t i = 0; i < train_ids.size(); ++i) train_labels[i] = g_ft.node_labels[train_ids[i]];

  const Mat sel = row_selection(train_ids, M);
  if (use_pl) {
    const Mat Z0 = aligned_embed(basis, st.ap, st.model, g_ft.signals, cfg.apply_pt_right);
    const Mat H0 = head_forward(st.head, sel * Z0);
    st.lp = init_label_prompt(H0, train_labels, d, master.derive("Pl"));
  }

  auto eval_val = [&](const FinetuneResult& s) {
    if (val_ids.empty()) return 0.0;
    return evaluate_node_accuracy(s.model, basis, s.sp, s.ap, s.head, s.lp, g_ft, val_ids,
                                  cfg.apply_pt_right);
  };

  FinetuneResult best = st;
  double best_val = eval_val(st);
  int best_epoch = 0;
  std::vector<FinetuneTracePoint> trace;
  trace.push_back({0, std::numeric_limits<double>::quiet_NaN(), best_val});

  AdamState adam;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape t;
    Mounter mnt{t, {}, {}};

    const int x_const = t.constant(g_ft.signals);
    int x_node = x_const;
    if (use_ps) {
      const int ps = mnt.mount("prompt.Ps", st.sp.Ps, true);
      const int alpha = mnt.mount("prompt.alpha", st.sp.alpha, true);
      x_node = t.add(x_const, t.matmul(alpha, ps));
    }

    const int u_const = t.constant(basis.U);
    int b_left = u_const;
    int pt_node = -1;  // materialized Pt for the optional penalty
    if (use_pt) {
      if (cfg.pt_mode == PtMode::Dense) {
        const int pt = mnt.mount("prompt.Pt", st.ap.Pt, true);
        b_left = t.matmul(pt, u_const);
        pt_node = pt;
      } else {
        const int a = mnt.mount("prompt.PtA", st.ap.A, true);
        const int b = mnt.mount("prompt.PtB", st.ap.B, true);
        b_left = t.add(u_const, t.matmul(a, t.matmul(b, u_const, true, false)));
        if (cfg.ortho_penalty > 0.0)
          pt_node = t.add(t.constant(Mat::Identity(M, M)), t.matmul(a, b, false, true));
      }
    }
    const int b_right = cfg.apply_pt_right ? b_left : u_const;

    for (std::size_t l = 0; l < st.model.layers.size(); ++l) {
      const std::string base = "layer" + std::to_string(l);
      mnt.mount(base + ".filter", st.model.layers[l].filter.coeffs, end2end);
      mnt.mount(base + ".W", st.model.layers[l].W, end2end);
    }
    const int z = filtered_forward_tape(t, b_left, b_right, basis.eigenvalues, st.model,
                                        mnt.leaves, x_node);
    const int z_train = t.matmul(t.constant(sel), z);

    mnt.mount("head.W1", st.head.W1, true);
    mnt.mount("head.b1", st.head.b1, true);
    mnt.mount("head.W2", st.head.W2, true);
    mnt.mount("head.b2", st.head.b2, true);
    const int h = head_forward_tape(t, mnt.leaves, z_train);

    int loss;
    if (use_pl) {
      const int pl = mnt.mount("prompt.Pl", st.lp.Pl, true);
      const int scores = t.scale(t.cosine(h, pl), 1.0 / cfg.tau);
      loss = nll_from_scores_tape(t, scores, train_labels);
    } else {
      loss = nll_from_scores_tape(t, h, train_labels);
    }

    if (cfg.ortho_penalty > 0.0 && use_pt) {
      const int gram = t.matmul(pt_node, pt_node, true, false);
      const int dev = t.add(gram, t.scale(t.constant(Mat::Identity(M, M)), -1.0));
      loss = t.add(loss, t.scale(t.sum(t.square(dev)), cfg.ortho_penalty));
    }

    const double loss_value = t.value(loss)(0, 0);
    if (!std::isfinite(loss_value))
      throw NumericError("finetune: non-finite loss at epoch " + std::to_string(epoch));
    t.backward(loss);
    adam_step(mnt.refs, collect_gradients(t, mnt.leaves), adam, cfg.lr);

    const int human_epoch = epoch + 1;
    FinetuneTracePoint point{human_epoch, loss_value, -1.0};
    if (human_epoch % cfg.checkpoint_every == 0 || human_epoch == cfg.epochs) {
      point.val_metric = eval_val(st);
      if (point.val_metric > best_val) {
        best_val = point.val_metric;
        best = st;
        best.trace.clear();
        best_epoch = human_epoch;
      }
    }
    trace.push_back(point);
  }

  best.trace = std::move(trace);
  best.best_epoch = best_epoch;
  best.best_val = best_val;
  return best;
}

GraphSetFinetuneResult finetune_graphset(const ModelParams& pretrained, const GraphSet& gs,
                                         const std::vector<int>& train_ids,
                                         const std::vector<int>& val_ids, int task,
                                         const PromptConfig& cfg) {
  cfg.validate();
  if (gs.graphs.empty()) throw ContractError("finetune: empty graph set");
  if (gs.graph_labels.size() == 0 || task < 0 || task >= gs.graph_labels.cols())
    throw ContractError("finetune: missing graph labels for task");
  if (train_ids.empty()) throw ContractError("finetune: empty training split");

  int d = 0;
  for (int i : train_ids) {
    const int y = gs.graph_labels(i, task);
    if (y < 0) throw ContractError("finetune: missing labels in training split");
    d = std::max(d, y + 1);
  }
  d = std::max(d, 2);

  Rng master(cfg.seed);
  const bool end2end = cfg.ablate == Ablation::EndToEnd;
  const bool use_ps = cfg.ablate != Ablation::NoPs && cfg.ablate != Ablation::Probe;
  const bool use_pt = cfg.ablate != Ablation::NoPt && cfg.ablate != Ablation::Probe;
  const bool use_pl = !end2end;
  const int F = gs.signal_dim();
  const int K = cfg.K;

  // per-graph truncated bases, fixed across epochs
  std::vector<SpectralBasis> bases;
  std::vector<Mat> selectors;  // K_g x K frame selectors
  bases.reserve(gs.graphs.size());
  for (std::size_t i = 0; i < gs.graphs.size(); ++i) {
    const Graph& g = gs.graphs[i];
    const int kg = std::min<int>(K, int(g.n_nodes));
    SpectralBasis b = int(g.n_nodes) <= cfg.dense_cap
                          ? truncate(eig_dense(build_laplacian(g), cfg.dense_cap), kg)
                          : eig_lanczos(build_laplacian(g), kg, master.derive("basis", i).next_u64());
    bases.push_back(std::move(b));
    Mat S = Mat::Zero(kg, K);
    for (int r = 0; r < kg; ++r) S(r, r) = 1.0;
    selectors.push_back(std::move(S));
  }

  GraphSetFinetuneResult st;
  st.model = pretrained;
  st.model.frozen = !end2end;
  st.Ps = small_normal(cfg.L, F, 0.1, master.derive("Ps"));
  st.Walpha = Mat::Zero(F, cfg.L);
  st.Qt = Mat::Identity(K, K);
  st.head = init_head(st.model.embed_dim(), cfg.head_hidden, use_pl ? cfg.head_out : d,
                      master.derive("head"));

  auto embed_graph_pure = [&](int gi) {
    const Graph& g = gs.graphs[gi];
    Mat Xt = g.signals;
    if (use_ps) Xt += (g.signals * st.Walpha) * st.Ps;
    AlignmentPrompt ap;
    ap.mode = PtMode::Dense;
    ap.spectral_frame = true;
    ap.dim = int(selectors[gi].rows());
    ap.Pt = selectors[gi] * st.Qt * selectors[gi].transpose();
    const Mat Z = aligned_embed(bases[gi], ap, st.model, Xt, cfg.apply_pt_right);
    return readout_mean(Z);
  };

  std::vector<int> train_labels(train_ids.size());
  for (std::size_t i = 0; i < train_ids.size(); ++i) train_labels[i] = gs.graph_labels(train_ids[i], task);

  if (use_pl) {
    Mat H0(train_ids.size(), st.model.embed_dim());
    for (std::size_t i = 0; i < train_ids.size(); ++i) H0.row(i) = embed_graph_pure(train_ids[i]);
    H0 = head_forward(st.head, H0);
    st.lp = init_label_prompt(H0, train_labels, d, master.derive("Pl"));
  }

  auto eval_val = [&](const GraphSetFinetuneResult& s) -> double {
    if (val_ids.empty()) return 0.0;
    Mat H(val_ids.size(), s.model.embed_dim());
    std::vector<int> labels;
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < val_ids.size(); ++i) {
      const int y = gs.graph_labels(val_ids[i], task);
      if (y < 0) continue;
      H.row(Eigen::Index(keep.size())) = embed_graph_pure(val_ids[i]);
      keep.push_back(Eigen::Index(i));
      labels.push_back(y);
    }
    if (labels.empty()) return 0.0;
    Mat Hk = head_forward(s.head, H.topRows(Eigen::Index(labels.size())));
    if (use_pl && d == 2) {
      std::vector<double> scores(labels.size());
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const double hn = Hk.row(Eigen::Index(i)).norm();
        const double c1 = Hk.row(Eigen::Index(i)).dot(s.lp.Pl.row(1)) / (hn * s.lp.Pl.row(1).norm());
        const double c0 = Hk.row(Eigen::Index(i)).dot(s.lp.Pl.row(0)) / (hn * s.lp.Pl.row(0).norm());
        scores[i] = c1 - c0;
      }
      bool both = false;
      for (std::size_t i = 1; i < labels.size(); ++i)
        if (labels[i] != labels[0]) both = true;
      if (both) return roc_auc(scores, labels);
    }
    std::vector<int> pred;
    if (use_pl) {
      pred = predict(Hk, s.lp);
    } else {
      pred.resize(Hk.rows());
      for (Eigen::Index i = 0; i < Hk.rows(); ++i) {
        Eigen::Index arg;
        Hk.row(i).maxCoeff(&arg);
        pred[i] = int(arg);
      }
    }
    return accuracy(pred, labels);
  };

  GraphSetFinetuneResult best = st;
  double best_val = eval_val(st);
  int best_epoch = 0;
  std::vector<FinetuneTracePoint> trace;
  trace.push_back({0, std::numeric_limits<double>::quiet_NaN(), best_val});

  AdamState adam;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape t;
    Mounter mnt{t, {}, {}};

    int ps = -1, walpha = -1, qt = -1;
    if (use_ps) {
      ps = mnt.mount("prompt.Ps", st.Ps, true);
      walpha = mnt.mount("prompt.Walpha", st.Walpha, true);
    }
    if (use_pt) qt = mnt.mount("prompt.Qt", st.Qt, true);
    for (std::size_t l = 0; l < st.model.layers.size(); ++l) {
      const std::string base = "layer" + std::to_string(l);
      mnt.mount(base + ".filter", st.model.layers[l].filter.coeffs, end2end);
      mnt.mount(base + ".W", st.model.layers[l].W, end2end);
    }
    mnt.mount("head.W1", st.head.W1, true);
    mnt.mount("head.b1", st.head.b1, true);
    mnt.mount("head.W2", st.head.W2, true);
    mnt.mount("head.b2", st.head.b2, true);

    std::vector<int> rows;
    for (int gi : train_ids) {
      const Graph& g = gs.graphs[gi];
      const int x_const = t.constant(g.signals);
      int x_node = x_const;
      if (use_ps) x_node = t.add(x_const, t.matmul(t.matmul(x_const, walpha), ps));
      const int u_const = t.constant(bases[gi].U);
      int b_left = u_const;
      if (use_pt) {
        const int s_const = t.constant(selectors[gi]);
        const int q_sub = t.matmul(t.matmul(s_const, qt), s_const, false, true);
        b_left = t.matmul(u_const, q_sub);
      }
      const int b_right = cfg.apply_pt_right ? b_left : u_const;
      const int z = filtered_forward_tape(t, b_left, b_right, bases[gi].eigenvalues, st.model,
                                          mnt.leaves, x_node);
      rows.push_back(t.mean_rows(z));
    }
    const int emb = t.vstack(rows);
    const int h = head_forward_tape(t, mnt.leaves, emb);

    int loss;
    if (use_pl) {
      const int pl = mnt.mount("prompt.Pl", st.lp.Pl, true);
      const int scores = t.scale(t.cosine(h, pl), 1.0 / cfg.tau);
      loss = nll_from_scores_tape(t, scores, train_labels);
    } else {
      loss = nll_from_scores_tape(t, h, train_labels);
    }
    if (cfg.ortho_penalty > 0.0 && use_pt) {
      const int gram = t.matmul(qt, qt, true, false);
      const int dev = t.add(gram, t.scale(t.constant(Mat::Identity(K, K)), -1.0));
      loss = t.add(loss, t.scale(t.sum(t.square(dev)), cfg.ortho_penalty));
    }

    const double loss_value = t.value(loss)(0, 0);
    if (!std::isfinite(loss_value))
      throw NumericError("finetune: non-finite loss at epoch " + std::to_string(epoch));
    t.backward(loss);
    adam_step(mnt.refs, collect_gradients(t, mnt.leaves), adam, cfg.lr);

    const int human_epoch = epoch + 1;
    FinetuneTracePoint point{human_epoch, loss_value, -1.0};
    if (human_epoch % cfg.checkpoint_every == 0 || human_epoch == cfg.epochs) {
      point.val_metric = eval_val(st);
      if (point.val_metric > best_val) {
        best_val = point.val_metric;
        best = st;
        best.trace.clear();
        best_epoch = human_epoch;
      }
    }
    trace.push_back(point);
  }

  best.trace = std::move(trace);
  best.best_epoch = best_epoch;
  best.best_val = best_val;
  return best;
}

}  // namespace igap
