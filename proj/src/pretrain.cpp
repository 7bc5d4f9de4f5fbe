#include "igap/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace igap {

void AugmentConfig::validate() const {
  auto in_unit = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!in_unit(pos_edge_rate) || !in_unit(pos_signal_sparsity) || !in_unit(neg_edge_rate) ||
      !in_unit(neg_signal_density))
    throw ContractError("AugmentConfig: rates must lie in [0,1]");
  if (pos_edge_rate > neg_edge_rate || pos_signal_sparsity > neg_signal_density)
    throw ContractError("AugmentConfig: positive rates must not exceed negative rates");
}

Framework framework_from_string(const std::string& s) {
  if (s == "subgraph") return Framework::Subgraph;
  if (s == "linkpred") return Framework::LinkPred;
  if (s == "localglobal") return Framework::LocalGlobal;
  throw ContractError("unknown framework: " + s);
}

std::string to_string(Framework f) {
  switch (f) {
    case Framework::Subgraph: return "subgraph";
    case Framework::LinkPred: return "linkpred";
    case Framework::LocalGlobal: return "localglobal";
  }
  return "?";
}

namespace {

using EdgeSet = std::set<std::pair<NodeId, NodeId>>;

EdgeSet edge_set(const Graph& g) { return EdgeSet(g.edges.begin(), g.edges.end()); }

std::pair<NodeId, NodeId> ordered(NodeId a, NodeId b) { return a < b ? std::make_pair(a, b) : std::make_pair(b, a); }

// Symmetric signal transform X <- (I + F) X with Bernoulli(density)
// off-diagonal support and N(0, scale^2) values.
Mat perturb_signals(const Mat& X, double density, double scale, Rng& rng) {
  const Eigen::Index n = X.rows();
  Mat out = X;
  if (density <= 0.0 || scale == 0.0) return out;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (!rng.bernoulli(density)) continue;
      const double f = scale * rng.normal();
      out.row(i) += f * X.row(j);
      out.row(j) += f * X.row(i);
    }
  }
  return out;
}

// Drop n_drop existing edges and add n_add fresh non-edges; returns the new
// edge list. Falls back to fewer adds when the graph is near-complete.
std::vector<std::pair<NodeId, NodeId>> drop_add_edges(const Graph& g, std::size_t n_drop,
                                                      std::size_t n_add, Rng& rng) {
  std::vector<std::pair<NodeId, NodeId>> edges = g.edges;
  rng.shuffle(edges);
  n_drop = std::min(n_drop, edges.size());
  edges.resize(edges.size() - n_drop);
  EdgeSet present(edges.begin(), edges.end());

  const std::size_t max_possible = std::size_t(g.n_nodes) * (g.n_nodes - 1) / 2;
  std::size_t added = 0, tries = 0;
  const std::size_t try_cap = 50 * (n_add + 1);
  while (added < n_add && present.size() < max_possible && tries < try_cap) {
    ++tries;
    if (g.n_nodes < 2) break;
    NodeId a = NodeId(rng.below(g.n_nodes));
    NodeId b = NodeId(rng.below(g.n_nodes));
    if (a == b) continue;
    auto e = ordered(a, b);
    if (present.insert(e).second) {
      edges.push_back(e);
      ++added;
    }
  }
  return edges;
}

}  // namespace

Graph augment_positive(const Graph& g, const AugmentConfig& cfg) {
  cfg.validate();
  Rng rng = Rng(cfg.seed).derive("aug.pos");
  const std::size_t n_perturb = std::size_t(cfg.pos_edge_rate * double(g.num_edges()));
  const std::size_t n_drop = n_perturb / 2;
  const std::size_t n_add = n_perturb - n_drop;
  auto edges = n_perturb > 0 ? drop_add_edges(g, n_drop, n_add, rng) : g.edges;
  Mat signals = perturb_signals(g.signals, cfg.pos_signal_sparsity, cfg.pos_signal_scale, rng);
  return make_graph(g.n_nodes, std::move(edges), std::move(signals), g.node_labels, g.n_classes);
}

Graph augment_negative(const Graph& g, const AugmentConfig& cfg) {
  cfg.validate();
  Rng rng = Rng(cfg.seed).derive("aug.neg");
  std::vector<std::pair<NodeId, NodeId>> edges = g.edges;
  const std::size_t budget = std::size_t(cfg.neg_edge_rate * double(g.num_edges()));

  // degree-preserving double-edge swaps where possible; each swap rewires two
  // edges, so budget/2 swaps touch ~budget edges
  if (edges.size() >= 2 && budget >= 2) {
    EdgeSet present(edges.begin(), edges.end());
    const std::size_t n_swaps = (budget + 1) / 2;
    std::size_t done = 0, tries = 0;
    while (done < n_swaps && tries < 50 * n_swaps) {
      ++tries;
      const std::size_t ia = rng.below(edges.size());
      const std::size_t ib = rng.below(edges.size());
      if (ia == ib) continue;
      auto [a, b] = edges[ia];
      auto [c, d] = edges[ib];
      if (rng.bernoulli(0.5)) std::swap(c, d);
      // rewire (a,b),(c,d) -> (a,d),(c,b)
      if (a == d || c == b) continue;
      auto e1 = ordered(a, d), e2 = ordered(c, b);
      if (present.count(e1) || present.count(e2) || e1 == e2) continue;
      present.erase(edges[ia]);
      present.erase(edges[ib]);
      present.insert(e1);
      present.insert(e2);
      edges[ia] = e1;
      edges[ib] = e2;
      ++done;
    }
    if (done < n_swaps) {
      // fallback: random drop/add for the remainder, keeps count within +-1
      const std::size_t remainder = (n_swaps - done) * 2;
      Graph tmp;
      tmp.n_nodes = g.n_nodes;
      tmp.edges.assign(present.begin(), present.end());
      edges = drop_add_edges(tmp, remainder / 2, remainder - remainder / 2, rng);
    }
  }
  Mat signals = perturb_signals(g.signals, cfg.neg_signal_density, cfg.neg_signal_scale, rng);
  return make_graph(g.n_nodes, std::move(edges), std::move(signals), g.node_labels, g.n_classes);
}

Graph shuffle_features(const Graph& g, std::uint64_t seed) {
  Rng rng = Rng(seed).derive("shuffle");
  std::vector<NodeId> perm(g.n_nodes);
  for (NodeId i = 0; i < g.n_nodes; ++i) perm[i] = i;
  rng.shuffle(perm);
  Mat signals(g.signals.rows(), g.signals.cols());
  for (NodeId i = 0; i < g.n_nodes; ++i) signals.row(i) = g.signals.row(perm[i]);
  Graph out = g;
  out.signals = std::move(signals);
  return out;
}

MaskedEdges mask_edges(const Graph& g, double rate, std::uint64_t seed) {
  if (rate <= 0.0 || rate >= 1.0) throw ContractError("mask_edges: rate must lie in (0,1)");
  Rng rng = Rng(seed).derive("mask");
  const std::size_t n_mask = std::size_t(rate * double(g.num_edges()));

  std::vector<std::pair<NodeId, NodeId>> edges = g.edges;
  rng.shuffle(edges);
  MaskedEdges out;
  out.masked.assign(edges.end() - n_mask, edges.end());
  edges.resize(edges.size() - n_mask);
  out.remaining = make_graph(g.n_nodes, std::move(edges), g.signals, g.node_labels, g.n_classes);

  // negatives: same count of pairs non-adjacent in the original graph
  const EdgeSet original = edge_set(g);
  const std::size_t max_pairs = std::size_t(g.n_nodes) * (g.n_nodes - 1) / 2;
  if (max_pairs < original.size() + n_mask)
    throw ContractError("mask_edges: graph too dense to sample non-adjacent negatives");
  EdgeSet chosen;
  std::size_t tries = 0;
  const std::size_t try_cap = 200 * (n_mask + 1);
  while (chosen.size() < n_mask && tries < try_cap) {
    ++tries;
    NodeId a = NodeId(rng.below(g.n_nodes));
    NodeId b = NodeId(rng.below(g.n_nodes));
    if (a == b) continue;
    auto e = ordered(a, b);
    if (original.count(e)) continue;
    chosen.insert(e);
  }
  if (chosen.size() < n_mask) {
    // dense graph: enumerate the complement instead of rejection sampling
    std::vector<std::pair<NodeId, NodeId>> complement;
    for (NodeId a = 0; a < g.n_nodes; ++a)
      for (NodeId b = a + 1; b < g.n_nodes; ++b)
        if (!original.count({a, b})) complement.emplace_back(a, b);
    if (complement.size() < n_mask)
      throw ContractError("mask_edges: not enough non-adjacent pairs for negatives");
    rng.shuffle(complement);
    chosen = EdgeSet(complement.begin(), complement.begin() + n_mask);
  }
  out.negatives.assign(chosen.begin(), chosen.end());
  return out;
}

namespace {

ContrastiveBatch sample_subgraph_batch(const Graph& g, const AugmentConfig& cfg, int batch_size,
                                       int radius, std::uint64_t seed) {
  if (batch_size > int(g.n_nodes))
    throw ContractError("sample_contrastive_batch: batch larger than available centers");
  Rng rng = Rng(seed).derive("batch.subgraph");
  auto centers = sample_without_replacement(rng, g.n_nodes, NodeId(batch_size));
  ContrastiveBatch batch;
  batch.framework = Framework::Subgraph;
  for (int i = 0; i < batch_size; ++i) {
    Graph anchor = ego_subgraph(g, centers[i], radius);
    AugmentConfig pos_cfg = cfg;
    pos_cfg.seed = rng.derive("pos", i).next_u64();
    AugmentConfig neg_cfg = cfg;
    neg_cfg.seed = rng.derive("neg", i).next_u64();
    batch.positives.push_back(augment_positive(anchor, pos_cfg));
    batch.negatives.push_back(augment_negative(anchor, neg_cfg));
    batch.negative_source.push_back(i);
    batch.anchors.push_back(std::move(anchor));
  }
  return batch;
}

ContrastiveBatch sample_linkpred_batch(const Graph& g, double mask_rate, int batch_size, int radius,
                                       std::uint64_t seed) {
  Rng rng = Rng(seed).derive("batch.linkpred");
  MaskedEdges me = mask_edges(g, mask_rate, rng.next_u64());
  if (me.masked.empty())
    throw ContractError("sample_contrastive_batch: no masked edges to anchor on");
  const int pairs = std::min<int>(batch_size, int(me.masked.size()));
  ContrastiveBatch batch;
  batch.framework = Framework::LinkPred;
  std::set<NodeId> neg_nodes;
  for (int i = 0; i < pairs; ++i) {
    auto [u, v] = me.masked[i];
    batch.anchors.push_back(ego_subgraph(me.remaining, u, radius));
    batch.positives.push_back(ego_subgraph(me.remaining, v, radius));
  }
  for (std::size_t i = 0; i < me.negatives.size() && int(neg_nodes.size()) < 2 * pairs; ++i) {
    neg_nodes.insert(me.negatives[i].first);
    neg_nodes.insert(me.negatives[i].second);
  }
  for (NodeId x : neg_nodes) {
    batch.negatives.push_back(ego_subgraph(me.remaining, x, radius));
    batch.negative_source.push_back(-1);
  }
  if (batch.negatives.empty())
    throw ContractError("sample_contrastive_batch: no negatives available");
  return batch;
}

ContrastiveBatch sample_localglobal_batch(const Graph& g, int batch_size, int radius,
                                          std::uint64_t seed) {
  if (batch_size > int(g.n_nodes))
    throw ContractError("sample_contrastive_batch: batch larger than available centers");
  Rng rng = Rng(seed).derive("batch.localglobal");
  auto centers = sample_without_replacement(rng, g.n_nodes, NodeId(batch_size));
  ContrastiveBatch batch;
  batch.framework = Framework::LocalGlobal;
  for (int i = 0; i < batch_size; ++i) {
    batch.anchors.push_back(ego_subgraph(g, centers[i], radius));
    batch.positives.push_back(g);
    batch.negatives.push_back(shuffle_features(g, rng.derive("shuf", i).next_u64()));
    batch.negative_source.push_back(-1);
  }
  return batch;
}

}  // namespace

ContrastiveBatch sample_contrastive_batch(const Graph& g, Framework framework,
                                          const AugmentConfig& cfg, int batch_size,
                                          std::uint64_t seed, int ego_radius, double mask_rate) {
  if (batch_size < 1) throw ContractError("sample_contrastive_batch: batch_size must be >= 1");
  switch (framework) {
    case Framework::Subgraph: return sample_subgraph_batch(g, cfg, batch_size, ego_radius, seed);
    case Framework::LinkPred: return sample_linkpred_batch(g, mask_rate, batch_size, ego_radius, seed);
    case Framework::LocalGlobal: return sample_localglobal_batch(g, batch_size, ego_radius, seed);
  }
  throw ContractError("sample_contrastive_batch: bad framework");
}

ContrastiveBatch sample_contrastive_batch(const GraphSet& gs, Framework framework,
                                          const AugmentConfig& cfg, int batch_size,
                                          std::uint64_t seed, int ego_radius, double mask_rate) {
  if (gs.graphs.empty()) throw ContractError("sample_contrastive_batch: empty graph set");
  Rng rng = Rng(seed).derive("batch.set");
  const int take = std::min<int>(batch_size, int(gs.graphs.size()));
  auto picks = sample_without_replacement(rng, NodeId(gs.graphs.size()), NodeId(take));

  ContrastiveBatch batch;
  batch.framework = framework;
  for (int i = 0; i < take; ++i) {
    const Graph& g = gs.graphs[picks[i]];
    switch (framework) {
      case Framework::Subgraph: {
        AugmentConfig a = cfg, p = cfg, n = cfg;
        a.seed = rng.derive("anchor", i).next_u64();
        p.seed = rng.derive("pos", i).next_u64();
        n.seed = rng.derive("neg", i).next_u64();
        batch.anchors.push_back(augment_positive(g, a));
        batch.positives.push_back(augment_positive(g, p));
        batch.negatives.push_back(augment_negative(g, n));
        batch.negative_source.push_back(i);
        break;
      }
      case Framework::LocalGlobal: {
        const NodeId center = NodeId(rng.derive("center", i).below(g.n_nodes));
        batch.anchors.push_back(ego_subgraph(g, center, ego_radius));
        batch.positives.push_back(g);
        batch.negatives.push_back(shuffle_features(g, rng.derive("shuf", i).next_u64()));
        batch.negative_source.push_back(-1);
        break;
      }
      case Framework::LinkPred: {
        MaskedEdges me = mask_edges(g, mask_rate, rng.derive("mask", i).next_u64());
        if (me.masked.empty()) continue;
        auto [u, v] = me.masked[0];
        batch.anchors.push_back(ego_subgraph(me.remaining, u, ego_radius));
        batch.positives.push_back(ego_subgraph(me.remaining, v, ego_radius));
        if (!me.negatives.empty()) {
          batch.negatives.push_back(ego_subgraph(me.remaining, me.negatives[0].first, ego_radius));
          batch.negative_source.push_back(-1);
        }
        break;
      }
    }
  }
  if (batch.anchors.empty() || batch.negatives.empty())
    throw ContractError("sample_contrastive_batch: empty batch from graph set");
  return batch;
}

double info_nce_scores(const Vec& pos_scores, const Mat& neg_scores, double tau) {
  if (pos_scores.size() != neg_scores.rows())
    throw ContractError("info_nce: one positive score per anchor required");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < pos_scores.size(); ++i) {
    double mx = pos_scores[i] / tau;
    for (Eigen::Index j = 0; j < neg_scores.cols(); ++j) mx = std::max(mx, neg_scores(i, j) / tau);
    double denom = std::exp(pos_scores[i] / tau - mx);
    for (Eigen::Index j = 0; j < neg_scores.cols(); ++j)
      denom += std::exp(neg_scores(i, j) / tau - mx);
    loss += (mx + std::log(denom)) - pos_scores[i] / tau;
  }
  return loss;
}

int info_nce_tape(ad::Tape& t, int anchors, int positives, int negs, double tau, bool in_batch) {
  const Eigen::Index B = t.value(anchors).rows();
  if (t.value(positives).rows() != B)
    throw ContractError("info_nce: one positive per anchor required");
  const int s_pos = t.cosine(anchors, positives);  // B x B
  std::vector<int> diag(B);
  for (Eigen::Index i = 0; i < B; ++i) diag[i] = int(i);
  const int pos = t.gather_cols(s_pos, diag);  // B x 1

  int cand;
  if (in_batch) {
    cand = negs >= 0 ? t.hstack(s_pos, t.cosine(anchors, negs)) : s_pos;
  } else {
    if (negs < 0) throw ContractError("info_nce: at least one negative required");
    cand = t.hstack(pos, t.cosine(anchors, negs));
  }
  const int lse = t.logsumexp_rows(t.scale(cand, 1.0 / tau));
  return t.sum(t.add(lse, t.scale(pos, -1.0 / tau)));
}

SpectralBasis view_basis(const Graph& g, int dense_cap, int k_pre, std::uint64_t seed) {
  Laplacian L = build_laplacian(g);
  if (int(g.n_nodes) <= dense_cap) return eig_dense(L, dense_cap);
  return eig_lanczos(L, std::min<int>(k_pre, int(g.n_nodes) - 1), seed);
}

namespace {

PretrainResult run_pretrain(const Graph* graph, const GraphSet* set, ModelParams model,
                            const PretrainConfig& cfg, const ResumePoint* resume) {
  cfg.augment.validate();
  if (cfg.epochs < 0) throw ContractError("pretrain: epochs must be >= 0");
  Rng master(cfg.seed);

  PretrainResult result;
  result.adam = resume ? resume->adam : AdamState{};
  result.loss_trace = resume ? resume->loss_trace : std::vector<double>{};
  const int start_epoch = resume ? resume->start_epoch : 0;

  ParamRefs trainable;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    trainable.emplace_back("layer" + std::to_string(l) + ".filter", &model.layers[l].filter.coeffs);
    trainable.emplace_back("layer" + std::to_string(l) + ".W", &model.layers[l].W);
  }

  SpectralBasis full_basis;
  bool have_full_basis = false;

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const std::uint64_t epoch_seed = master.derive("pretrain.epoch", epoch).next_u64();
    ContrastiveBatch batch =
        graph ? sample_contrastive_batch(*graph, cfg.framework, cfg.augment, cfg.batch_size,
                                         epoch_seed, cfg.ego_radius, cfg.mask_rate)
              : sample_contrastive_batch(*set, cfg.framework, cfg.augment, cfg.batch_size,
                                         epoch_seed, cfg.ego_radius, cfg.mask_rate);

    ad::Tape tape;
    ParamLeaves leaves;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      const std::string base = "layer" + std::to_string(l);
      leaves.add(base + ".filter", tape.leaf(model.layers[l].filter.coeffs, true, base + ".filter"));
      leaves.add(base + ".W", tape.leaf(model.layers[l].W, true, base + ".W"));
    }

    auto embed_view = [&](const Graph& view, const SpectralBasis& basis) {
      const int x = tape.constant(view.signals);
      const int u = tape.constant(basis.U);
      const int z = filtered_forward_tape(tape, u, u, basis.eigenvalues, model, leaves, x);
      return tape.mean_rows(z);
    };

    auto embed_views = [&](const std::vector<Graph>& views, bool structure_is_full) {
      std::vector<int> rows;
      for (std::size_t i = 0; i < views.size(); ++i) {
        if (structure_is_full) {
          if (!have_full_basis && graph) {
            full_basis = view_basis(*graph, cfg.dense_cap, cfg.k_pre,
                                    master.derive("basis.full").next_u64());
            have_full_basis = true;
          }
          rows.push_back(embed_view(views[i], full_basis));
        } else {
          SpectralBasis local = view_basis(views[i], cfg.dense_cap, cfg.k_pre,
                                           master.derive("basis", epoch, i).next_u64());
          rows.push_back(embed_view(views[i], local));
        }
      }
      return tape.vstack(rows);
    };

    // local-global on a single graph: positives and shuffled negatives share
    // the full graph's structure, so one decomposition serves them all
    const bool lg_single = graph && cfg.framework == Framework::LocalGlobal;
    const int anchors = embed_views(batch.anchors, false);
    const int positives = embed_views(batch.positives, lg_single);
    const int negatives = batch.negatives.empty() ? -1 : embed_views(batch.negatives, lg_single);

    const bool in_batch = cfg.framework == Framework::Subgraph;
    const int loss = info_nce_tape(tape, anchors, positives, negatives, cfg.tau, in_batch);
    const double loss_value = tape.value(loss)(0, 0);
    if (!std::isfinite(loss_value))
      throw NumericError("pretrain: non-finite loss at epoch " + std::to_string(epoch));

    tape.backward(loss);
    GradientBundle grads = collect_gradients(tape, leaves);
    adam_step(trainable, grads, result.adam, cfg.lr);
    result.loss_trace.push_back(loss_value);
  }
  result.model = std::move(model);
  result.epochs_done = cfg.epochs;
  return result;
}

}  // namespace

PretrainResult pretrain_loop(const Graph& g, ModelParams model, const PretrainConfig& cfg,
                             const ResumePoint* resume) {
  return run_pretrain(&g, nullptr, std::move(model), cfg, resume);
}

PretrainResult pretrain_loop(const GraphSet& gs, ModelParams model, const PretrainConfig& cfg,
                             const ResumePoint* resume) {
  return run_pretrain(nullptr, &gs, std::move(model), cfg, resume);
}

}  // namespace igap
