#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "igap/pretrain.hpp"
#include "igap/synth.hpp"
#include "oracles.hpp"

using namespace igap;

namespace {

AugmentConfig zero_rates() {
  AugmentConfig cfg;
  cfg.pos_edge_rate = 0.0;
  cfg.pos_signal_sparsity = 0.0;
  cfg.pos_signal_scale = 0.0;
  cfg.neg_edge_rate = 0.0;
  cfg.neg_signal_density = 0.0;
  cfg.neg_signal_scale = 0.0;
  return cfg;
}

std::size_t edge_difference(const Graph& a, const Graph& b) {
  std::set<std::pair<NodeId, NodeId>> ea(a.edges.begin(), a.edges.end());
  std::set<std::pair<NodeId, NodeId>> eb(b.edges.begin(), b.edges.end());
  std::size_t diff = 0;
  for (const auto& e : ea)
    if (!eb.count(e)) ++diff;
  for (const auto& e : eb)
    if (!ea.count(e)) ++diff;
  return diff;
}

}  // namespace

TEST_CASE("zero-rate augmentations are the identity") {
  const Graph g = oracle::random_graph(30, 0.2, 4, 1);
  AugmentConfig cfg = zero_rates();
  cfg.seed = 7;
  CHECK(augment_positive(g, cfg) == g);
  CHECK(augment_negative(g, cfg) == g);
}

TEST_CASE("positive augmentation perturbs exactly floor(rate*M) edges") {
  Graph g = oracle::random_graph(60, 0.12, 2, 2);
  while (g.num_edges() < 100) g = oracle::random_graph(60, 0.15, 2, g.num_edges());
  // trim to exactly 100 edges for the arithmetic
  g.edges.resize(100);
  g = make_graph(g.n_nodes, g.edges, g.signals);

  AugmentConfig cfg = zero_rates();
  cfg.pos_edge_rate = 0.05;
  cfg.neg_edge_rate = 0.4;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const Graph aug = augment_positive(g, cfg);
    // 2 drops + 3 adds = 5 touched edges
    CHECK(edge_difference(g, aug) == 5);
    CHECK(aug.n_nodes == g.n_nodes);
  }
}

TEST_CASE("positive signal perturbation obeys the sparse-small norm bound") {
  const Graph g = oracle::random_graph(50, 0.15, 6, 3);
  AugmentConfig cfg = zero_rates();
  cfg.pos_signal_sparsity = 0.05;
  cfg.pos_signal_scale = 0.05;
  cfg.neg_edge_rate = 0.4;
  cfg.neg_signal_density = 0.5;
  cfg.neg_signal_scale = 0.5;
  const double bound = 3.0 * cfg.pos_signal_scale * std::sqrt(cfg.pos_signal_sparsity * 50.0);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    cfg.seed = seed;
    const Graph aug = augment_positive(g, cfg);
    const double ratio = (aug.signals - g.signals).norm() / g.signals.norm();
    CHECK(ratio <= bound);
  }
}

TEST_CASE("negative augmentation conserves node and edge counts") {
  const Graph g = oracle::random_graph(40, 0.2, 3, 4);
  AugmentConfig cfg;  // defaults: heavy negative rates
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    const Graph aug = augment_negative(g, cfg);
    CHECK(aug.n_nodes == g.n_nodes);
    CHECK(std::abs(long(aug.num_edges()) - long(g.num_edges())) <= 1);
  }
}

TEST_CASE("negative views shift the spectrum more than positive views") {
  const Graph g = gen_sbm({3, 20, 0.3, 0.02, 3, 1.0, 1.0, 5});
  const SpectralBasis base = eig_dense(build_laplacian(g));
  AugmentConfig cfg;  // spec defaults: pos 0.05 / neg 0.4
  double pos_total = 0.0, neg_total = 0.0;
  const int seeds = 50;
  for (std::uint64_t seed = 0; seed < std::uint64_t(seeds); ++seed) {
    cfg.seed = seed;
    const SpectralBasis ps = eig_dense(build_laplacian(augment_positive(g, cfg)));
    const SpectralBasis ns = eig_dense(build_laplacian(augment_negative(g, cfg)));
    pos_total += (ps.eigenvalues - base.eigenvalues).cwiseAbs().sum();
    neg_total += (ns.eigenvalues - base.eigenvalues).cwiseAbs().sum();
  }
  CHECK(neg_total / seeds > pos_total / seeds);
}

TEST_CASE("positive views preserve the leading subspace better than negative views") {
  const Graph g = gen_sbm({4, 25, 0.3, 0.02, 4, 1.0, 1.0, 77});
  const SpectralBasis base = truncate(eig_dense(build_laplacian(g)), 16);
  AugmentConfig cfg;
  double pos_angle = 0.0, neg_angle = 0.0;
  const int seeds = 50;
  for (std::uint64_t seed = 0; seed < std::uint64_t(seeds); ++seed) {
    cfg.seed = seed;
    const SpectralBasis ps = truncate(eig_dense(build_laplacian(augment_positive(g, cfg))), 16);
    const SpectralBasis ns = truncate(eig_dense(build_laplacian(augment_negative(g, cfg))), 16);
    pos_angle += max_principal_angle(ps.U, base.U);
    neg_angle += max_principal_angle(ns.U, base.U);
  }
  CHECK(pos_angle / seeds < neg_angle / seeds);
}

TEST_CASE("shuffle_features") {
  SUBCASE("single node is trivially unchanged") {
    const Graph g = make_graph(1, {}, Mat::Constant(1, 2, 3.0));
    CHECK(shuffle_features(g, 123) == g);
  }
  SUBCASE("a two-node swap exchanges rows") {
    Mat X(2, 1);
    X << 1.0, 2.0;
    const Graph g = make_graph(2, {{0, 1}}, std::move(X));
    bool saw_swap = false, saw_identity = false;
    for (std::uint64_t seed = 0; seed < 32 && !(saw_swap && saw_identity); ++seed) {
      const Graph s = shuffle_features(g, seed);
      if (s.signals(0, 0) == 2.0 && s.signals(1, 0) == 1.0) saw_swap = true;
      if (s.signals(0, 0) == 1.0 && s.signals(1, 0) == 2.0) saw_identity = true;
    }
    CHECK(saw_swap);
    CHECK(saw_identity);
  }
  SUBCASE("row multiset and structure preserved") {
    const Graph g = oracle::random_graph(20, 0.2, 3, 6);
    const Graph s = shuffle_features(g, 9);
    CHECK(s.edges == g.edges);
    std::multiset<double> a, b;
    for (Eigen::Index i = 0; i < g.signals.rows(); ++i) {
      a.insert(g.signals(i, 0));
      b.insert(s.signals(i, 0));
    }
    CHECK(a == b);
  }
}

TEST_CASE("mask_edges") {
  SUBCASE("small rate masks floor(rate*M) edges") {
    const Graph k3 = oracle::triangle_graph();
    const MaskedEdges me = mask_edges(k3, 0.2, 1);  // floor(0.6) = 0
    CHECK(me.masked.empty());
    const Graph p4 = oracle::path_graph(4);
    const MaskedEdges me2 = mask_edges(p4, 0.4, 1);  // floor(1.2) = 1
    CHECK(me2.masked.size() == 1);
    CHECK(me2.remaining.num_edges() == 2);
  }
  SUBCASE("complete graphs cannot supply non-adjacent negatives") {
    CHECK_THROWS_AS(mask_edges(oracle::triangle_graph(), 0.4, 1), ContractError);
  }
  SUBCASE("masked pairs leave the remaining structure") {
    const Graph g = oracle::random_graph(30, 0.2, 1, 7);
    const MaskedEdges me = mask_edges(g, 0.3, 2);
    std::set<std::pair<NodeId, NodeId>> remaining(me.remaining.edges.begin(), me.remaining.edges.end());
    for (const auto& e : me.masked) CHECK(remaining.count(e) == 0);
    CHECK(me.masked.size() + remaining.size() == g.num_edges());
  }
  SUBCASE("negatives are non-adjacent in the original graph and equal in count") {
    const Graph g = oracle::random_graph(30, 0.2, 1, 8);
    const MaskedEdges me = mask_edges(g, 0.3, 3);
    CHECK(me.negatives.size() == me.masked.size());
    std::set<std::pair<NodeId, NodeId>> original(g.edges.begin(), g.edges.end());
    for (const auto& [u, v] : me.negatives) {
      CHECK(u != v);
      CHECK(original.count({std::min(u, v), std::max(u, v)}) == 0);
    }
  }
  SUBCASE("rate bounds enforced") {
    CHECK_THROWS_AS(mask_edges(oracle::triangle_graph(), 0.0, 1), ContractError);
    CHECK_THROWS_AS(mask_edges(oracle::triangle_graph(), 1.0, 1), ContractError);
  }
}

TEST_CASE("subgraph batch contract") {
  const Graph g = oracle::random_graph(60, 0.1, 3, 9);
  AugmentConfig cfg;
  const ContrastiveBatch b = sample_contrastive_batch(g, Framework::Subgraph, cfg, 8, 5);
  CHECK(b.anchors.size() == 8);
  CHECK(b.positives.size() == 8);
  CHECK(b.negatives.size() >= 8);
  // positives share node counts with their anchors; anchors are distinct views
  for (int i = 0; i < 8; ++i) CHECK(b.positives[i].n_nodes == b.anchors[i].n_nodes);
  CHECK_THROWS_AS(sample_contrastive_batch(g, Framework::Subgraph, cfg, 100, 5), ContractError);
}

TEST_CASE("link-pred batch on a path with one masked edge") {
  const Graph g = oracle::path_graph(4, 2);
  AugmentConfig cfg;
  // rate 0.4 on 3 edges -> exactly 1 masked edge -> exactly 1 anchor pair
  const ContrastiveBatch b =
      sample_contrastive_batch(g, Framework::LinkPred, cfg, 8, 3, 2, 0.4);
  CHECK(b.anchors.size() == 1);
  CHECK(b.positives.size() == 1);
  CHECK(b.negatives.size() >= 1);
}

TEST_CASE("local-global batch over a graph set") {
  GraphSet gs;
  for (std::uint64_t s = 0; s < 4; ++s) gs.graphs.push_back(oracle::random_graph(15, 0.3, 3, s));
  AugmentConfig cfg;
  const ContrastiveBatch b = sample_contrastive_batch(gs, Framework::LocalGlobal, cfg, 8, 6);
  CHECK(b.anchors.size() == 4);
  CHECK(b.positives.size() == 4);
  CHECK(b.negatives.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(b.negatives[i].edges == b.positives[i].edges);  // shuffled negatives keep structure
  }
}

TEST_CASE("info_nce closed forms") {
  SUBCASE("uniform scores over 1 positive + 3 negatives give log 4") {
    Vec pos(1);
    pos << 0.37;
    Mat neg(1, 3);
    neg << 0.37, 0.37, 0.37;
    CHECK(info_nce_scores(pos, neg, 0.5) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("perfect positive, opposite negative, tau = 0.5") {
    Vec pos(1);
    pos << 1.0;
    Mat neg(1, 1);
    neg << -1.0;
    // -log(e^2 / (e^2 + e^-2)) = log(1 + e^-4)
    CHECK(info_nce_scores(pos, neg, 0.5) == doctest::Approx(std::log(1.0 + std::exp(-4.0))));
    CHECK(info_nce_scores(pos, neg, 0.5) == doctest::Approx(0.0181).epsilon(2e-3));
  }
  SUBCASE("shift invariance per anchor") {
    Rng rng(11);
    Vec pos(3);
    Mat neg(3, 5);
    for (int i = 0; i < 3; ++i) pos[i] = rng.normal();
    for (int i = 0; i < 15; ++i) neg(i % 3, i / 3) = rng.normal();
    const double base = info_nce_scores(pos, neg, 0.7);
    Vec pos2 = pos;
    Mat neg2 = neg;
    pos2[1] += 3.21;
    neg2.row(1).array() += 3.21;
    CHECK(info_nce_scores(pos2, neg2, 0.7) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("info_nce tape agrees with the score oracle and differentiates") {
  Rng rng(12);
  Mat A(3, 4), P(3, 4), N(5, 4);
  for (Eigen::Index i = 0; i < A.size(); ++i) A(i) = rng.normal();
  for (Eigen::Index i = 0; i < P.size(); ++i) P(i) = rng.normal();
  for (Eigen::Index i = 0; i < N.size(); ++i) N(i) = rng.normal();
  const double tau = 0.5;

  auto scores_loss = [&](const Mat& anchors) {
    Vec pos(3);
    Mat neg(3, 5);
    for (int i = 0; i < 3; ++i) {
      pos[i] = anchors.row(i).dot(P.row(i)) / (anchors.row(i).norm() * P.row(i).norm());
      for (int j = 0; j < 5; ++j)
        neg(i, j) = anchors.row(i).dot(N.row(j)) / (anchors.row(i).norm() * N.row(j).norm());
    }
    return info_nce_scores(pos, neg, tau);
  };

  ad::Tape t;
  const int a = t.leaf(A, true);
  const int p = t.constant(P);
  const int n = t.constant(N);
  const int loss = info_nce_tape(t, a, p, n, tau, false);
  CHECK(t.value(loss)(0, 0) == doctest::Approx(scores_loss(A)).epsilon(1e-10));
  t.backward(loss);
  CHECK(oracle::max_fd_error(scores_loss, A, t.grad(a)) <= 1e-5);
}

TEST_CASE("pretrain with lr=0 is a no-op on parameters") {
  const Graph g = gen_sbm({3, 12, 0.4, 0.05, 4, 1.0, 1.0, 5});
  ModelParams model = init_model(4, {6, 6}, 6, 6, 2, Rng(3));
  const Mat w0 = model.layers[0].W;
  const Mat f0 = model.layers[0].filter.coeffs;
  PretrainConfig cfg;
  cfg.epochs = 3;
  cfg.lr = 0.0;
  cfg.batch_size = 3;
  cfg.seed = 4;
  const PretrainResult res = pretrain_loop(g, std::move(model), cfg);
  CHECK((res.model.layers[0].W - w0).cwiseAbs().maxCoeff() == 0.0);
  CHECK((res.model.layers[0].filter.coeffs - f0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(res.loss_trace.size() == 3);
}

TEST_CASE("pretrain emits one loss per epoch and is deterministic") {
  const Graph g = gen_sbm({3, 12, 0.4, 0.05, 4, 1.0, 1.0, 6});
  PretrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 3;
  cfg.seed = 9;
  auto run = [&] {
    ModelParams model = init_model(4, {6, 6}, 6, 6, 2, Rng(8));
    return pretrain_loop(g, std::move(model), cfg);
  };
  const PretrainResult a = run(), b = run();
  REQUIRE(a.loss_trace.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(a.loss_trace[i] == b.loss_trace[i]);
  CHECK((a.model.layers[0].W - b.model.layers[0].W).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.model.layers[1].filter.coeffs - b.model.layers[1].filter.coeffs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pretrain runs under every framework") {
  const Graph g = gen_sbm({3, 10, 0.5, 0.05, 4, 1.0, 1.0, 7});
  for (Framework fw : {Framework::Subgraph, Framework::LinkPred, Framework::LocalGlobal}) {
    PretrainConfig cfg;
    cfg.framework = fw;
    cfg.epochs = 2;
    cfg.batch_size = 3;
    cfg.seed = 10;
    ModelParams model = init_model(4, {6, 6}, 6, 6, 2, Rng(11));
    const PretrainResult res = pretrain_loop(g, std::move(model), cfg);
    CHECK(res.loss_trace.size() == 2);
    for (double l : res.loss_trace) CHECK(std::isfinite(l));
  }
}

TEST_CASE("pretrain resumes bit-exactly") {
  const Graph g = gen_sbm({3, 10, 0.5, 0.05, 4, 1.0, 1.0, 13});
  PretrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 3;
  cfg.seed = 14;

  ModelParams straight = init_model(4, {6, 6}, 6, 6, 2, Rng(15));
  const PretrainResult full = pretrain_loop(g, std::move(straight), cfg);

  PretrainConfig half = cfg;
  half.epochs = 3;
  ModelParams part = init_model(4, {6, 6}, 6, 6, 2, Rng(15));
  const PretrainResult first = pretrain_loop(g, std::move(part), half);

  ResumePoint resume;
  resume.adam = first.adam;
  resume.start_epoch = 3;
  resume.loss_trace = first.loss_trace;
  const PretrainResult second = pretrain_loop(g, ModelParams(first.model), cfg, &resume);

  REQUIRE(second.loss_trace.size() == full.loss_trace.size());
  for (std::size_t i = 0; i < full.loss_trace.size(); ++i)
    CHECK(second.loss_trace[i] == full.loss_trace[i]);
  for (std::size_t l = 0; l < full.model.layers.size(); ++l) {
    CHECK((second.model.layers[l].W - full.model.layers[l].W).cwiseAbs().maxCoeff() == 0.0);
    CHECK((second.model.layers[l].filter.coeffs - full.model.layers[l].filter.coeffs).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("augment config validation") {
  AugmentConfig cfg;
  cfg.pos_edge_rate = 0.5;
  cfg.neg_edge_rate = 0.1;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  AugmentConfig cfg2;
  cfg2.neg_signal_density = 1.5;
  CHECK_THROWS_AS(cfg2.validate(), ContractError);
}
