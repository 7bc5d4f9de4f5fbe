// Acceptance suite: one test case per criterion, one PASS/FAIL line each.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>

#include "igap/analysis.hpp"
#include "igap/checkpoint.hpp"
#include "igap/gradcheck.hpp"
#include "igap/pretrain.hpp"
#include "igap/prompt.hpp"
#include "igap/splits.hpp"
#include "igap/synth.hpp"
#include "oracles.hpp"

using namespace igap;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[criterion %d] %s - %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// ---- shared fixtures for criteria 4-6 ----------------------------------

constexpr int kSeeds = 5;

PretrainConfig acceptance_pretrain_config(std::uint64_t seed) {
  PretrainConfig cfg;
  cfg.framework = Framework::Subgraph;
  cfg.epochs = 200;
  cfg.lr = 1e-4;
  cfg.batch_size = 16;
  cfg.seed = seed;
  cfg.augment.seed = seed;
  return cfg;
}

ModelParams fresh_model(int feature_dim, std::uint64_t seed) {
  return init_model(feature_dim, {128, 128}, 128, 128, 2, Rng(Rng(seed).derive("init").next_u64()));
}

struct TransferRun {
  double full = 0.0, probe = 0.0, no_ps = 0.0, no_pt = 0.0, end2end = 0.0;
};

// one pretrain + five fine-tune modes on the transfer pair, per seed
std::vector<TransferRun>& transfer_runs() {
  static std::vector<TransferRun> cache;
  if (!cache.empty()) return cache;

  // weak communities + moderate features: the fine-tune graph's K-smallest
  // subspace loses class information under the structure shift, which is the
  // gap the alignment prompt exists to bridge
  SbmConfig base;
  base.blocks = 4;
  base.nodes_per_block = 100;
  base.p_in = 0.06;
  base.p_out = 0.03;
  base.feature_dim = 32;
  base.mean_scale = 0.75;

  for (int s = 0; s < kSeeds; ++s) {
    const std::uint64_t seed = 1000 + std::uint64_t(s);
    const TransferPair pair = gen_transfer_pair(base, 1.5, 0.3, seed);

    PretrainConfig pcfg = acceptance_pretrain_config(seed);
    const PretrainResult pre = pretrain_loop(pair.pretrain, fresh_model(32, seed), pcfg);

    SplitConfig scfg;
    scfg.per_class_train = 40;
    scfg.seed = Rng(seed).derive("split").next_u64();
    DatasetSplit split = make_splits(pair.finetune, Setting::Transductive, scfg);

    auto tune = [&](Ablation mode) {
      PromptConfig fcfg;
      fcfg.ablate = mode;
      fcfg.seed = Rng(seed).derive("finetune").next_u64();
      const FinetuneResult res =
          finetune_node(pre.model, pair.finetune, split.train_ids, split.val_ids, fcfg);
      const SpectralBasis basis = finetune_basis(pair.finetune, fcfg);
      return evaluate_node_accuracy(res.model, basis, res.sp, res.ap, res.head, res.lp,
                                    pair.finetune, split.test_ids, fcfg.apply_pt_right);
    };
    TransferRun run;
    run.full = tune(Ablation::None);
    run.probe = tune(Ablation::Probe);
    run.no_ps = tune(Ablation::NoPs);
    run.no_pt = tune(Ablation::NoPt);
    run.end2end = tune(Ablation::EndToEnd);
    cache.push_back(run);
  }
  return cache;
}

}  // namespace

TEST_CASE("criterion 1: spectral correctness on 50 random graphs") {
  Timer timer;
  double worst_residual = 0.0, worst_ortho = 0.0, worst_round = 0.0, worst_parseval = 0.0,
         worst_lanczos = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::uint64_t seed = 100 + std::uint64_t(trial);
    Rng rng(seed);
    const NodeId n = NodeId(40 + rng.below(461));  // 40..500
    const double p = 4.0 / double(n) + rng.uniform() * 0.05;
    const Graph g = oracle::random_graph(n, p, 1, seed);
    const Laplacian L = build_laplacian(g);

    const SpectralBasis b = eig_dense(L);
    for (int j = 0; j < b.K(); ++j) {
      const Vec v = b.U.col(j);
      worst_residual = std::max(
          worst_residual,
          (L.matvec(v) - b.eigenvalues[j] * v).norm() / std::max(1.0, b.eigenvalues[j]));
    }
    worst_ortho = std::max(worst_ortho,
                           (b.U.transpose() * b.U - Mat::Identity(b.K(), b.K())).cwiseAbs().maxCoeff());

    Vec x(n);
    for (NodeId i = 0; i < n; ++i) x[i] = rng.normal();
    const Vec round = igft(b, gft(b, x));
    worst_round = std::max(worst_round, (round - x).cwiseAbs().maxCoeff());
    worst_parseval = std::max(worst_parseval, std::abs(gft(b, x).norm() - x.norm()));

    const SpectralBasis lz = eig_lanczos(L, 16, seed + 7);
    for (int j = 0; j < 16; ++j)
      worst_lanczos = std::max(worst_lanczos, std::abs(lz.eigenvalues[j] - b.eigenvalues[j]));
  }
  const double elapsed = timer.seconds();
  const bool pass = worst_residual <= 1e-6 && worst_ortho <= 1e-8 && worst_round <= 1e-8 &&
                    worst_parseval <= 1e-8 && worst_lanczos <= 1e-6 && elapsed < 60.0;
  report(1, pass,
         "residual " + fmt(worst_residual) + ", ortho " + fmt(worst_ortho) + ", roundtrip " +
             fmt(worst_round) + ", parseval " + fmt(worst_parseval) + ", lanczos-vs-dense " +
             fmt(worst_lanczos) + ", " + fmt(elapsed) + " s");
  CHECK(worst_residual <= 1e-6);
  CHECK(worst_ortho <= 1e-8);
  CHECK(worst_round <= 1e-8);
  CHECK(worst_parseval <= 1e-8);
  CHECK(worst_lanczos <= 1e-6);
  CHECK(elapsed < 60.0);
}

TEST_CASE("criterion 2: finite-difference gradient suite") {
  Timer timer;
  const GradCheckReport rep = run_gradcheck(2024, 20, 1e-4);
  double worst = 0.0;
  bool covered_all = true;
  const char* required[] = {"layer0.filter", "layer0.W", "layer1.filter", "layer1.W",
                            "head.W1",       "head.b1",  "head.W2",       "head.b2",
                            "prompt.Ps",     "prompt.alpha", "prompt.Pt", "prompt.Pl"};
  for (const char* name : required) {
    bool found = false;
    for (const auto& e : rep.entries) {
      if (e.name == name) {
        found = true;
        worst = std::max(worst, e.max_rel_error);
        CHECK(e.coords_checked >= 20);
      }
    }
    if (!found) covered_all = false;
  }
  const double elapsed = timer.seconds();
  const bool pass = covered_all && worst <= 1e-4 && elapsed < 60.0;
  report(2, pass, "12 arrays, worst rel error " + fmt(worst) + ", " + fmt(elapsed) + " s");
  CHECK(covered_all);
  CHECK(worst <= 1e-4);
  CHECK(elapsed < 60.0);
}

TEST_CASE("criterion 3: identity contracts") {
  bool identity_ok, lr0_ok, ckpt_ok, resume_ok;

  {  // aligned pipeline at the initialization point
    const Graph g = gen_sbm({4, 30, 0.2, 0.02, 16, 1.0, 1.0, 41});
    ModelParams model = init_model(16, {32, 32}, 32, 32, 2, Rng(42));
    model.layers[0].filter.coeffs(1, 0) = -0.03;
    model.layers[1].filter.coeffs(2, 0) = 0.002;
    model.frozen = true;
    const SpectralBasis bk = truncate(eig_dense(build_laplacian(g)), 24);
    AlignmentPrompt ap;
    ap.mode = PtMode::Dense;
    ap.dim = int(g.n_nodes);
    ap.Pt = Mat::Identity(ap.dim, ap.dim);
    SignalPrompt sp{Mat::Ones(8, 16), Mat::Zero(g.n_nodes, 8)};
    const Mat aligned = aligned_forward(bk, ap, model, apply_signal_prompt(g.signals, sp), true);
    const Mat plain = spectral_forward(bk, model, g.signals);
    identity_ok = (aligned - plain).cwiseAbs().maxCoeff() <= 1e-12;
  }

  {  // lr = 0 training is a no-op
    const Graph g = gen_sbm({3, 15, 0.3, 0.03, 8, 1.0, 1.0, 43});
    ModelParams model = init_model(8, {16, 16}, 16, 16, 2, Rng(44));
    const Mat w0 = model.layers[0].W;
    PretrainConfig pcfg;
    pcfg.epochs = 3;
    pcfg.lr = 0.0;
    pcfg.batch_size = 4;
    pcfg.seed = 45;
    const PretrainResult pre = pretrain_loop(g, std::move(model), pcfg);
    bool pre_ok = (pre.model.layers[0].W - w0).cwiseAbs().maxCoeff() == 0.0;

    PromptConfig fcfg;
    fcfg.L = 4;
    fcfg.K = 8;
    fcfg.epochs = 3;
    fcfg.lr = 0.0;
    fcfg.head_hidden = 8;
    fcfg.head_out = 8;
    fcfg.seed = 46;
    std::vector<NodeId> train, val;
    for (NodeId i = 0; i < g.n_nodes; ++i) (i % 4 == 0 ? val : train).push_back(i);
    const FinetuneResult res = finetune_node(pre.model, g, train, val, fcfg);
    const bool fine_ok = res.sp.alpha.cwiseAbs().maxCoeff() == 0.0 &&
                         (res.ap.Pt - Mat::Identity(45, 45)).cwiseAbs().maxCoeff() == 0.0;
    lr0_ok = pre_ok && fine_ok;
  }

  {  // checkpoint bit-exact round trip
    ModelParams model = init_model(8, {16, 16}, 16, 16, 2, Rng(47));
    Checkpoint ck;
    ck.stage = "pretrain";
    ck.master_seed = 48;
    pack_model(ck, model);
    const std::string p1 = "/tmp/igap_acc_ck1.bin", p2 = "/tmp/igap_acc_ck2.bin";
    save_checkpoint(ck, p1);
    save_checkpoint(load_checkpoint(p1), p2);
    std::FILE* f1 = std::fopen(p1.c_str(), "rb");
    std::FILE* f2 = std::fopen(p2.c_str(), "rb");
    ckpt_ok = f1 && f2;
    if (ckpt_ok) {
      int c1, c2;
      do {
        c1 = std::fgetc(f1);
        c2 = std::fgetc(f2);
        if (c1 != c2) ckpt_ok = false;
      } while (c1 != EOF && c2 != EOF && ckpt_ok);
    }
    if (f1) std::fclose(f1);
    if (f2) std::fclose(f2);
  }

  {  // resume equivalence
    const Graph g = gen_sbm({3, 15, 0.3, 0.03, 8, 1.0, 1.0, 49});
    PretrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 4;
    cfg.seed = 50;
    const PretrainResult full = pretrain_loop(g, init_model(8, {16, 16}, 16, 16, 2, Rng(51)), cfg);
    PretrainConfig half = cfg;
    half.epochs = 4;
    const PretrainResult first = pretrain_loop(g, init_model(8, {16, 16}, 16, 16, 2, Rng(51)), half);
    ResumePoint rp{first.adam, 4, first.loss_trace};
    const PretrainResult second = pretrain_loop(g, ModelParams(first.model), cfg, &rp);
    resume_ok = true;
    for (std::size_t l = 0; l < full.model.layers.size(); ++l) {
      if ((second.model.layers[l].W - full.model.layers[l].W).cwiseAbs().maxCoeff() != 0.0)
        resume_ok = false;
      if ((second.model.layers[l].filter.coeffs - full.model.layers[l].filter.coeffs)
              .cwiseAbs()
              .maxCoeff() != 0.0)
        resume_ok = false;
    }
  }

  const bool pass = identity_ok && lr0_ok && ckpt_ok && resume_ok;
  report(3, pass,
         std::string("init-identity ") + (identity_ok ? "ok" : "BAD") + ", lr0 " +
             (lr0_ok ? "ok" : "BAD") + ", checkpoint " + (ckpt_ok ? "ok" : "BAD") + ", resume " +
             (resume_ok ? "ok" : "BAD"));
  CHECK(identity_ok);
  CHECK(lr0_ok);
  CHECK(ckpt_ok);
  CHECK(resume_ok);
}

TEST_CASE("criterion 4: pre-training concentrates signals on low frequencies") {
  Timer timer;
  SbmConfig sbm;
  sbm.blocks = 4;
  sbm.nodes_per_block = 100;
  sbm.p_in = 0.1;
  sbm.p_out = 0.01;
  sbm.feature_dim = 32;

  int trained_hits = 0, null_hits = 0, loss_hits = 0, snr_hits = 0;
  std::string rhos, nulls;
  for (int s = 0; s < kSeeds; ++s) {
    const std::uint64_t seed = 500 + std::uint64_t(s);
    SbmConfig scfg = sbm;
    scfg.seed = seed;
    const Graph g = gen_sbm(scfg);
    const SpectralBasis basis = eig_dense(build_laplacian(g));

    const ModelParams untrained = fresh_model(32, seed);
    const Mat z_null = spectral_forward(basis, untrained, g.signals);
    const double rho_null = alignment_profile(basis, Mat(z_null.transpose())).spearman_rho;
    if (std::abs(rho_null) < 0.3) ++null_hits;

    PretrainConfig pcfg = acceptance_pretrain_config(seed);
    const PretrainResult pre = pretrain_loop(g, untrained, pcfg);
    if (pre.loss_trace.back() <= 0.7 * pre.loss_trace.front()) ++loss_hits;
    const Mat z = spectral_forward(basis, pre.model, g.signals);
    const AlignmentProfile prof = alignment_profile(basis, Mat(z.transpose()));
    const double rho = prof.spearman_rho;
    if (rho <= -0.5) ++trained_hits;
    // per-component SNR ordering: snr = a/(1-a) is monotone, so its rank
    // trend against the eigenvalue rank must be negative as well
    Vec snr(prof.alignment.size()), index(prof.alignment.size());
    for (Eigen::Index i = 0; i < snr.size(); ++i) {
      const double a = std::min(prof.alignment[i], 1.0 - 1e-12);
      snr[i] = a / (1.0 - a);
      index[i] = double(i);
    }
    if (spearman(index, snr) <= -0.5) ++snr_hits;
    rhos += (s ? " " : "") + fmt(rho);
    nulls += (s ? " " : "") + fmt(rho_null);
  }
  const double elapsed = timer.seconds();
  const bool pass = trained_hits >= 4 && null_hits == kSeeds && loss_hits == kSeeds &&
                    snr_hits >= 4 && elapsed < 600.0;
  report(4, pass,
         "trained rho [" + rhos + "] (need <= -0.5 on >= 4/5), null rho [" + nulls +
             "] (need |rho| < 0.3 on 5/5), loss<=0.7x on " + std::to_string(loss_hits) +
             "/5, snr-rank ordering on " + std::to_string(snr_hits) + "/5, " + fmt(elapsed) +
             " s");
  CHECK(trained_hits >= 4);
  CHECK(null_hits == kSeeds);
  CHECK(loss_hits == kSeeds);
  CHECK(snr_hits >= 4);
  CHECK(elapsed < 600.0);
}

TEST_CASE("criterion 5: inductive transfer beats the frozen linear probe") {
  Timer timer;
  const auto& runs = transfer_runs();
  int wins = 0;
  double mean_gain = 0.0;
  std::string detail;
  for (int s = 0; s < kSeeds; ++s) {
    const double gain = runs[s].full - runs[s].probe;
    if (runs[s].full >= runs[s].probe) ++wins;
    mean_gain += gain / kSeeds;
    detail += (s ? " " : "") + fmt(runs[s].full) + ">" + fmt(runs[s].probe);
  }
  const double elapsed = timer.seconds();
  const bool pass = wins >= 4 && mean_gain > 0.0 && elapsed < 900.0;
  report(5, pass,
         "igap-vs-probe per seed [" + detail + "], wins " + std::to_string(wins) +
             "/5, mean gain " + fmt(mean_gain) + ", " + fmt(elapsed) + " s");
  CHECK(wins >= 4);
  CHECK(mean_gain > 0.0);
  CHECK(elapsed < 900.0);
}

TEST_CASE("criterion 6: prompt ablation ordering") {
  const auto& runs = transfer_runs();
  double mean_full = 0.0, mean_no_ps = 0.0, mean_no_pt = 0.0;
  int no_pt_worst = 0;
  for (int s = 0; s < kSeeds; ++s) {
    mean_full += runs[s].full / kSeeds;
    mean_no_ps += runs[s].no_ps / kSeeds;
    mean_no_pt += runs[s].no_pt / kSeeds;
    if (runs[s].no_pt <= runs[s].no_ps && runs[s].no_pt <= runs[s].end2end) ++no_pt_worst;
  }
  const bool pass = mean_full >= mean_no_ps && mean_full >= mean_no_pt && no_pt_worst >= 3;
  report(6, pass,
         "mean full " + fmt(mean_full) + ", no-Ps " + fmt(mean_no_ps) + ", no-Pt " +
             fmt(mean_no_pt) + ", no-Pt worst on " + std::to_string(no_pt_worst) + "/5 seeds");
  CHECK(mean_full >= mean_no_ps);
  CHECK(mean_full >= mean_no_pt);
  CHECK(no_pt_worst >= 3);
}

TEST_CASE("criterion 7: parameter economy and the L/K sweep grid") {
  bool economy = true;
  for (long n : {100L, 400L, 1000L}) {
    for (long f : {32L, 64L, 128L}) {
      if (!(signal_prompt_param_count(n, 16, f) < n * f)) economy = false;
    }
  }

  const Graph g = gen_sbm({4, 50, 0.15, 0.02, 32, 1.0, 1.0, 61});  // 200 nodes
  ModelParams model = fresh_model(32, 62);
  model.frozen = true;
  std::vector<NodeId> train, val;
  for (NodeId i = 0; i < g.n_nodes; ++i) (i % 4 == 0 ? val : train).push_back(i);
  int grid_ok = 0, grid_total = 0;
  for (int L : {8, 16, 32, 64}) {
    for (int K : {16, 32, 64, 128}) {
      ++grid_total;
      PromptConfig cfg;
      cfg.L = L;
      cfg.K = K;
      cfg.epochs = 1;
      cfg.seed = 63;
      try {
        const FinetuneResult res = finetune_node(model, g, train, val, cfg);
        if (res.trace.size() == 2 && std::isfinite(res.trace[1].train_loss)) ++grid_ok;
      } catch (const Error&) {
      }
    }
  }
  const bool pass = economy && grid_ok == grid_total;
  report(7, pass,
         "N*L+L*F < N*F for shipped defaults: " + std::string(economy ? "yes" : "NO") +
             ", sweep grid " + std::to_string(grid_ok) + "/" + std::to_string(grid_total) +
             " configs ran one epoch");
  CHECK(economy);
  CHECK(grid_ok == grid_total);
}

TEST_CASE("criterion 8: metric oracles") {
  Rng rng(73);
  int auc_checked = 0;
  bool auc_ok = true;
  while (auc_checked < 1000) {
    const int n = 2 + int(rng.below(19));
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool pos = false, neg = false;
    for (int i = 0; i < n; ++i) {
      scores[i] = double(rng.below(8)) / 7.0;
      labels[i] = int(rng.below(2));
      (labels[i] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    ++auc_checked;
    if (roc_auc(scores, labels) != doctest::Approx(oracle::roc_auc_pairwise(scores, labels)).epsilon(1e-12))
      auc_ok = false;
  }

  bool acc_ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + int(rng.below(30));
    std::vector<int> p(n), y(n);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      p[i] = int(rng.below(4));
      y[i] = int(rng.below(4));
      if (p[i] == y[i]) ++hits;
    }
    if (accuracy(p, y) != double(hits) / n) acc_ok = false;
  }

  // closed-form SNR cases from the analysis examples
  const SpectralBasis full = eig_dense(build_laplacian(oracle::path_graph(8)));
  const SpectralBasis bk = truncate(full, 5);
  bool snr_ok = true;
  {
    Vec x = 0.5 * full.U.col(0) + std::sqrt(0.75) * full.U.col(5);
    if (std::abs(sp_snr(bk, x, 0) - 1.0) > 1e-9) snr_ok = false;
    Vec z = full.U.col(6);
    if (std::abs(sp_snr(bk, z, 1)) > 1e-9) snr_ok = false;
    if (sp_snr(bk, Vec(full.U.col(2)), 2) != kSnrInfinity) snr_ok = false;
    Vec u = Vec::Zero(8);
    for (int i = 0; i < 5; ++i) u += 0.2 * full.U.col(i);
    u += std::sqrt(1.0 - 5 * 0.04) * full.U.col(6);
    if (std::abs(graph_snr(bk, u) - 0.25) > 1e-9) snr_ok = false;
  }

  const bool pass = auc_ok && acc_ok && snr_ok;
  report(8, pass,
         std::string("roc_auc vs enumeration on 1000 instances: ") + (auc_ok ? "exact" : "MISMATCH") +
             ", accuracy direct count: " + (acc_ok ? "exact" : "MISMATCH") +
             ", snr closed forms: " + (snr_ok ? "ok" : "BAD"));
  CHECK(auc_ok);
  CHECK(acc_ok);
  CHECK(snr_ok);
}
