#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "igap/analysis.hpp"
#include "igap/experiment.hpp"
#include "igap/gradcheck.hpp"

using namespace igap;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

ModelParams model_from_checkpoint(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  ModelParams model = unpack_model(ck);
  model.frozen = true;
  return model;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"spectral graph pre-training and inductive prompt fine-tuning"};
  app.require_subcommand(1);

  // gen-sbm
  auto* gen = app.add_subcommand("gen-sbm", "generate a stochastic block model graph");
  SbmConfig sbm;
  std::string out_path = "graph.txt";
  gen->add_option("--blocks", sbm.blocks);
  gen->add_option("--nodes-per-block", sbm.nodes_per_block);
  gen->add_option("--p-in", sbm.p_in);
  gen->add_option("--p-out", sbm.p_out);
  gen->add_option("--feature-dim", sbm.feature_dim);
  gen->add_option("--mean-scale", sbm.mean_scale);
  gen->add_option("--noise-sigma", sbm.noise_sigma);
  gen->add_option("--seed", sbm.seed);
  gen->add_option("--out", out_path)->required();
  gen->callback([&] {
    Graph g = gen_sbm(sbm);
    save_graph(g, out_path);
    const int comps = connected_components(g);
    std::cout << "n=" << g.n_nodes << " m=" << g.num_edges() << " components=" << comps << "\n";
    if (comps > 1) std::cout << "warning: generated graph is disconnected\n";
  });

  // gen-pair
  auto* pairc = app.add_subcommand("gen-pair", "generate a pre-train/fine-tune transfer pair");
  double signal_shift = 1.5, structure_shift = 0.3;
  std::uint64_t pair_seed = 0;
  std::string out_pt = "pretrain.txt", out_ft = "finetune.txt";
  pairc->add_option("--blocks", sbm.blocks);
  pairc->add_option("--nodes-per-block", sbm.nodes_per_block);
  pairc->add_option("--p-in", sbm.p_in);
  pairc->add_option("--p-out", sbm.p_out);
  pairc->add_option("--feature-dim", sbm.feature_dim);
  pairc->add_option("--signal-shift", signal_shift);
  pairc->add_option("--structure-shift", structure_shift);
  pairc->add_option("--seed", pair_seed);
  pairc->add_option("--out-pretrain", out_pt)->required();
  pairc->add_option("--out-finetune", out_ft)->required();
  pairc->callback([&] {
    TransferPair p = gen_transfer_pair(sbm, signal_shift, structure_shift, pair_seed);
    save_graph(p.pretrain, out_pt);
    save_graph(p.finetune, out_ft);
    std::cout << "pretrain n=" << p.pretrain.n_nodes << " m=" << p.pretrain.num_edges()
              << "; finetune n=" << p.finetune.n_nodes << " m=" << p.finetune.num_edges() << "\n";
  });

  // spectrum
  auto* spec = app.add_subcommand("spectrum", "eigendecomposition report");
  std::string graph_path;
  int k = 0;
  bool use_lanczos = false, use_dense = false;
  std::uint64_t seed = 0;
  std::string evec_dump;
  bool normalized = false;
  spec->add_option("--graph", graph_path)->required();
  spec->add_option("--k", k);
  spec->add_flag("--lanczos", use_lanczos);
  spec->add_flag("--dense", use_dense);
  spec->add_flag("--normalized", normalized, "symmetric normalized laplacian");
  spec->add_option("--seed", seed);
  spec->add_option("--evec-dump", evec_dump);
  spec->callback([&] {
    Graph g = load_graph(graph_path);
    const LaplacianKind kind =
        normalized ? LaplacianKind::SymmetricNormalized : LaplacianKind::Combinatorial;
    Laplacian L = build_laplacian(g, kind);
    if (k <= 0) k = use_lanczos ? std::min<int>(16, int(g.n_nodes) - 1) : int(g.n_nodes);
    SpectralBasis b;
    if (use_lanczos && !use_dense) {
      b = eig_lanczos(L, k, seed);
    } else {
      b = eig_dense(L, kDenseCapDefault);
      if (k < b.K()) b = truncate(b, k);
    }
    std::cout << "index lambda residual\n";
    for (int i = 0; i < b.K(); ++i) {
      const Vec v = b.U.col(i);
      const double res = (L.matvec(v) - b.eigenvalues[i] * v).norm();
      std::cout << i << " " << fmt(b.eigenvalues[i]) << " " << fmt(res) << "\n";
    }
    if (!evec_dump.empty()) {
      Checkpoint ck;
      ck.stage = "spectrum";
      ck.put("U", b.U);
      ck.put("lambda", b.eigenvalues);
      save_checkpoint(ck, evec_dump);
    }
  });

  // split
  auto* spl = app.add_subcommand("split", "build a dataset split");
  std::string split_setting = "transductive", split_out = "split.txt";
  SplitConfig scfg;
  spl->add_option("--graph", graph_path)->required();
  spl->add_option("--setting", split_setting);
  spl->add_option("--per-class-train", scfg.per_class_train);
  spl->add_option("--val-fraction", scfg.val_fraction);
  spl->add_option("--finetune-class-fraction", scfg.finetune_class_fraction);
  spl->add_option("--pretrain-class-fraction", scfg.pretrain_class_fraction);
  spl->add_option("--seed", scfg.seed);
  spl->add_option("--out", split_out)->required();
  spl->callback([&] {
    Graph g = load_graph(graph_path);
    DatasetSplit s = make_splits(g, setting_from_string(split_setting), scfg);
    save_split(s, split_out);
    std::cout << "train=" << s.train_ids.size() << " val=" << s.val_ids.size()
              << " test=" << s.test_ids.size() << "\n";
  });

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "contrastive pre-training");
  PretrainConfig pcfg;
  std::string framework = "subgraph", ckpt_out = "pretrain.ckpt", loss_csv;
  std::string graphset_path;
  pre->add_option("--graph", graph_path);
  pre->add_option("--graphset", graphset_path);
  pre->add_option("--framework", framework);
  pre->add_option("--epochs", pcfg.epochs);
  pre->add_option("--lr", pcfg.lr);
  pre->add_option("--tau", pcfg.tau);
  pre->add_option("--batch-size", pcfg.batch_size);
  pre->add_option("--seed", pcfg.seed);
  pre->add_option("--out", ckpt_out)->required();
  pre->add_option("--loss-csv", loss_csv);
  pre->callback([&] {
    if (graph_path.empty() == graphset_path.empty())
      throw ContractError("pretrain: pass exactly one of --graph / --graphset");
    pcfg.framework = framework_from_string(framework);
    pcfg.augment.seed = pcfg.seed;
    GraphSet gs;
    Graph g;
    int feature_dim = 0;
    if (!graph_path.empty()) {
      g = load_graph(graph_path);
      feature_dim = g.signal_dim();
    } else {
      gs = load_graph_set(graphset_path);
      feature_dim = gs.signal_dim();
    }
    ModelParams model = init_model(feature_dim, {128, 128}, 128, 128, 2,
                                   Rng(Rng(pcfg.seed).derive("init").next_u64()));
    PretrainResult res = graph_path.empty() ? pretrain_loop(gs, std::move(model), pcfg)
                                            : pretrain_loop(g, std::move(model), pcfg);
    Checkpoint ck;
    ck.stage = "pretrain";
    ck.master_seed = pcfg.seed;
    ck.epoch = res.epochs_done;
    pack_model(ck, res.model);
    pack_adam(ck, res.adam);
    save_checkpoint(ck, ckpt_out);
    if (!loss_csv.empty()) {
      std::ofstream out(loss_csv);
      out << "epoch,loss\n";
      for (std::size_t e = 0; e < res.loss_trace.size(); ++e)
        out << e << "," << fmt(res.loss_trace[e]) << "\n";
    }
    std::cout << "epochs=" << res.epochs_done;
    if (!res.loss_trace.empty())
      std::cout << " first_loss=" << fmt(res.loss_trace.front())
                << " last_loss=" << fmt(res.loss_trace.back());
    std::cout << "\n";
  });

  // finetune
  auto* fin = app.add_subcommand("finetune", "prompt fine-tuning with a frozen backbone");
  PromptConfig fcfg;
  std::string pretrained_path, split_path, ablate = "none", pt_mode = "dense", metrics_csv,
              fin_out = "finetune.ckpt";
  std::string fin_graphset;
  int fin_task = 0;
  fin->add_option("--pretrained", pretrained_path)->required();
  fin->add_option("--graph", graph_path);
  fin->add_option("--graphset", fin_graphset);
  fin->add_option("--task", fin_task);
  fin->add_option("--split", split_path);
  fin->add_option("--L", fcfg.L);
  fin->add_option("--K", fcfg.K);
  fin->add_option("--lr", fcfg.lr);
  fin->add_option("--epochs", fcfg.epochs);
  fin->add_option("--checkpoint-every", fcfg.checkpoint_every);
  fin->add_option("--ablate", ablate);
  fin->add_option("--pt-mode", pt_mode);
  fin->add_option("--ortho-penalty", fcfg.ortho_penalty);
  fin->add_option("--seed", fcfg.seed);
  fin->add_flag("!--no-pt-right", fcfg.apply_pt_right, "drop the right-side Pt^T application");
  fin->add_option("--per-class-train", scfg.per_class_train);
  fin->add_option("--out", fin_out)->required();
  fin->add_option("--metrics-csv", metrics_csv);
  fin->callback([&] {
    if (graph_path.empty() == fin_graphset.empty())
      throw ContractError("finetune: pass exactly one of --graph / --graphset");
    fcfg.ablate = ablation_from_string(ablate);
    if (pt_mode == "dense") {
      fcfg.pt_mode = PtMode::Dense;
    } else if (pt_mode.rfind("lowrank:", 0) == 0) {
      fcfg.pt_mode = PtMode::LowRank;
      fcfg.pt_rank = std::stoi(pt_mode.substr(8));
    } else {
      throw ContractError("--pt-mode must be dense or lowrank:R");
    }
    if (!fin_graphset.empty()) {
      // graph classification: 4:2:4 split over graph ids
      GraphSet gs = load_graph_set(fin_graphset);
      std::vector<int> ids(gs.size());
      for (std::size_t i = 0; i < gs.size(); ++i) ids[i] = int(i);
      Rng splitter = Rng(fcfg.seed).derive("graphsplit");
      splitter.shuffle(ids);
      const std::size_t n_train = std::size_t(0.4 * double(ids.size()) + 0.5);
      const std::size_t n_val = std::size_t(0.2 * double(ids.size()) + 0.5);
      std::vector<int> gtrain(ids.begin(), ids.begin() + n_train);
      std::vector<int> gval(ids.begin() + n_train, ids.begin() + n_train + n_val);
      std::vector<int> gtest(ids.begin() + n_train + n_val, ids.end());
      ModelParams model = model_from_checkpoint(pretrained_path);
      GraphSetFinetuneResult res = finetune_graphset(model, gs, gtrain, gval, fin_task, fcfg);
      if (!metrics_csv.empty()) {
        std::ofstream out(metrics_csv);
        out << "epoch,train_loss,val_metric\n";
        for (const auto& p : res.trace)
          out << p.epoch << "," << fmt(p.train_loss) << "," << fmt(p.val_metric) << "\n";
      }
      Checkpoint ck;
      ck.stage = "finetune-graphset";
      ck.master_seed = fcfg.seed;
      ck.epoch = res.best_epoch;
      pack_model(ck, res.model);
      ck.put("prompt.Ps", res.Ps);
      ck.put("prompt.Walpha", res.Walpha);
      ck.put("prompt.Qt", res.Qt);
      ck.put("prompt.Pl", res.lp.Pl);
      ck.put("tunehead.W1", res.head.W1);
      ck.put("tunehead.b1", res.head.b1);
      ck.put("tunehead.W2", res.head.W2);
      ck.put("tunehead.b2", res.head.b2);
      save_checkpoint(ck, fin_out);
      std::cout << "best_epoch=" << res.best_epoch << " val=" << fmt(res.best_val)
                << " (graph task " << fin_task << ")\n";
      return;
    }
    Graph g = load_graph(graph_path);
    std::vector<NodeId> train, val, test;
    if (!split_path.empty()) {
      SplitIds ids = load_split(split_path);
      train = ids.train_ids;
      val = ids.val_ids;
      test = ids.test_ids;
    } else {
      SplitConfig sc = scfg;
      sc.seed = Rng(fcfg.seed).derive("split").next_u64();
      DatasetSplit s = make_splits(g, Setting::Transductive, sc);
      train = s.train_ids;
      val = s.val_ids;
      test = s.test_ids;
    }
    ModelParams model = model_from_checkpoint(pretrained_path);
    FinetuneResult res = finetune_node(model, g, train, val, fcfg);
    SpectralBasis basis = finetune_basis(g, fcfg);
    const double test_acc = evaluate_node_accuracy(res.model, basis, res.sp, res.ap, res.head,
                                                   res.lp, g, test, fcfg.apply_pt_right);
    Checkpoint ck;
    ck.stage = "finetune";
    ck.master_seed = fcfg.seed;
    ck.epoch = res.best_epoch;
    pack_model(ck, res.model);
    pack_node_prompts(ck, res.sp, res.ap, res.lp, res.head);
    save_checkpoint(ck, fin_out);
    if (!metrics_csv.empty()) {
      std::ofstream out(metrics_csv);
      out << "epoch,train_loss,val_metric\n";
      for (const auto& p : res.trace)
        out << p.epoch << "," << fmt(p.train_loss) << "," << fmt(p.val_metric) << "\n";
    }
    std::cout << "best_epoch=" << res.best_epoch << " val=" << fmt(res.best_val)
              << " test=" << fmt(test_acc) << "\n";
  });

  // eval: accuracy of a finetune checkpoint on a fresh split of a graph
  auto* ev = app.add_subcommand("eval", "evaluate a fine-tuned checkpoint");
  std::string eval_ckpt;
  std::uint64_t eval_seed = 0;
  int eval_K = 32;
  ev->add_option("--checkpoint", eval_ckpt)->required();
  ev->add_option("--graph", graph_path)->required();
  ev->add_option("--K", eval_K);
  ev->add_option("--seed", eval_seed);
  ev->add_option("--per-class-train", scfg.per_class_train);
  ev->callback([&] {
    Graph g = load_graph(graph_path);
    Checkpoint ck = load_checkpoint(eval_ckpt);
    if (ck.stage != "finetune") throw ContractError("eval expects a finetune checkpoint");
    ModelParams model = unpack_model(ck);
    SignalPrompt sp{ck.get("prompt.Ps"), ck.get("prompt.alpha")};
    AlignmentPrompt ap;
    ap.spectral_frame = ck.get_meta("prompt.pt_frame") == "spectral";
    if (ck.get_meta("prompt.pt_mode") == "dense") {
      ap.mode = PtMode::Dense;
      ap.Pt = ck.get("prompt.Pt");
      ap.dim = int(ap.Pt.rows());
    } else {
      ap.mode = PtMode::LowRank;
      ap.A = ck.get("prompt.PtA");
      ap.B = ck.get("prompt.PtB");
      ap.dim = int(ap.A.rows());
    }
    LabelPrompt lp{ck.get("prompt.Pl")};
    Head head{ck.get("tunehead.W1"), ck.get("tunehead.b1"), ck.get("tunehead.W2"),
              ck.get("tunehead.b2")};
    PromptConfig fcfg2;
    fcfg2.K = eval_K;
    fcfg2.seed = eval_seed;
    SpectralBasis basis = finetune_basis(g, fcfg2);
    std::vector<NodeId> all;
    for (NodeId i = 0; i < g.n_nodes; ++i)
      if (!g.node_labels.empty() && g.node_labels[i] >= 0) all.push_back(i);
    const double acc = evaluate_node_accuracy(model, basis, sp, ap, head, lp, g, all, true);
    std::cout << "accuracy=" << fmt(acc) << " over " << all.size() << " labeled nodes\n";
  });

  // spectrum-report: alignment/snr CSV against a graph + embedding dump
  auto* rep = app.add_subcommand("spectrum-report", "per-component alignment and SNR CSV");
  std::string emb_path, csv_out = "spectrum_report.csv";
  int rep_k = 0;
  rep->add_option("--graph", graph_path)->required();
  rep->add_option("--embeddings", emb_path)->required();
  rep->add_option("--k", rep_k);
  rep->add_option("--out", csv_out);
  rep->callback([&] {
    Graph g = load_graph(graph_path);
    SpectralBasis b = eig_dense(build_laplacian(g));
    if (rep_k > 0 && rep_k < b.K()) b = truncate(b, rep_k);
    Mat Z = import_embeddings(emb_path);
    // rows of the file are node-level embeddings; project channels over nodes
    if (Z.rows() != b.n) throw ContractError("embedding rows must match node count");
    AlignmentProfile prof = alignment_profile(b, Z.transpose());
    std::ofstream out(csv_out);
    out << "component,lambda,alignment,sp_snr\n";
    for (int i = 0; i < b.K(); ++i) {
      const double a = prof.alignment[i];
      const double snr = 1.0 - a < 1e-12 ? std::numeric_limits<double>::infinity() : a / (1.0 - a);
      out << i << "," << fmt(prof.eigenvalues[i]) << "," << fmt(a) << "," << fmt(snr) << "\n";
    }
    std::cout << "spearman_rho=" << fmt(prof.spearman_rho) << " -> " << csv_out << "\n";
  });

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every trainable array");
  std::uint64_t gc_seed = 7;
  gc->add_option("--seed", gc_seed);
  gc->callback([&] {
    GradCheckReport report = run_gradcheck(gc_seed);
    for (const auto& e : report.entries)
      std::cout << e.name << " max_rel_error=" << fmt(e.max_rel_error) << " ("
                << e.coords_checked << " coords)\n";
    if (!report.all_passed()) throw NumericError("gradcheck: at least one array beyond 1e-4");
    std::cout << "gradcheck: all arrays within 1e-4\n";
  });

  // run
  auto* run = app.add_subcommand("run", "full pretrain -> finetune -> eval pipeline");
  std::string config_path;
  std::vector<std::string> overrides;
  run->add_option("--config", config_path)->required();
  run->add_option("--set", overrides);
  run->callback([&] {
    ExperimentConfig cfg = load_config(config_path);
    for (const auto& o : overrides) apply_override(cfg, o);
    MetricsReport report = run_experiment(cfg);
    std::cout << report.csv();
    std::cout << "pretrain_loss " << fmt(report.pretrain_initial_loss) << " -> "
              << fmt(report.pretrain_final_loss) << "\n";
    std::cout << "outputs in " << cfg.out_dir << "\n";
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return int(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
