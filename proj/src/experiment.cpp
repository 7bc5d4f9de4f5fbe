#include "igap/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace igap {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

[[noreturn]] void stage_fail(const std::string& stage, const Error& e) {
  throw Error(e.code(), "stage(" + stage + "): " + e.what());
}

// train/val/test sampling on an already-labeled fine-tune graph (used when
// the pair generator provides disjoint graphs directly)
void sample_splits_direct(const Graph& g, const SplitConfig& scfg, std::vector<NodeId>& train,
                          std::vector<NodeId>& val, std::vector<NodeId>& test) {
  DatasetSplit tmp = make_splits(g, Setting::Transductive, scfg);
  train = tmp.train_ids;
  val = tmp.val_ids;
  test = tmp.test_ids;
}

}  // namespace

std::string MetricsReport::csv() const {
  std::string out = "mode,best_epoch,val_metric,test_metric\n";
  for (const auto& r : rows) {
    out += r.mode + "," + std::to_string(r.best_epoch) + "," + fmt(r.val_metric) + "," +
           fmt(r.test_metric) + "\n";
  }
  return out;
}

PreparedData prepare_node_data(const ExperimentConfig& cfg) {
  PreparedData data;
  Rng master(cfg.seed);
  try {
    if (cfg.data_source == "pair") {
      TransferPair pair = gen_transfer_pair(cfg.sbm, cfg.pair_signal_shift,
                                            cfg.pair_structure_shift,
                                            master.derive("data").next_u64());
      data.pretrain_graph = std::move(pair.pretrain);
      data.finetune_graph = std::move(pair.finetune);
      SplitConfig scfg = cfg.split;
      scfg.seed = master.derive("split").next_u64();
      sample_splits_direct(data.finetune_graph, scfg, data.train_ids, data.val_ids, data.test_ids);
      return data;
    }
    Graph g;
    if (cfg.data_source == "sbm") {
      SbmConfig sbm = cfg.sbm;
      sbm.seed = master.derive("data").next_u64();
      g = gen_sbm(sbm);
    } else if (cfg.data_source == "file") {
      g = load_graph(cfg.graph_path);
    } else {
      throw ContractError("unknown data source: " + cfg.data_source);
    }
    SplitConfig scfg = cfg.split;
    scfg.seed = master.derive("split").next_u64();
    DatasetSplit split = make_splits(g, cfg.setting, scfg);
    data.pretrain_graph = std::move(split.pretrain_graph);
    data.finetune_graph = std::move(split.finetune_graph);
    data.train_ids = std::move(split.train_ids);
    data.val_ids = std::move(split.val_ids);
    data.test_ids = std::move(split.test_ids);
    return data;
  } catch (const Error& e) {
    stage_fail("data", e);
  }
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  Rng master(cfg.seed);
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream out(fs::path(cfg.out_dir) / "config.resolved.txt");
    out << cfg.resolved_text();
  }

  PreparedData data = prepare_node_data(cfg);

  MetricsReport report;
  PretrainResult pre;
  try {
    ModelParams model = init_model(data.pretrain_graph.signal_dim(), {128, 128}, 128, 128, 2,
                                   Rng(master.derive("init").next_u64()));
    PretrainConfig pcfg = cfg.pretrain;
    pcfg.seed = master.derive("pretrain").next_u64();
    pre = pretrain_loop(data.pretrain_graph, std::move(model), pcfg);
    report.pretrain_initial_loss = pre.loss_trace.empty() ? 0.0 : pre.loss_trace.front();
    report.pretrain_final_loss = pre.loss_trace.empty() ? 0.0 : pre.loss_trace.back();

    std::ofstream loss_csv(fs::path(cfg.out_dir) / "pretrain_loss.csv");
    loss_csv << "epoch,loss\n";
    for (std::size_t e = 0; e < pre.loss_trace.size(); ++e)
      loss_csv << e << "," << fmt(pre.loss_trace[e]) << "\n";

    Checkpoint ck;
    ck.stage = "pretrain";
    ck.config_hash = cfg.hash();
    ck.master_seed = cfg.seed;
    ck.epoch = pre.epochs_done;
    pack_model(ck, pre.model);
    pack_adam(ck, pre.adam);
    save_checkpoint(ck, (fs::path(cfg.out_dir) / "pretrain.ckpt").string());
  } catch (const Error& e) {
    stage_fail("pretrain", e);
  }

  // one row per (ablation mode x swept L x swept K)
  const std::vector<int> l_values = cfg.sweep_L.empty() ? std::vector<int>{cfg.finetune.L} : cfg.sweep_L;
  const std::vector<int> k_values = cfg.sweep_K.empty() ? std::vector<int>{cfg.finetune.K} : cfg.sweep_K;
  std::vector<std::tuple<std::string, int, int>> jobs;
  for (const std::string& mode : cfg.ablations)
    for (int L : l_values)
      for (int K : k_values) jobs.emplace_back(mode, L, K);

  for (std::size_t a = 0; a < jobs.size(); ++a) {
    const auto& [base_mode, job_L, job_K] = jobs[a];
    std::string mode = base_mode;
    if (l_values.size() > 1) mode += "_L" + std::to_string(job_L);
    if (k_values.size() > 1) mode += "_K" + std::to_string(job_K);
    try {
      PromptConfig fcfg = cfg.finetune;
      fcfg.ablate = ablation_from_string(base_mode);
      fcfg.L = job_L;
      fcfg.K = job_K;
      fcfg.seed = master.derive("finetune", a).next_u64();
      FinetuneResult res = finetune_node(pre.model, data.finetune_graph, data.train_ids,
                                         data.val_ids, fcfg);
      SpectralBasis basis = finetune_basis(data.finetune_graph, fcfg);
      const double test_metric =
          evaluate_node_accuracy(res.model, basis, res.sp, res.ap, res.head, res.lp,
                                 data.finetune_graph, data.test_ids, fcfg.apply_pt_right);

      Checkpoint ck;
      ck.stage = "finetune";
      ck.config_hash = cfg.hash();
      ck.master_seed = cfg.seed;
      ck.epoch = res.best_epoch;
      pack_model(ck, res.model);
      pack_node_prompts(ck, res.sp, res.ap, res.lp, res.head);
      save_checkpoint(ck, (fs::path(cfg.out_dir) / ("finetune_" + mode + ".ckpt")).string());

      std::ofstream mcsv(fs::path(cfg.out_dir) / ("finetune_" + mode + "_trace.csv"));
      mcsv << "epoch,train_loss,val_metric\n";
      for (const auto& p : res.trace)
        mcsv << p.epoch << "," << fmt(p.train_loss) << "," << fmt(p.val_metric) << "\n";

      report.rows.push_back({mode, res.best_epoch, res.best_val, test_metric});
    } catch (const Error& e) {
      stage_fail("finetune:" + mode, e);
    }
  }

  std::ofstream out(fs::path(cfg.out_dir) / "metrics.csv");
  out << report.csv();
  return report;
}

}  // namespace igap
