#include "igap/gradcheck.hpp"

#include <cmath>
#include <map>

#include "igap/prompt.hpp"
#include "igap/synth.hpp"

namespace igap {

bool GradCheckReport::all_passed(double tol) const {
  for (const auto& e : entries) {
    if (!(e.max_rel_error <= tol)) return false;
  }
  return true;
}

namespace {

struct Instance {
  Graph g;
  SpectralBasis basis;
  std::vector<int> labels;
  std::map<std::string, Mat> params;
  int L = 4, K = 6;
  double tau = 0.5;
  int n_layers = 2;
};

Instance make_instance(std::uint64_t seed) {
  Instance inst;
  SbmConfig sbm;
  sbm.blocks = 3;
  sbm.nodes_per_block = 8;
  sbm.p_in = 0.5;
  sbm.p_out = 0.1;
  sbm.feature_dim = 5;
  sbm.seed = seed;
  inst.g = gen_sbm(sbm);
  inst.basis = truncate(eig_dense(build_laplacian(inst.g)), inst.K);
  inst.labels = inst.g.node_labels;

  Rng rng = Rng(seed).derive("gradcheck.params");
  auto randm = [&rng](Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = 0.4 * rng.normal();
    return m;
  };
  const int F = inst.g.signal_dim(), H = 7, d = inst.g.n_classes;
  const int M = int(inst.g.n_nodes);
  inst.params["layer0.filter"] = randm(3, 1);
  inst.params["layer0.W"] = randm(F, H);
  inst.params["layer1.filter"] = randm(3, 1);
  inst.params["layer1.W"] = randm(H, H);
  inst.params["head.W1"] = randm(H, H);
  inst.params["head.b1"] = randm(1, H);
  inst.params["head.W2"] = randm(H, H);
  inst.params["head.b2"] = randm(1, H);
  inst.params["prompt.Ps"] = randm(inst.L, F);
  inst.params["prompt.alpha"] = randm(M, inst.L);
  inst.params["prompt.Pt"] = Mat::Identity(M, M) + 0.05 * randm(M, M);
  inst.params["prompt.Pl"] = randm(d, H);
  return inst;
}

// The complete fine-tuning objective: signal prompt, aligned filtering with
// Pt on both sides, head, label InfoNCE, plus an orthogonality penalty so Pt
// sees both loss terms.
int build_loss(ad::Tape& t, const Instance& inst, const std::map<std::string, int>& leaf) {
  const int M = int(inst.g.n_nodes);
  const int x_const = t.constant(inst.g.signals);
  const int xt = t.add(x_const, t.matmul(leaf.at("prompt.alpha"), leaf.at("prompt.Ps")));
  const int u_const = t.constant(inst.basis.U);
  const int b_left = t.matmul(leaf.at("prompt.Pt"), u_const);

  int z = xt;
  for (int l = 0; l < inst.n_layers; ++l) {
    const std::string base = "layer" + std::to_string(l);
    const int vander = t.constant(filter_vandermonde(inst.basis.eigenvalues, 2));
    const int gains = t.matmul(vander, leaf.at(base + ".filter"));
    int s = t.matmul(b_left, z, true, false);
    s = t.diag_scale(gains, s);
    z = t.matmul(b_left, s);
    z = t.matmul(z, leaf.at(base + ".W"));
    if (l + 1 < inst.n_layers) z = t.relu(z);
  }
  int h = t.matmul(z, leaf.at("head.W1"));
  h = t.add_rowvec(h, leaf.at("head.b1"));
  h = t.relu(h);
  h = t.matmul(h, leaf.at("head.W2"));
  h = t.add_rowvec(h, leaf.at("head.b2"));

  const int scores = t.scale(t.cosine(h, leaf.at("prompt.Pl")), 1.0 / inst.tau);
  const int lse = t.logsumexp_rows(scores);
  const int picked = t.gather_cols(scores, inst.labels);
  int loss = t.sum(t.add(lse, t.scale(picked, -1.0)));

  const int gram = t.matmul(leaf.at("prompt.Pt"), leaf.at("prompt.Pt"), true, false);
  const int dev = t.add(gram, t.scale(t.constant(Mat::Identity(M, M)), -1.0));
  return t.add(loss, t.scale(t.sum(t.square(dev)), 0.05));
}

double loss_value(const Instance& inst, const std::map<std::string, Mat>& params) {
  ad::Tape t;
  std::map<std::string, int> leaf;
  for (const auto& [name, m] : params) leaf[name] = t.constant(m);
  return t.value(build_loss(t, inst, leaf))(0, 0);
}

}  // namespace

GradCheckReport run_gradcheck(std::uint64_t seed, int coords, double h) {
  Instance inst = make_instance(seed);

  ad::Tape t;
  std::map<std::string, int> leaf;
  for (const auto& [name, m] : inst.params) leaf[name] = t.leaf(m, true, name);
  const int loss = build_loss(t, inst, leaf);
  t.backward(loss);

  GradCheckReport report;
  Rng pick = Rng(seed).derive("gradcheck.coords");
  for (const auto& [name, m] : inst.params) {
    const Mat& grad = t.grad(leaf[name]);
    GradCheckEntry entry;
    entry.name = name;
    const int total = int(m.size());
    // small arrays are sampled with replacement so every array sees the full
    // quota of checks
    for (int c = 0; c < coords; ++c) {
      const Eigen::Index flat = Eigen::Index(pick.below(std::uint64_t(total)));
      const Eigen::Index i = flat % m.rows(), j = flat / m.rows();
      std::map<std::string, Mat> perturbed = inst.params;
      perturbed[name](i, j) += h;
      const double up = loss_value(inst, perturbed);
      perturbed[name](i, j) -= 2.0 * h;
      const double down = loss_value(inst, perturbed);
      const double fd = (up - down) / (2.0 * h);
      const double an = grad(i, j);
      const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
      ++entry.coords_checked;
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace igap
