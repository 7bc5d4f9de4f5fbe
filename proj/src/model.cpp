#include "igap/model.hpp"

#include <cmath>

namespace igap {

double FilterKernel::response(double lambda) const {
  const double mu = lambda / lambda_scale;
  double acc = 0.0, pw = 1.0;
  for (Eigen::Index p = 0; p < coeffs.rows(); ++p) {
    acc += coeffs(p, 0) * pw;
    pw *= mu;
  }
  return acc;
}

Vec FilterKernel::response(const Vec& lambdas) const {
  Vec out(lambdas.size());
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) out[i] = response(lambdas[i]);
  return out;
}

Mat filter_vandermonde(const Vec& lambdas, int degree, double lambda_scale) {
  Mat V(lambdas.size(), degree + 1);
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    double pw = 1.0;
    for (int p = 0; p <= degree; ++p) {
      V(i, p) = pw;
      pw *= lambdas[i] / lambda_scale;
    }
  }
  return V;
}

namespace {

Mat uniform_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(double(rows));
  Mat W(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) W(i, j) = rng.uniform(-bound, bound);
  return W;
}

}  // namespace

Head init_head(int in_dim, int hidden, int out, Rng rng) {
  Head h;
  h.W1 = uniform_init(in_dim, hidden, rng);
  // small positive bias keeps cosine scoring away from exact-zero outputs
  h.b1 = Mat::Constant(1, hidden, 0.01);
  h.W2 = uniform_init(hidden, out, rng);
  h.b2 = Mat::Zero(1, out);
  return h;
}

ModelParams init_model(int input_dim, const std::vector<int>& layer_dims, int head_hidden,
                       int head_out, int filter_degree, Rng rng) {
  if (layer_dims.empty()) throw ContractError("init_model: need at least one layer");
  ModelParams p;
  int in = input_dim;
  for (std::size_t l = 0; l < layer_dims.size(); ++l) {
    GnnLayer layer;
    layer.filter.coeffs = Mat::Zero(filter_degree + 1, 1);
    layer.filter.coeffs(0, 0) = 1.0;  // identity start
    layer.filter.lambda_scale = kFilterLambdaScale;
    Rng wr = rng.derive("layer.W", l);
    layer.W = uniform_init(in, layer_dims[l], wr);
    in = layer_dims[l];
    p.layers.push_back(std::move(layer));
  }
  p.head = init_head(in, head_hidden, head_out, rng.derive("head"));
  return p;
}

Embedding spectral_forward(const SpectralBasis& basis, const ModelParams& params, const Mat& X) {
  if (X.rows() != basis.n) throw ContractError("spectral_forward: X rows != basis n");
  if (params.layers.empty()) throw ContractError("spectral_forward: empty model");
  if (static_cast<int>(X.cols()) != params.input_dim())
    throw ContractError("spectral_forward: X cols != first layer input dim");
  Mat Z = X;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    const Vec gains = layer.filter.response(basis.eigenvalues);
    Mat S = basis.U.transpose() * Z;
    S = gains.asDiagonal() * S;
    Z = basis.U * S;
    Z = Z * layer.W;
    if (l + 1 < params.layers.size()) Z = Z.cwiseMax(0.0);
  }
  return Z;
}

Embedding readout_mean(const Embedding& Z) {
  if (Z.rows() == 0) throw ContractError("readout_mean: empty embedding");
  return Z.colwise().mean();
}

Embedding head_forward(const Head& head, const Embedding& Z) {
  if (Z.cols() != head.W1.rows()) throw ContractError("head_forward: dimension mismatch");
  Mat H = (Z * head.W1).rowwise() + head.b1.row(0);
  H = H.cwiseMax(0.0);
  return (H * head.W2).rowwise() + head.b2.row(0);
}

int ParamLeaves::find(const std::string& name) const {
  for (const auto& [n, id] : ids) {
    if (n == name) return id;
  }
  throw ContractError("ParamLeaves: unknown leaf " + name);
}

ParamLeaves mount_layers(ad::Tape& t, const ModelParams& p, bool trainable) {
  ParamLeaves leaves;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string base = "layer" + std::to_string(l);
    leaves.add(base + ".filter", t.leaf(p.layers[l].filter.coeffs, trainable, base + ".filter"));
    leaves.add(base + ".W", t.leaf(p.layers[l].W, trainable, base + ".W"));
  }
  return leaves;
}

ParamLeaves mount_head(ad::Tape& t, const Head& h, bool trainable, const std::string& prefix) {
  ParamLeaves leaves;
  leaves.add(prefix + ".W1", t.leaf(h.W1, trainable, prefix + ".W1"));
  leaves.add(prefix + ".b1", t.leaf(h.b1, trainable, prefix + ".b1"));
  leaves.add(prefix + ".W2", t.leaf(h.W2, trainable, prefix + ".W2"));
  leaves.add(prefix + ".b2", t.leaf(h.b2, trainable, prefix + ".b2"));
  return leaves;
}

int filtered_forward_tape(ad::Tape& t, int basis_left, int basis_right, const Vec& lambdas,
                          const ModelParams& shapes, const ParamLeaves& layer_leaves, int x_node) {
  int z = x_node;
  for (std::size_t l = 0; l < shapes.layers.size(); ++l) {
    const std::string base = "layer" + std::to_string(l);
    const int c = layer_leaves.find(base + ".filter");
    const int w = layer_leaves.find(base + ".W");
    const int vander = t.constant(
        filter_vandermonde(lambdas, shapes.layers[l].filter.degree(),
                           shapes.layers[l].filter.lambda_scale));
    const int gains = t.matmul(vander, c);            // K x 1
    int s = t.matmul(basis_right, z, true, false);    // K x F
    s = t.diag_scale(gains, s);
    z = t.matmul(basis_left, s);                      // n x F
    z = t.matmul(z, w);
    if (l + 1 < shapes.layers.size()) z = t.relu(z);
  }
  return z;
}

int head_forward_tape(ad::Tape& t, const ParamLeaves& head_leaves, int z_node,
                      const std::string& prefix) {
  int h = t.matmul(z_node, head_leaves.find(prefix + ".W1"));
  h = t.add_rowvec(h, head_leaves.find(prefix + ".b1"));
  h = t.relu(h);
  h = t.matmul(h, head_leaves.find(prefix + ".W2"));
  return t.add_rowvec(h, head_leaves.find(prefix + ".b2"));
}

GradientBundle collect_gradients(const ad::Tape& t, const ParamLeaves& leaves) {
  GradientBundle out;
  for (const auto& [name, id] : leaves.ids) {
    if (!t.requires_grad(id)) continue;  // frozen groups receive no gradient
    const Mat& g = t.grad(id);
    out[name] = g.size() ? g : Mat::Zero(t.value(id).rows(), t.value(id).cols());
  }
  return out;
}

ParamRefs model_param_refs(ModelParams& p) {
  ParamRefs refs;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string base = "layer" + std::to_string(l);
    refs.emplace_back(base + ".filter", &p.layers[l].filter.coeffs);
    refs.emplace_back(base + ".W", &p.layers[l].W);
  }
  auto head = head_param_refs(p.head);
  refs.insert(refs.end(), head.begin(), head.end());
  return refs;
}

ParamRefs head_param_refs(Head& h, const std::string& prefix) {
  return {{prefix + ".W1", &h.W1}, {prefix + ".b1", &h.b1}, {prefix + ".W2", &h.W2}, {prefix + ".b2", &h.b2}};
}

long param_count(const ParamRefs& refs) {
  long total = 0;
  for (const auto& [name, m] : refs) total += static_cast<long>(m->size());
  return total;
}

void adam_step(const ParamRefs& params, const GradientBundle& grads, AdamState& state, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(beta2, double(state.t));
  for (const auto& [name, pm] : params) {
    auto git = grads.find(name);
    const Mat g = git != grads.end() ? git->second : Mat::Zero(pm->rows(), pm->cols());
    if (g.rows() != pm->rows() || g.cols() != pm->cols())
      throw ContractError("adam_step: gradient shape mismatch for " + name);
    Mat& m = state.m.try_emplace(name, Mat::Zero(pm->rows(), pm->cols())).first->second;
    Mat& v = state.v.try_emplace(name, Mat::Zero(pm->rows(), pm->cols())).first->second;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const Mat mhat = m / bc1;
    const Mat vhat = v / bc2;
    *pm -= lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
  }
}

}  // namespace igap
