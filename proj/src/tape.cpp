#include "igap/tape.hpp"

#include <cmath>

namespace igap::ad {

namespace {

Mat mm(const Mat& X, bool tx, const Mat& Y, bool ty) {
  if (!tx && !ty) return X * Y;
  if (tx && !ty) return X.transpose() * Y;
  if (!tx && ty) return X * Y.transpose();
  return X.transpose() * Y.transpose();
}

}  // namespace

const Tape::Node& Tape::at(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) throw ContractError("Tape: bad node id");
  return nodes_[id];
}

int Tape::push(Node n) {
  for (int in : n.inputs) {
    if (at(in).requires_grad) n.requires_grad = true;
  }
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Mat value, bool requires_grad, std::string name) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.name = std::move(name);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::matmul(int a, int b, bool trans_a, bool trans_b) {
  const Mat& A = at(a).value;
  const Mat& B = at(b).value;
  const auto ac = trans_a ? A.rows() : A.cols();
  const auto br = trans_b ? B.cols() : B.rows();
  if (ac != br) throw ContractError("matmul: inner dimension mismatch");
  Node n;
  n.op = Op::MatMul;
  n.inputs = {a, b};
  n.trans_a = trans_a;
  n.trans_b = trans_b;
  n.value = mm(A, trans_a, B, trans_b);
  return push(std::move(n));
}

int Tape::diag_scale(int d, int m) {
  const Mat& D = at(d).value;
  const Mat& M = at(m).value;
  if (D.cols() != 1 || D.rows() != M.rows()) throw ContractError("diag_scale: d must be rows(M) x 1");
  Node n;
  n.op = Op::DiagScale;
  n.inputs = {d, m};
  n.value = D.col(0).asDiagonal() * M;
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  const Mat& A = at(a).value;
  const Mat& B = at(b).value;
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw ContractError("add: shape mismatch");
  Node n;
  n.op = Op::Add;
  n.inputs = {a, b};
  n.value = A + B;
  return push(std::move(n));
}

int Tape::add_rowvec(int m, int b) {
  const Mat& M = at(m).value;
  const Mat& B = at(b).value;
  if (B.rows() != 1 || B.cols() != M.cols()) throw ContractError("add_rowvec: b must be 1 x cols(M)");
  Node n;
  n.op = Op::AddRowVec;
  n.inputs = {m, b};
  n.value = M.rowwise() + B.row(0);
  return push(std::move(n));
}

int Tape::scale(int a, double s) {
  Node n;
  n.op = Op::Scale;
  n.inputs = {a};
  n.factor = s;
  n.value = s * at(a).value;
  return push(std::move(n));
}

int Tape::relu(int a) {
  Node n;
  n.op = Op::Relu;
  n.inputs = {a};
  n.value = at(a).value.cwiseMax(0.0);
  return push(std::move(n));
}

int Tape::mean_rows(int a) {
  const Mat& A = at(a).value;
  if (A.rows() == 0) throw ContractError("mean_rows: empty input");
  Node n;
  n.op = Op::MeanRows;
  n.inputs = {a};
  n.value = A.colwise().mean();
  return push(std::move(n));
}

int Tape::cosine(int a, int b) {
  const Mat& A = at(a).value;
  const Mat& B = at(b).value;
  if (A.cols() != B.cols()) throw ContractError("cosine: feature dimension mismatch");
  Eigen::VectorXd na = A.rowwise().norm();
  Eigen::VectorXd nb = B.rowwise().norm();
  if (na.minCoeff() <= 0.0 || nb.minCoeff() <= 0.0)
    throw NumericError("cosine: zero-norm embedding, similarity undefined");
  Node n;
  n.op = Op::Cosine;
  n.inputs = {a, b};
  n.value = (na.cwiseInverse().asDiagonal() * (A * B.transpose())) * nb.cwiseInverse().asDiagonal();
  // stash the norms for backward
  n.aux.resize(std::max(na.size(), nb.size()), 2);
  n.aux.setZero();
  n.aux.col(0).head(na.size()) = na;
  n.aux.col(1).head(nb.size()) = nb;
  return push(std::move(n));
}

int Tape::logsumexp_rows(int a) {
  const Mat& A = at(a).value;
  Node n;
  n.op = Op::LogSumExpRows;
  n.inputs = {a};
  n.value.resize(A.rows(), 1);
  n.aux.resize(A.rows(), A.cols());  // softmax, reused in backward
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double mx = A.row(i).maxCoeff();
    Eigen::RowVectorXd ex = (A.row(i).array() - mx).exp();
    const double s = ex.sum();
    n.value(i, 0) = mx + std::log(s);
    n.aux.row(i) = ex / s;
  }
  return push(std::move(n));
}

int Tape::gather_cols(int a, std::vector<int> idx) {
  const Mat& A = at(a).value;
  if (static_cast<Eigen::Index>(idx.size()) != A.rows())
    throw ContractError("gather_cols: one index per row required");
  Node n;
  n.op = Op::GatherCols;
  n.inputs = {a};
  n.value.resize(A.rows(), 1);
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    if (idx[i] < 0 || idx[i] >= A.cols()) throw ContractError("gather_cols: index out of range");
    n.value(i, 0) = A(i, idx[i]);
  }
  n.idx = std::move(idx);
  return push(std::move(n));
}

int Tape::hstack(int a, int b) {
  const Mat& A = at(a).value;
  const Mat& B = at(b).value;
  if (A.rows() != B.rows()) throw ContractError("hstack: row mismatch");
  Node n;
  n.op = Op::HStack;
  n.inputs = {a, b};
  n.value.resize(A.rows(), A.cols() + B.cols());
  n.value << A, B;
  return push(std::move(n));
}

int Tape::vstack(const std::vector<int>& parts) {
  if (parts.empty()) throw ContractError("vstack: empty");
  Eigen::Index cols = at(parts[0]).value.cols();
  Eigen::Index rows = 0;
  for (int p : parts) {
    if (at(p).value.cols() != cols) throw ContractError("vstack: column mismatch");
    rows += at(p).value.rows();
  }
  Node n;
  n.op = Op::VStack;
  n.inputs = parts;
  n.value.resize(rows, cols);
  Eigen::Index r = 0;
  for (int p : parts) {
    n.value.middleRows(r, at(p).value.rows()) = at(p).value;
    r += at(p).value.rows();
  }
  return push(std::move(n));
}

int Tape::square(int a) {
  Node n;
  n.op = Op::Square;
  n.inputs = {a};
  n.value = at(a).value.cwiseProduct(at(a).value);
  return push(std::move(n));
}

int Tape::sum(int a) {
  Node n;
  n.op = Op::Sum;
  n.inputs = {a};
  n.value = Mat::Constant(1, 1, at(a).value.sum());
  return push(std::move(n));
}

void Tape::accumulate(int id, const Mat& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  }
  n.grad += g;
}

const Mat& Tape::grad(int id) const {
  static const Mat empty;
  const Node& n = at(id);
  return n.grad.size() ? n.grad : empty;
}

void Tape::backward(int loss_id) {
  const Node& loss = at(loss_id);
  if (loss.value.rows() != 1 || loss.value.cols() != 1)
    throw ContractError("backward: loss must be scalar");
  if (!std::isfinite(loss.value(0, 0)))
    throw NumericError("backward: non-finite loss");
  if (ran_backward_) throw ContractError("backward: tape already consumed");
  ran_backward_ = true;

  nodes_[loss_id].grad = Mat::Constant(1, 1, 1.0);
  if (!nodes_[loss_id].requires_grad) return;

  for (int id = loss_id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    const Mat& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul: {
        const Mat& A = nodes_[n.inputs[0]].value;
        const Mat& B = nodes_[n.inputs[1]].value;
        // C = op_a(A) * op_b(B)
        if (nodes_[n.inputs[0]].requires_grad) {
          Mat dA = mm(g, false, B, !n.trans_b);
          accumulate(n.inputs[0], n.trans_a ? Mat(dA.transpose()) : dA);
        }
        if (nodes_[n.inputs[1]].requires_grad) {
          Mat dB = mm(A, !n.trans_a, g, false);
          accumulate(n.inputs[1], n.trans_b ? Mat(dB.transpose()) : dB);
        }
        break;
      }
      case Op::DiagScale: {
        const Mat& D = nodes_[n.inputs[0]].value;
        const Mat& M = nodes_[n.inputs[1]].value;
        if (nodes_[n.inputs[0]].requires_grad) {
          Mat dD = (g.cwiseProduct(M)).rowwise().sum();
          accumulate(n.inputs[0], dD);
        }
        if (nodes_[n.inputs[1]].requires_grad) {
          accumulate(n.inputs[1], D.col(0).asDiagonal() * g);
        }
        break;
      }
      case Op::Add:
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g);
        break;
      case Op::AddRowVec:
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g.colwise().sum());
        break;
      case Op::Scale:
        accumulate(n.inputs[0], n.factor * g);
        break;
      case Op::Relu: {
        const Mat& A = nodes_[n.inputs[0]].value;
        accumulate(n.inputs[0], (A.array() > 0.0).cast<double>().matrix().cwiseProduct(g));
        break;
      }
      case Op::MeanRows: {
        const Eigen::Index rows = nodes_[n.inputs[0]].value.rows();
        accumulate(n.inputs[0], Mat::Ones(rows, 1) * g / double(rows));
        break;
      }
      case Op::Cosine: {
        const Mat& A = nodes_[n.inputs[0]].value;
        const Mat& B = nodes_[n.inputs[1]].value;
        const Mat& C = n.value;
        const Eigen::VectorXd na = n.aux.col(0).head(A.rows());
        const Eigen::VectorXd nb = n.aux.col(1).head(B.rows());
        // dC_ij/da_i = b_j/(|a||b|) - C_ij a_i/|a|^2
        if (nodes_[n.inputs[0]].requires_grad) {
          Mat dA = (g * nb.cwiseInverse().asDiagonal()) * B;
          dA = na.cwiseInverse().asDiagonal() * dA;
          const Eigen::VectorXd coef = (g.cwiseProduct(C)).rowwise().sum();
          dA -= (coef.cwiseQuotient(na.cwiseProduct(na))).asDiagonal() * A;
          accumulate(n.inputs[0], dA);
        }
        if (nodes_[n.inputs[1]].requires_grad) {
          Mat dB = (g.transpose() * na.cwiseInverse().asDiagonal()) * A;
          dB = nb.cwiseInverse().asDiagonal() * dB;
          const Eigen::VectorXd coef = (g.cwiseProduct(C)).colwise().sum().transpose();
          dB -= (coef.cwiseQuotient(nb.cwiseProduct(nb))).asDiagonal() * B;
          accumulate(n.inputs[1], dB);
        }
        break;
      }
      case Op::LogSumExpRows: {
        // aux holds softmax rows
        accumulate(n.inputs[0], g.col(0).asDiagonal() * n.aux);
        break;
      }
      case Op::GatherCols: {
        const Mat& A = nodes_[n.inputs[0]].value;
        Mat dA = Mat::Zero(A.rows(), A.cols());
        for (Eigen::Index i = 0; i < A.rows(); ++i) dA(i, n.idx[i]) = g(i, 0);
        accumulate(n.inputs[0], dA);
        break;
      }
      case Op::HStack: {
        const Eigen::Index ca = nodes_[n.inputs[0]].value.cols();
        accumulate(n.inputs[0], g.leftCols(ca));
        accumulate(n.inputs[1], g.rightCols(g.cols() - ca));
        break;
      }
      case Op::VStack: {
        Eigen::Index r = 0;
        for (int p : n.inputs) {
          const Eigen::Index rows = nodes_[p].value.rows();
          accumulate(p, g.middleRows(r, rows));
          r += rows;
        }
        break;
      }
      case Op::Square:
        accumulate(n.inputs[0], 2.0 * nodes_[n.inputs[0]].value.cwiseProduct(g));
        break;
      case Op::Sum: {
        const Mat& A = nodes_[n.inputs[0]].value;
        accumulate(n.inputs[0], Mat::Constant(A.rows(), A.cols(), g(0, 0)));
        break;
      }
    }
  }
}

}  // namespace igap::ad
