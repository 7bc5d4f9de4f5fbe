#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "igap/error.hpp"

namespace igap::ad {

using Mat = Eigen::MatrixXd;

// Recorded-tape reverse pass over a fixed operation vocabulary. Forward
// values are computed eagerly as nodes are appended, so node order is already
// topological; backward() walks it once in reverse. One tape per training
// step, rebuilt each step.
class Tape {
public:
  // trainable (or watched) input; gradients accumulate only where
  // requires_grad is set
  int leaf(Mat value, bool requires_grad, std::string name = {});
  int constant(Mat value) { return leaf(std::move(value), false); }
  int scalar(double v) { return constant(Mat::Constant(1, 1, v)); }

  int matmul(int a, int b, bool trans_a = false, bool trans_b = false);
  int diag_scale(int d, int m);  // diag(d) * M, d a column vector node
  int add(int a, int b);
  int add_rowvec(int m, int b);  // M + ones * b, b a 1 x C node
  int scale(int a, double s);
  int relu(int a);
  int mean_rows(int a);  // 1 x C, column means
  int cosine(int a, int b);  // pairwise cosine of rows: (rows_a x rows_b)
  int logsumexp_rows(int a);  // n x 1
  int gather_cols(int a, std::vector<int> idx);  // n x 1, entry i = A(i, idx[i])
  int hstack(int a, int b);
  int vstack(const std::vector<int>& parts);
  int square(int a);  // elementwise
  int sum(int a);     // 1 x 1

  const Mat& value(int id) const { return nodes_[id].value; }
  // reverse pass from a finite 1x1 loss node
  void backward(int loss_id);
  const Mat& grad(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

private:
  enum class Op {
    Leaf,
    MatMul,
    DiagScale,
    Add,
    AddRowVec,
    Scale,
    Relu,
    MeanRows,
    Cosine,
    LogSumExpRows,
    GatherCols,
    HStack,
    VStack,
    Square,
    Sum,
  };

  struct Node {
    Op op = Op::Leaf;
    std::vector<int> inputs;
    Mat value;
    Mat grad;
    bool requires_grad = false;
    bool trans_a = false, trans_b = false;
    double factor = 1.0;
    std::vector<int> idx;
    std::string name;
    // cached forward extras for cheap backward
    Mat aux;
  };

  int push(Node n);
  void accumulate(int id, const Mat& g);
  const Node& at(int id) const;

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

}  // namespace igap::ad
