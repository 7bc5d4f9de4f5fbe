// Independent reference implementations used as test oracles. Everything here
// is deliberately naive (scalar loops, pairwise enumeration, finite
// differences) and must stay independent of the library's computation paths.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "igap/graph.hpp"
#include "igap/rng.hpp"

namespace oracle {

using igap::Mat;
using igap::Vec;

// triple-loop matrix product
inline Mat matmul(const Mat& A, const Mat& B) {
  Mat C = Mat::Zero(A.rows(), B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index k = 0; k < A.cols(); ++k)
      for (Eigen::Index j = 0; j < B.cols(); ++j) C(i, j) += A(i, k) * B(k, j);
  return C;
}

// central finite difference of a scalar function w.r.t. one matrix entry
inline double fd(const std::function<double(const Mat&)>& f, Mat at, Eigen::Index i,
                 Eigen::Index j, double h = 1e-4) {
  at(i, j) += h;
  const double up = f(at);
  at(i, j) -= 2.0 * h;
  const double down = f(at);
  return (up - down) / (2.0 * h);
}

// max relative error between an analytic gradient and finite differences over
// every coordinate (use on small arrays only)
inline double max_fd_error(const std::function<double(const Mat&)>& f, const Mat& at,
                           const Mat& analytic, double h = 1e-4) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < at.rows(); ++i) {
    for (Eigen::Index j = 0; j < at.cols(); ++j) {
      const double g = fd(f, at, i, j, h);
      const double rel = std::abs(g - analytic(i, j)) / std::max({1.0, std::abs(g), std::abs(analytic(i, j))});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

// pairwise enumeration ROC-AUC, ties at 1/2
inline double roc_auc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] <= 0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] > 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / double(pairs);
}

// Erdos-Renyi graph with standard-normal signals
inline igap::Graph random_graph(igap::NodeId n, double p, int feature_dim, std::uint64_t seed) {
  igap::Rng rng(seed);
  std::vector<std::pair<igap::NodeId, igap::NodeId>> edges;
  for (igap::NodeId i = 0; i < n; ++i)
    for (igap::NodeId j = i + 1; j < n; ++j)
      if (rng.uniform() < p) edges.emplace_back(i, j);
  Mat X(n, feature_dim);
  for (igap::NodeId i = 0; i < n; ++i)
    for (int f = 0; f < feature_dim; ++f) X(i, f) = rng.normal();
  return igap::make_graph(n, std::move(edges), std::move(X));
}

inline igap::Graph path_graph(igap::NodeId n, int feature_dim = 1) {
  std::vector<std::pair<igap::NodeId, igap::NodeId>> edges;
  for (igap::NodeId i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  Mat X = Mat::Zero(n, feature_dim);
  for (igap::NodeId i = 0; i < n; ++i) X(i, 0) = double(i);
  return igap::make_graph(n, std::move(edges), std::move(X));
}

inline igap::Graph triangle_graph(int feature_dim = 1) {
  Mat X = Mat::Ones(3, feature_dim);
  return igap::make_graph(3, {{0, 1}, {1, 2}, {0, 2}}, std::move(X));
}

}  // namespace oracle
