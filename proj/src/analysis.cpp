#include "igap/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "igap/graph.hpp"

namespace igap {

double sp_snr(const SpectralBasis& basis, const Vec& x, int component) {
  if (component < 0 || component >= basis.K()) throw ContractError("sp_snr: component out of range");
  if (x.size() != basis.n) throw ContractError("sp_snr: signal length != n");
  if (std::abs(x.norm() - 1.0) > 1e-6) throw ContractError("sp_snr: signal must be normalized");
  const double p = std::abs(basis.U.col(component).dot(x));
  if (1.0 - p < 1e-12) return kSnrInfinity;
  return p / (1.0 - p);
}

double graph_snr(const SpectralBasis& basis, const Vec& x) {
  double acc = 0.0;
  for (int i = 0; i < basis.K(); ++i) {
    const double s = sp_snr(basis, x, i);
    if (s == kSnrInfinity) return kSnrInfinity;
    acc += s;
  }
  return acc / double(basis.K());
}

namespace {

Vec average_ranks(const Vec& v) {
  const Eigen::Index n = v.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
  Vec ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * double(i + j) + 1.0;  // ranks are 1-based
    for (Eigen::Index k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const Vec& x, const Vec& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("spearman: need two equal-length vectors");
  const Vec rx = average_ranks(x);
  const Vec ry = average_ranks(y);
  const double mx = rx.mean(), my = ry.mean();
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (Eigen::Index i = 0; i < rx.size(); ++i) {
    const double a = rx[i] - mx, b = ry[i] - my;
    cov += a * b;
    vx += a * a;
    vy += b * b;
  }
  if (vx <= 0.0 || vy <= 0.0) return 0.0;  // a constant sequence has no rank trend
  return cov / std::sqrt(vx * vy);
}

AlignmentProfile alignment_profile(const SpectralBasis& basis, const Mat& Z) {
  if (Z.cols() != basis.n) throw ContractError("alignment_profile: rows must be signals of length n");
  AlignmentProfile out;
  out.alignment = Vec::Zero(basis.K());
  out.eigenvalues = basis.eigenvalues;
  int used = 0;
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    const double nrm = Z.row(r).norm();
    if (nrm <= 0.0) {
      ++out.skipped_rows;
      continue;
    }
    const Vec z = Z.row(r).transpose() / nrm;
    out.alignment += (basis.U.transpose() * z).cwiseAbs();
    ++used;
  }
  if (used == 0) throw ContractError("alignment_profile: all rows have zero norm");
  out.alignment /= double(used);
  Vec index(basis.K());
  for (int i = 0; i < basis.K(); ++i) index[i] = double(i);
  out.spearman_rho = spearman(index, out.alignment);
  return out;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty()) throw ContractError("accuracy: empty input");
  if (predictions.size() != labels.size()) throw ContractError("accuracy: length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == labels[i]) ++hits;
  }
  return double(hits) / double(predictions.size());
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) throw ContractError("roc_auc: bad input");
  std::size_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l > 0 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0) throw ContractError("roc_auc: both classes required");

  // Mann-Whitney via average ranks; exactly the pairwise count with ties at 1/2
  Vec s(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) s[Eigen::Index(i)] = scores[i];
  const Vec ranks = average_ranks(s);
  double rank_sum_pos = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 0) rank_sum_pos += ranks[Eigen::Index(i)];
  }
  const double u = rank_sum_pos - double(n_pos) * double(n_pos + 1) / 2.0;
  return u / (double(n_pos) * double(n_neg));
}

void export_embeddings(const Mat& Z, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings: " + path);
  char buf[64];
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      if (j) out << ' ';
      std::snprintf(buf, sizeof(buf), "%.17g", Z(i, j));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Mat import_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read embeddings: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError("ragged embedding matrix", int(rows.size() + 1));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Mat(0, 0);
  Mat Z(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) Z(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
  return Z;
}

}  // namespace igap
