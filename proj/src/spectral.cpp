#include "igap/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "igap/rng.hpp"

namespace igap {

namespace {

constexpr double kDegenerateGap = 1e-9;

bool lex_less(const Mat& U, int a, int b) {
  for (Eigen::Index r = 0; r < U.rows(); ++r) {
    if (U(r, a) != U(r, b)) return U(r, a) < U(r, b);
  }
  return false;
}

// Connected components straight off the CSR adjacency; the multiplicity of
// eigenvalue 0 of a combinatorial Laplacian equals this count.
int components_of(const Laplacian& L) {
  std::vector<char> seen(L.n, 0);
  std::vector<NodeId> stack;
  int components = 0;
  for (NodeId s = 0; s < L.n; ++s) {
    if (seen[s]) continue;
    ++components;
    seen[s] = 1;
    stack.push_back(s);
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      for (std::uint32_t p = L.row_ptr[u]; p < L.row_ptr[u + 1]; ++p) {
        NodeId v = L.col[p];
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
  }
  return components;
}

}  // namespace

void canonicalize_basis(Vec& eigenvalues, Mat& U) {
  const int k = static_cast<int>(eigenvalues.size());
  for (int j = 0; j < k; ++j) {
    // largest-|entry| decides the sign; near-ties (float noise on symmetric
    // eigenvectors) resolve to the lowest index
    const double max_abs = U.col(j).cwiseAbs().maxCoeff();
    Eigen::Index best = 0;
    for (Eigen::Index r = 0; r < U.rows(); ++r) {
      if (std::abs(U(r, j)) >= max_abs * (1.0 - 1e-12)) {
        best = r;
        break;
      }
    }
    if (U(best, j) < 0.0) U.col(j) = -U.col(j);
  }
  // eigenvalue ascending, lexicographic within degenerate blocks
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (std::abs(eigenvalues[a] - eigenvalues[b]) >= kDegenerateGap)
      return eigenvalues[a] < eigenvalues[b];
    return lex_less(U, a, b);
  });
  Vec ev(k);
  Mat V(U.rows(), k);
  for (int j = 0; j < k; ++j) {
    ev[j] = eigenvalues[order[j]];
    V.col(j) = U.col(order[j]);
  }
  eigenvalues = std::move(ev);
  U = std::move(V);
}

void check_basis(const Laplacian& L, const SpectralBasis& b) {
  const int k = b.K();
  if (b.n != static_cast<int>(L.n)) throw ContractError("check_basis: ambient size mismatch");
  const Mat gram = b.U.transpose() * b.U - Mat::Identity(k, k);
  if (gram.cwiseAbs().maxCoeff() > 1e-8)
    throw NumericError("basis invariant violated: orthonormality > 1e-8");
  if (k > 0 && b.eigenvalues[0] < -1e-9)
    throw NumericError("basis invariant violated: lambda_1 < -1e-9");
  for (int j = 1; j < k; ++j) {
    if (b.eigenvalues[j] < b.eigenvalues[j - 1] - 1e-12)
      throw NumericError("basis invariant violated: eigenvalues not ascending");
  }
  for (int j = 0; j < k; ++j) {
    const Vec v = b.U.col(j);
    const double res = (L.matvec(v) - b.eigenvalues[j] * v).norm();
    if (res > 1e-6 * std::max(1.0, b.eigenvalues[j]))
      throw NumericError("basis invariant violated: residual " + std::to_string(res) +
                         " at eigenvalue " + std::to_string(b.eigenvalues[j]));
  }
}

SpectralBasis eig_dense(const Laplacian& L, int dense_cap) {
  if (static_cast<int>(L.n) > dense_cap)
    throw ContractError("eig_dense: n = " + std::to_string(L.n) + " exceeds dense cap " +
                        std::to_string(dense_cap) + "; use eig_lanczos");
  Eigen::SelfAdjointEigenSolver<Mat> solver(L.dense());
  if (solver.info() != Eigen::Success) throw NumericError("eig_dense: solver failed");
  SpectralBasis b;
  b.n = static_cast<int>(L.n);
  b.eigenvalues = solver.eigenvalues();
  b.U = solver.eigenvectors();
  canonicalize_basis(b.eigenvalues, b.U);
  check_basis(L, b);
  return b;
}

// EISPACK-style tql2: implicit-shift QL on a symmetric tridiagonal matrix.
void tridiag_ql(Vec& d, Vec& e, Mat& Z) {
  const int n = static_cast<int>(d.size());
  if (n <= 1) return;
  Vec sub = Vec::Zero(n);  // sub[i] couples d[i], d[i+1]
  for (int i = 0; i + 1 < n; ++i) sub[i] = e[i];

  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(sub[m]) <= 2.3e-16 * dd + 1e-300) break;
      }
      if (m != l) {
        if (++iter == 60) throw NumericError("tridiag_ql: too many iterations");
        double g = (d[l + 1] - d[l]) / (2.0 * sub[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + sub[l] / (g + (g >= 0 ? r : -r));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (int i = m - 1; i >= l; --i) {
          double f = s * sub[i];
          const double b = c * sub[i];
          r = std::hypot(f, g);
          sub[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            sub[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          for (int row = 0; row < n; ++row) {
            f = Z(row, i + 1);
            Z(row, i + 1) = s * Z(row, i) + c * f;
            Z(row, i) = c * Z(row, i) - s * f;
          }
        }
        if (underflow) continue;
        d[l] -= p;
        sub[l] = g;
        sub[m] = 0.0;
      }
    } while (m != l);
  }
}

namespace {

// One Lanczos pass with full reorthogonalization. beta[j] couples columns j
// and j+1; a zero beta marks a breakdown where a fresh random direction was
// injected (keeps the factorization block-tridiagonal and exact).
void lanczos_factorization(const Laplacian& L, int m, Rng& rng, Mat& Q, Vec& alpha, Vec& beta) {
  const int n = static_cast<int>(L.n);
  Q.resize(n, m);
  alpha.resize(m);
  beta = Vec::Zero(m);

  auto random_unit_orthogonal = [&](int cols) {
    Vec v(n);
    while (true) {
      for (int i = 0; i < n; ++i) v[i] = rng.normal();
      for (int pass = 0; pass < 2; ++pass) {
        if (cols > 0) v -= Q.leftCols(cols) * (Q.leftCols(cols).transpose() * v);
      }
      const double nrm = v.norm();
      if (nrm > 1e-8) return Vec(v / nrm);
    }
  };

  Vec q = random_unit_orthogonal(0);
  Vec q_prev = Vec::Zero(n);
  double b_prev = 0.0;
  for (int j = 0; j < m; ++j) {
    Q.col(j) = q;
    Vec w = L.matvec(q);
    alpha[j] = q.dot(w);
    w -= alpha[j] * q;
    if (b_prev != 0.0) w -= b_prev * q_prev;
    for (int pass = 0; pass < 2; ++pass) {
      w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
    }
    if (j + 1 == m) break;
    const double b = w.norm();
    if (b < 1e-10) {
      beta[j] = 0.0;
      q_prev = q;
      b_prev = 0.0;
      q = random_unit_orthogonal(j + 1);
    } else {
      beta[j] = b;
      q_prev = q;
      b_prev = b;
      q = w / b;
    }
  }
}

}  // namespace

SpectralBasis eig_lanczos(const Laplacian& L, int k, std::uint64_t seed) {
  const int n = static_cast<int>(L.n);
  if (k < 1 || k >= n) throw ContractError("eig_lanczos: need 1 <= k < n");

  const int zero_multiplicity = std::min(k, components_of(L));
  const int max_restarts = 10 * k;
  int m = std::min(n, std::max(3 * k, k + 30));
  Rng rng = Rng(seed).derive("lanczos");

  for (int restart = 0; restart <= max_restarts; ++restart) {
    Mat Q;
    Vec alpha, beta;
    Rng run_rng = rng.derive("run", static_cast<std::uint64_t>(restart));
    lanczos_factorization(L, m, run_rng, Q, alpha, beta);

    Vec d = alpha;
    Vec e = m > 1 ? Vec(beta.head(m - 1)) : Vec();
    Mat Z = Mat::Identity(m, m);
    tridiag_ql(d, e, Z);

    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return d[a] < d[b]; });

    SpectralBasis b;
    b.n = n;
    b.eigenvalues.resize(k);
    b.U.resize(n, k);
    for (int j = 0; j < k; ++j) {
      b.eigenvalues[j] = d[order[j]];
      Vec v = Q * Z.col(order[j]);
      v /= v.norm();
      b.U.col(j) = v;
    }
    bool converged = true;
    for (int j = 0; j < k && converged; ++j) {
      const Vec v = b.U.col(j);
      const double res = (L.matvec(v) - b.eigenvalues[j] * v).norm();
      if (res > 1e-8 * std::max(1.0, b.eigenvalues[j])) converged = false;
    }
    // a single Krylov sequence cannot see a repeated zero eigenvalue; the
    // nullspace multiplicity is known exactly, so enforce it
    if (converged) {
      int zeros = 0;
      for (int j = 0; j < k; ++j) {
        if (b.eigenvalues[j] < 1e-9) ++zeros;
      }
      if (zeros != zero_multiplicity) converged = false;
    }
    if (converged) {
      canonicalize_basis(b.eigenvalues, b.U);
      check_basis(L, b);
      return b;
    }
    if (m == n) break;
    m = std::min(n, 2 * m + 10);
  }
  throw NumericError("eig_lanczos: no convergence for k = " + std::to_string(k) + " after " +
                     std::to_string(max_restarts) + " restarts");
}

Vec gft(const SpectralBasis& basis, const Vec& x) {
  if (x.size() != basis.n) throw ContractError("gft: signal length != n");
  return basis.U.transpose() * x;
}

Mat gft(const SpectralBasis& basis, const Mat& X) {
  if (X.rows() != basis.n) throw ContractError("gft: signal rows != n");
  return basis.U.transpose() * X;
}

Vec igft(const SpectralBasis& basis, const Vec& xhat) {
  if (xhat.size() != basis.K()) throw ContractError("igft: spectrum length != K");
  return basis.U * xhat;
}

Mat igft(const SpectralBasis& basis, const Mat& Xhat) {
  if (Xhat.rows() != basis.K()) throw ContractError("igft: spectrum rows != K");
  return basis.U * Xhat;
}

SpectralBasis truncate(const SpectralBasis& basis, int k) {
  if (k < 1 || k > basis.K()) throw ContractError("truncate: k out of range");
  SpectralBasis out;
  out.n = basis.n;
  out.eigenvalues = basis.eigenvalues.head(k);
  out.U = basis.U.leftCols(k);
  return out;
}

double max_principal_angle(const Mat& U1, const Mat& U2) {
  if (U1.rows() != U2.rows() || U1.cols() != U2.cols())
    throw ContractError("max_principal_angle: shape mismatch");
  Eigen::JacobiSVD<Mat> svd(U1.transpose() * U2);
  const double smin = svd.singularValues().minCoeff();
  return std::acos(std::clamp(smin, -1.0, 1.0));
}

}  // namespace igap
