#pragma once

#include <cstdint>

#include "igap/graph.hpp"

namespace igap {

// Partial or full eigendecomposition of a Laplacian: eigenvalues ascending,
// orthonormal columns, canonical sign (largest-|entry| positive, ties by
// lowest index). Degenerate blocks (|dlambda| < 1e-9) are ordered by
// lexicographic column comparison; downstream comparisons inside a block must
// be subspace-based.
struct SpectralBasis {
  int n = 0;
  Vec eigenvalues;  // ascending, size K
  Mat U;            // n x K

  int K() const { return static_cast<int>(eigenvalues.size()); }
  bool is_full() const { return K() == n; }
};

inline constexpr int kDenseCapDefault = 2000;

// Full decomposition via symmetric tridiagonalization + implicit QL
// (Eigen::SelfAdjointEigenSolver). Throws Contract error above the size cap.
SpectralBasis eig_dense(const Laplacian& L, int dense_cap = kDenseCapDefault);

// k smallest eigenpairs by Lanczos with full reorthogonalization. Restarts
// with a growing Krylov space until the residuals converge; deterministic for
// a fixed seed. Throws NumericError instead of returning unconverged pairs.
SpectralBasis eig_lanczos(const Laplacian& L, int k, std::uint64_t seed);

Vec gft(const SpectralBasis& basis, const Vec& x);
Mat gft(const SpectralBasis& basis, const Mat& X);
Vec igft(const SpectralBasis& basis, const Vec& xhat);
Mat igft(const SpectralBasis& basis, const Mat& Xhat);

SpectralBasis truncate(const SpectralBasis& basis, int k);

// Largest principal angle (radians) between the column spans.
double max_principal_angle(const Mat& U1, const Mat& U2);

// Orthonormality / residual / ordering invariants; throws NumericError.
// Called after every decomposition.
void check_basis(const Laplacian& L, const SpectralBasis& basis);

// Sign + degenerate-block ordering; exposed for tests.
void canonicalize_basis(Vec& eigenvalues, Mat& U);

// Eigen-decomposition of a symmetric tridiagonal matrix (diag, off-diag) by
// the implicit-shift QL algorithm, accumulating eigenvectors into Z (which
// must come in as identity). Used by the Lanczos inner solve.
void tridiag_ql(Vec& diag, Vec& off, Mat& Z);

}  // namespace igap
