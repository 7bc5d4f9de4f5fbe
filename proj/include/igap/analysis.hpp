#pragma once

#include <limits>
#include <string>
#include <vector>

#include "igap/spectral.hpp"

namespace igap {

inline constexpr double kSnrInfinity = std::numeric_limits<double>::infinity();

// Per-component signal-to-noise ratio |u_i^T x| / (1 - |u_i^T x|) for a unit
// signal. Projection magnitudes this close to 1 saturate to the infinity
// sentinel. Absolute values keep the statistic defined for negative
// projections.
double sp_snr(const SpectralBasis& basis, const Vec& x, int component);

// Mean of sp_snr over all K components; infinity-propagating.
double graph_snr(const SpectralBasis& basis, const Vec& x);

struct AlignmentProfile {
  Vec alignment;    // a_i, mean |u_i^T z| over normalized signals z
  Vec eigenvalues;  // lambda_i per component
  double spearman_rho = 0.0;
  int skipped_rows = 0;  // zero-norm rows dropped
};

// Rows of Z are signals in R^n; each row is normalized before projecting.
AlignmentProfile alignment_profile(const SpectralBasis& basis, const Mat& Z);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// Probability a random positive outranks a random negative; ties count 1/2.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Spearman rank correlation with average ranks on ties.
double spearman(const Vec& x, const Vec& y);

void export_embeddings(const Mat& Z, const std::string& path);
Mat import_embeddings(const std::string& path);

}  // namespace igap
