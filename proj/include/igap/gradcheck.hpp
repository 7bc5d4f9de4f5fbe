#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace igap {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  int coords_checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool all_passed(double tol = 1e-4) const;
};

// Assembles the full prompt fine-tuning loss on a small random instance and
// compares the tape gradient of every trainable array (filters, channel
// weights, head, Ps, alpha, Pt, Pl) against central finite differences at up
// to `coords` sampled coordinates each.
GradCheckReport run_gradcheck(std::uint64_t seed, int coords = 20, double h = 1e-4);

}  // namespace igap
