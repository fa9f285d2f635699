#pragma once

// Shared fixtures and independent reference implementations used as oracles.
// Everything here is deliberately naive (O(n*m) pair loops, direct counting)
// and must stay independent of the library code paths it checks.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "biaseval/metrics.hpp"
#include "biaseval/random.hpp"
#include "biaseval/types.hpp"

namespace oracle {

// Pairwise Mann-Whitney U: 1 per strictly greater pair, 1/2 per tie.
inline double brute_force_u(std::span<const double> a, std::span<const double> b) {
  double u = 0.0;
  for (double s : a) {
    for (double t : b) {
      if (s > t) {
        u += 1.0;
      } else if (s == t) {
        u += 0.5;
      }
    }
  }
  return u;
}

inline double brute_force_auc(std::span<const double> neg, std::span<const double> pos) {
  return brute_force_u(pos, neg) /
         (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Uniform scores; when `tie_grid` > 0 scores are snapped to that many levels
// so ties occur.
inline std::vector<double> random_scores(biaseval::Xoshiro256pp& rng, std::size_t n,
                                         int tie_grid = 0) {
  std::vector<double> out(n);
  for (auto& v : out) {
    double u = rng.uniform01();
    if (tie_grid > 0) {
      u = static_cast<double>(static_cast<int>(u * tie_grid)) / tie_grid;
    }
    v = u;
  }
  return out;
}

}  // namespace oracle

namespace fixtures {

// Shared fixture FIX1: D- = {0.1, 0.2, 0.3}, D+ = {0.6, 0.8},
// Dg- = {0.65}, Dg+ = {0.7, 0.95}, subgroup id "g".
inline std::vector<biaseval::LabeledExample> fix1_dataset() {
  using biaseval::BinaryLabel;
  std::vector<biaseval::LabeledExample> data;
  auto add = [&](const char* id, double score, BinaryLabel label, bool tagged) {
    biaseval::LabeledExample ex;
    ex.id = id;
    ex.score = score;
    ex.label = label;
    if (tagged) ex.subgroups = {"g"};
    data.push_back(std::move(ex));
  };
  add("bg-n1", 0.1, BinaryLabel::kNegative, false);
  add("bg-n2", 0.2, BinaryLabel::kNegative, false);
  add("bg-n3", 0.3, BinaryLabel::kNegative, false);
  add("bg-p1", 0.6, BinaryLabel::kPositive, false);
  add("bg-p2", 0.8, BinaryLabel::kPositive, false);
  add("sg-n1", 0.65, BinaryLabel::kNegative, true);
  add("sg-p1", 0.7, BinaryLabel::kPositive, true);
  add("sg-p2", 0.95, BinaryLabel::kPositive, true);
  return data;
}

inline biaseval::SubgroupPartition fix1_partition() {
  return biaseval::partition(fix1_dataset(), "g");
}

}  // namespace fixtures
