#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "biaseval/errors.hpp"

namespace biaseval {

enum class BinaryLabel : std::uint8_t { kNegative = 0, kPositive = 1 };

// Selects which side of equalized odds a rate-based metric looks at:
// true positive rates for the positive class, true negative rates for the
// negative class.
enum class ClassPolarity : std::uint8_t { kPositiveClass, kNegativeClass };

inline const char* to_string(ClassPolarity p) {
  return p == ClassPolarity::kPositiveClass ? "positive" : "negative";
}

// One scored item. `score` is absent for freshly generated template text
// that has not been run through a model yet; every metric entry point
// requires it to be present and finite.
struct LabeledExample {
  std::string id;
  std::optional<double> score;
  BinaryLabel label = BinaryLabel::kNegative;
  std::vector<std::string> subgroups;  // kept sorted + unique
  std::optional<std::uint32_t> char_length;
  std::string text;  // empty when the source had no text column

  bool in_subgroup(const std::string& subgroup_id) const {
    for (const auto& s : subgroups) {
      if (s == subgroup_id) return true;
    }
    return false;
  }
};

// Multiset of scores for one cell of a partition.
struct ScoreSample {
  std::vector<double> scores;

  std::size_t size() const { return scores.size(); }
  bool empty() const { return scores.empty(); }
  void add(double s) { scores.push_back(s); }
};

// The four score samples for one subgroup: background negatives/positives
// (examples NOT carrying the subgroup tag) and subgroup negatives/positives.
struct SubgroupPartition {
  std::string subgroup_id;
  ScoreSample d_neg;   // background negative
  ScoreSample d_pos;   // background positive
  ScoreSample dg_neg;  // subgroup negative
  ScoreSample dg_pos;  // subgroup positive
};

// Empirical rate curve: subgroup and background rate at each threshold,
// predicted-positive meaning score > t. For the positive class the rates are
// TPRs (nonincreasing in t), for the negative class TNRs (nondecreasing).
struct RateCurve {
  struct Point {
    double threshold;
    double subgroup_rate;    // x(t)
    double background_rate;  // y(t)
  };
  ClassPolarity polarity = ClassPolarity::kPositiveClass;
  std::vector<Point> points;  // sorted by threshold, includes +-inf sentinels
};

// One row of a bias report. A metric is absent exactly when one of the two
// samples it needs is empty.
struct BiasMetricsRow {
  std::string subgroup_id;
  std::uint64_t n_bg_neg = 0;
  std::uint64_t n_bg_pos = 0;
  std::uint64_t n_sg_neg = 0;
  std::uint64_t n_sg_pos = 0;
  std::optional<double> subgroup_auc;
  std::optional<double> bpsn_auc;
  std::optional<double> bnsp_auc;
  std::optional<double> negative_aeg;
  std::optional<double> positive_aeg;

  bool operator==(const BiasMetricsRow&) const = default;
};

// Slicing applied before a report: keep examples strictly shorter than
// max_chars, then drop subgroups with fewer than min_subgroup_count in-slice
// examples (the count filter is consumed by report building).
struct SliceFilter {
  std::optional<std::uint32_t> max_chars;
  std::uint64_t min_subgroup_count = 0;
};

namespace detail {

inline void require_finite(double v, const char* context) {
  if (!std::isfinite(v)) {
    throw NonFiniteScore(std::string(context) + " is not finite");
  }
}

}  // namespace detail

}  // namespace biaseval
