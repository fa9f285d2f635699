#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "biaseval/mwu.hpp"
#include "biaseval/types.hpp"

namespace biaseval {

// Routes every example into exactly one of the four samples by subgroup
// membership and label. Examples not tagged with `subgroup_id` form the
// background. A subgroup_id that appears on no example yields empty
// subgroup samples; callers decide whether that is an error.
inline SubgroupPartition partition(std::span<const LabeledExample> dataset,
                                   const std::string& subgroup_id) {
  SubgroupPartition p;
  p.subgroup_id = subgroup_id;
  for (const auto& ex : dataset) {
    if (!ex.score.has_value()) {
      throw NonFiniteScore("example '" + ex.id + "' has no score");
    }
    const double s = *ex.score;
    if (!std::isfinite(s)) {
      throw NonFiniteScore("example '" + ex.id + "' has a non-finite score");
    }
    const bool member = ex.in_subgroup(subgroup_id);
    const bool positive = ex.label == BinaryLabel::kPositive;
    if (member) {
      (positive ? p.dg_pos : p.dg_neg).add(s);
    } else {
      (positive ? p.d_pos : p.d_neg).add(s);
    }
  }
  return p;
}

namespace detail {

inline void require_nonempty(const ScoreSample& s, const char* metric, const char* which) {
  if (s.empty()) throw MetricUndefined(metric, which);
}

inline double auc_presorted(const std::vector<double>& neg, const std::vector<double>& pos) {
  const double u = mwu_u_presorted(pos, neg);
  return u / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline double aeg_presorted(const std::vector<double>& bg, const std::vector<double>& sg) {
  const double u = mwu_u_presorted(bg, sg);
  return 0.5 - u / (static_cast<double>(bg.size()) * static_cast<double>(sg.size()));
}

// Fraction of `sorted` strictly above t.
inline double frac_above(const std::vector<double>& sorted, double t) {
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
  return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

}  // namespace detail

// AUC restricted to the subgroup's own examples: separability inside the
// subgroup.
inline double subgroup_auc(const SubgroupPartition& p) {
  detail::require_nonempty(p.dg_neg, "subgroup_auc", "dg_neg");
  detail::require_nonempty(p.dg_pos, "subgroup_auc", "dg_pos");
  return auc(p.dg_neg, p.dg_pos);
}

// Background positives vs subgroup negatives. Low values mean subgroup
// negatives score above background positives: likely false positives for
// the subgroup at many thresholds.
inline double bpsn_auc(const SubgroupPartition& p) {
  detail::require_nonempty(p.dg_neg, "bpsn_auc", "dg_neg");
  detail::require_nonempty(p.d_pos, "bpsn_auc", "d_pos");
  return auc(p.dg_neg, p.d_pos);
}

// Background negatives vs subgroup positives. Low values predict false
// negatives for the subgroup.
inline double bnsp_auc(const SubgroupPartition& p) {
  detail::require_nonempty(p.d_neg, "bnsp_auc", "d_neg");
  detail::require_nonempty(p.dg_pos, "bnsp_auc", "dg_pos");
  return auc(p.d_neg, p.dg_pos);
}

// Average Equality Gap, closed form: 1/2 minus the probability that a
// background score of the chosen class exceeds a subgroup score of the same
// class. Positive values mean the subgroup's scores sit higher than the
// background's; the range is [-0.5, 0.5].
inline double aeg(const SubgroupPartition& p, ClassPolarity polarity) {
  const bool pos = polarity == ClassPolarity::kPositiveClass;
  const ScoreSample& bg = pos ? p.d_pos : p.d_neg;
  const ScoreSample& sg = pos ? p.dg_pos : p.dg_neg;
  const char* name = pos ? "positive_aeg" : "negative_aeg";
  detail::require_nonempty(bg, name, pos ? "d_pos" : "d_neg");
  detail::require_nonempty(sg, name, pos ? "dg_pos" : "dg_neg");
  const double u = mwu_u(bg, sg);
  return 0.5 - u / (static_cast<double>(bg.size()) * static_cast<double>(sg.size()));
}

// Empirical rate step curve over the merged distinct scores as thresholds,
// with -inf/+inf sentinel endpoints. Positive class: x,y are subgroup and
// background TPR P(score > t); negative class: TNR P(score <= t).
inline RateCurve rate_curve(const SubgroupPartition& p, ClassPolarity polarity) {
  const bool pos = polarity == ClassPolarity::kPositiveClass;
  const ScoreSample& bg = pos ? p.d_pos : p.d_neg;
  const ScoreSample& sg = pos ? p.dg_pos : p.dg_neg;
  const char* name = "rate_curve";
  detail::require_nonempty(bg, name, pos ? "d_pos" : "d_neg");
  detail::require_nonempty(sg, name, pos ? "dg_pos" : "dg_neg");
  detail::validate_sample(bg.scores, pos ? "d_pos" : "d_neg");
  detail::validate_sample(sg.scores, pos ? "dg_pos" : "dg_neg");

  std::vector<double> sbg = detail::sorted_copy(std::span<const double>(bg.scores));
  std::vector<double> ssg = detail::sorted_copy(std::span<const double>(sg.scores));

  std::vector<double> thresholds;
  thresholds.reserve(sbg.size() + ssg.size());
  std::merge(sbg.begin(), sbg.end(), ssg.begin(), ssg.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double n_bg = static_cast<double>(sbg.size());
  const double n_sg = static_cast<double>(ssg.size());
  const double inf = std::numeric_limits<double>::infinity();

  RateCurve curve;
  curve.polarity = polarity;
  curve.points.reserve(thresholds.size() + 2);

  // Rates at threshold t, walking t ascending. `ib`/`is` count scores <= t.
  auto rate = [pos](std::size_t at_or_below, double n) {
    const double below = static_cast<double>(at_or_below) / n;
    return pos ? 1.0 - below : below;
  };

  curve.points.push_back({-inf, pos ? 1.0 : 0.0, pos ? 1.0 : 0.0});
  std::size_t ib = 0, is = 0;
  for (double t : thresholds) {
    while (ib < sbg.size() && sbg[ib] <= t) ++ib;
    while (is < ssg.size() && ssg[is] <= t) ++is;
    curve.points.push_back({t, rate(is, n_sg), rate(ib, n_bg)});
  }
  curve.points.push_back({inf, pos ? 0.0 : 1.0, pos ? 0.0 : 1.0});
  return curve;
}

// Evaluates the step curve at an arbitrary finite threshold: the rates are
// constant between breakpoints, so this is the last breakpoint at or below t.
inline RateCurve::Point rates_at(const RateCurve& curve, double t) {
  detail::require_finite(t, "threshold");
  const auto it = std::upper_bound(
      curve.points.begin(), curve.points.end(), t,
      [](double value, const RateCurve::Point& pt) { return value < pt.threshold; });
  const RateCurve::Point& at = *(it - 1);  // first point is at -inf
  return {t, at.subgroup_rate, at.background_rate};
}

// AEG via its area definition: trapezoidal integral of (y - x) dx along the
// parametric curve (x(t), y(t)) traversed in ascending t. For the positive
// class x decreases along the traversal, which is what gives a rightward
// subgroup shift a positive sign, matching the closed form.
inline double aeg_by_integral(const SubgroupPartition& p, ClassPolarity polarity) {
  const RateCurve curve = rate_curve(p, polarity);
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < curve.points.size(); ++k) {
    const auto& a = curve.points[k];
    const auto& b = curve.points[k + 1];
    const double dx = b.subgroup_rate - a.subgroup_rate;
    const double mean_gap = 0.5 * ((a.background_rate - a.subgroup_rate) +
                                   (b.background_rate - b.subgroup_rate));
    area += mean_gap * dx;
  }
  return area;
}

// Rate difference subgroup minus background at a single threshold
// (TPR for the positive class, TNR for the negative class).
inline double equality_gap(const SubgroupPartition& p, ClassPolarity polarity, double t) {
  detail::require_finite(t, "threshold");
  const bool pos = polarity == ClassPolarity::kPositiveClass;
  const ScoreSample& bg = pos ? p.d_pos : p.d_neg;
  const ScoreSample& sg = pos ? p.dg_pos : p.dg_neg;
  const char* name = "equality_gap";
  detail::require_nonempty(bg, name, pos ? "d_pos" : "d_neg");
  detail::require_nonempty(sg, name, pos ? "dg_pos" : "dg_neg");
  detail::validate_sample(bg.scores, "background");
  detail::validate_sample(sg.scores, "subgroup");

  const std::vector<double> sbg = detail::sorted_copy(std::span<const double>(bg.scores));
  const std::vector<double> ssg = detail::sorted_copy(std::span<const double>(sg.scores));
  const double x = detail::frac_above(ssg, t);
  const double y = detail::frac_above(sbg, t);
  return pos ? x - y : (1.0 - x) - (1.0 - y);
}

// All five metrics plus counts in one pass. Never throws for empty samples;
// a metric is absent exactly when one of its two samples is empty.
inline BiasMetricsRow bias_suite(const SubgroupPartition& p) {
  BiasMetricsRow row;
  row.subgroup_id = p.subgroup_id;
  row.n_bg_neg = p.d_neg.size();
  row.n_bg_pos = p.d_pos.size();
  row.n_sg_neg = p.dg_neg.size();
  row.n_sg_pos = p.dg_pos.size();

  // One sort per sample, shared across the five pair statistics.
  const std::vector<double> d_neg = detail::sorted_copy(std::span<const double>(p.d_neg.scores));
  const std::vector<double> d_pos = detail::sorted_copy(std::span<const double>(p.d_pos.scores));
  const std::vector<double> dg_neg = detail::sorted_copy(std::span<const double>(p.dg_neg.scores));
  const std::vector<double> dg_pos = detail::sorted_copy(std::span<const double>(p.dg_pos.scores));

  if (!dg_neg.empty() && !dg_pos.empty()) {
    row.subgroup_auc = detail::auc_presorted(dg_neg, dg_pos);
  }
  if (!dg_neg.empty() && !d_pos.empty()) {
    row.bpsn_auc = detail::auc_presorted(dg_neg, d_pos);
  }
  if (!d_neg.empty() && !dg_pos.empty()) {
    row.bnsp_auc = detail::auc_presorted(d_neg, dg_pos);
  }
  if (!d_neg.empty() && !dg_neg.empty()) {
    row.negative_aeg = detail::aeg_presorted(d_neg, dg_neg);
  }
  if (!d_pos.empty() && !dg_pos.empty()) {
    row.positive_aeg = detail::aeg_presorted(d_pos, dg_pos);
  }
  return row;
}

}  // namespace biaseval
