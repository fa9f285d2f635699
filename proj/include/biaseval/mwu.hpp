#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "biaseval/errors.hpp"
#include "biaseval/types.hpp"

namespace biaseval {

namespace detail {

inline void validate_sample(std::span<const double> s, const char* which) {
  if (s.empty()) throw EmptySample(which);
  for (double v : s) {
    if (!std::isfinite(v)) {
      throw NonFiniteScore(std::string("sample ") + which + " contains a NaN or infinite score");
    }
  }
}

// U(a, b) over two ascending-sorted samples. Counts 2 per strictly greater
// pair and 1 per tie, so the accumulator stays integral; with sample sizes
// up to a few million the doubled count is far below 2^53 and the final
// halving is exact in double precision.
inline double mwu_u_presorted(std::span<const double> a, std::span<const double> b) {
  std::uint64_t twice_u = 0;
  std::size_t i = 0;
  std::size_t below = 0;  // elements of b strictly below the current a value
  while (i < a.size()) {
    const double v = a[i];
    while (below < b.size() && b[below] < v) ++below;
    std::size_t tied = below;
    while (tied < b.size() && b[tied] == v) ++tied;

    std::size_t run = i + 1;
    while (run < a.size() && a[run] == v) ++run;

    twice_u += static_cast<std::uint64_t>(run - i) *
               (2 * static_cast<std::uint64_t>(below) +
                static_cast<std::uint64_t>(tied - below));
    i = run;
  }
  return static_cast<double>(twice_u) / 2.0;
}

inline std::vector<double> sorted_copy(std::span<const double> s) {
  std::vector<double> out(s.begin(), s.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Mann-Whitney U statistic U(a, b): the number of pairs (s in a, t in b)
// with s > t, ties counting one half. Merged-rank evaluation, O((n+m) log(n+m)),
// exactly equal to pairwise enumeration.
inline double mwu_u(std::span<const double> a, std::span<const double> b) {
  detail::validate_sample(a, "a");
  detail::validate_sample(b, "b");
  const std::vector<double> sa = detail::sorted_copy(a);
  const std::vector<double> sb = detail::sorted_copy(b);
  return detail::mwu_u_presorted(sa, sb);
}

inline double mwu_u(const ScoreSample& a, const ScoreSample& b) {
  return mwu_u(std::span<const double>(a.scores), std::span<const double>(b.scores));
}

// ROC AUC as the pair-probability that a positive outranks a negative,
// half weight for ties. Equals the trapezoidal area under the empirical ROC.
inline double auc(std::span<const double> neg, std::span<const double> pos) {
  detail::validate_sample(neg, "neg");
  detail::validate_sample(pos, "pos");
  const double u = mwu_u(pos, neg);
  return u / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline double auc(const ScoreSample& neg, const ScoreSample& pos) {
  return auc(std::span<const double>(neg.scores), std::span<const double>(pos.scores));
}

}  // namespace biaseval
