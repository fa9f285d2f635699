#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "biaseval/metrics.hpp"
#include "biaseval/scenario.hpp"
#include "test_support.hpp"

using namespace biaseval;

namespace {

// Random partition with all four samples populated.
SubgroupPartition random_partition(Xoshiro256pp& rng, std::size_t max_n, int tie_grid) {
  SubgroupPartition p;
  p.subgroup_id = "r";
  auto draw = [&](ScoreSample& s) {
    s.scores = oracle::random_scores(rng, 1 + rng.next() % max_n, tie_grid);
  };
  draw(p.d_neg);
  draw(p.d_pos);
  draw(p.dg_neg);
  draw(p.dg_pos);
  return p;
}

SubgroupPartition map_scores(const SubgroupPartition& p, double (*f)(double)) {
  SubgroupPartition out = p;
  for (ScoreSample* s : {&out.d_neg, &out.d_pos, &out.dg_neg, &out.dg_pos}) {
    std::transform(s->scores.begin(), s->scores.end(), s->scores.begin(), f);
  }
  return out;
}

}  // namespace

TEST_CASE("partition routes by membership and label") {
  const auto data = fixtures::fix1_dataset();
  const auto p = partition(data, "g");
  CHECK(p.d_neg.size() == 3);
  CHECK(p.d_pos.size() == 2);
  CHECK(p.dg_neg.size() == 1);
  CHECK(p.dg_pos.size() == 2);
  CHECK(p.d_neg.size() + p.d_pos.size() + p.dg_neg.size() + p.dg_pos.size() == data.size());
}

TEST_CASE("partition with every example tagged leaves the background empty") {
  auto data = fixtures::fix1_dataset();
  for (auto& ex : data) ex.subgroups = {"g"};
  const auto p = partition(data, "g");
  CHECK(p.d_neg.empty());
  CHECK(p.d_pos.empty());
  CHECK(p.dg_neg.size() + p.dg_pos.size() == data.size());
}

TEST_CASE("partition on an unknown subgroup returns empty subgroup samples") {
  const auto p = partition(fixtures::fix1_dataset(), "nobody");
  CHECK(p.dg_neg.empty());
  CHECK(p.dg_pos.empty());
  CHECK(p.d_neg.size() + p.d_pos.size() == 8);
}

TEST_CASE("an example in several subgroups is background for the others") {
  auto data = fixtures::fix1_dataset();
  data[0].subgroups = {"g", "h"};  // bg-n1 now carries two tags
  const auto pg = partition(data, "g");
  CHECK(pg.dg_neg.size() == 2);  // 0.1 joins 0.65
  const auto ph = partition(data, "h");
  CHECK(ph.dg_neg.size() == 1);
  CHECK(ph.d_neg.size() + ph.d_pos.size() == 7);
}

TEST_CASE("partition rejects missing or non-finite scores") {
  auto data = fixtures::fix1_dataset();
  data[2].score.reset();
  CHECK_THROWS_AS(partition(data, "g"), NonFiniteScore);
  data[2].score = std::nan("");
  CHECK_THROWS_AS(partition(data, "g"), NonFiniteScore);
}

TEST_CASE("partition completeness: four samples disjoint by id and exhaustive") {
  Xoshiro256pp rng(41);
  std::vector<LabeledExample> data;
  for (int i = 0; i < 500; ++i) {
    LabeledExample ex;
    ex.id = "e" + std::to_string(i);
    ex.score = rng.uniform01();
    ex.label = (rng.next() & 1) ? BinaryLabel::kPositive : BinaryLabel::kNegative;
    if (rng.next() % 4 == 0) ex.subgroups = {"g"};
    data.push_back(std::move(ex));
  }
  const auto p = partition(data, "g");
  REQUIRE(p.d_neg.size() + p.d_pos.size() + p.dg_neg.size() + p.dg_pos.size() == data.size());
  std::size_t member = 0, positive = 0;
  for (const auto& ex : data) {
    member += ex.in_subgroup("g");
    positive += ex.label == BinaryLabel::kPositive;
  }
  CHECK(p.dg_neg.size() + p.dg_pos.size() == member);
  CHECK(p.d_pos.size() + p.dg_pos.size() == positive);
}

TEST_CASE("three bias AUCs on FIX1") {
  const auto p = fixtures::fix1_partition();
  CHECK(subgroup_auc(p) == 1.0);  // 0.65 below both 0.7 and 0.95
  CHECK(bpsn_auc(p) == 0.5);      // 0.65 splits {0.6, 0.8}
  CHECK(bnsp_auc(p) == 1.0);      // {0.7, 0.95} above {0.1, 0.2, 0.3}
}

TEST_CASE("AUC degenerate orderings") {
  SubgroupPartition p;
  p.dg_neg.scores = {0.4, 0.5};
  p.dg_pos.scores = {0.4, 0.5};
  CHECK(subgroup_auc(p) == 0.5);  // identical multisets
  p.dg_neg.scores = {0.8, 0.9};
  p.dg_pos.scores = {0.1, 0.2};
  CHECK(subgroup_auc(p) == 0.0);  // inverted

  p = SubgroupPartition{};
  p.d_pos.scores = {0.6, 0.8};
  p.dg_neg.scores = {0.1, 0.2};
  CHECK(bpsn_auc(p) == 1.0);
  p.dg_neg.scores = {0.9, 0.95};
  CHECK(bpsn_auc(p) == 0.0);

  p = SubgroupPartition{};
  p.d_neg.scores = {0.3, 0.4};
  p.dg_pos.scores = {0.3, 0.4};
  CHECK(bnsp_auc(p) == 0.5);
  p.dg_pos.scores = {0.1, 0.2};
  CHECK(bnsp_auc(p) == 0.0);
}

TEST_CASE("metric calls on empty samples raise MetricUndefined") {
  SubgroupPartition p;
  p.d_neg.scores = {0.1};
  p.d_pos.scores = {0.9};
  CHECK_THROWS_AS(subgroup_auc(p), MetricUndefined);
  CHECK_THROWS_AS(bpsn_auc(p), MetricUndefined);
  CHECK_THROWS_AS(bnsp_auc(p), MetricUndefined);
  CHECK_THROWS_AS(aeg(p, ClassPolarity::kPositiveClass), MetricUndefined);
  CHECK_THROWS_AS(rate_curve(p, ClassPolarity::kNegativeClass), MetricUndefined);
  try {
    subgroup_auc(p);
    FAIL("expected MetricUndefined");
  } catch (const MetricUndefined& e) {
    CHECK(e.metric() == "subgroup_auc");
    CHECK(e.missing_sample() == "dg_neg");
  }
}

TEST_CASE("aeg sign convention and FIX1 value") {
  const auto p = fixtures::fix1_partition();
  // Only 0.8 > 0.7 among the four positive pairs.
  CHECK(aeg(p, ClassPolarity::kPositiveClass) == 0.25);
  // Single subgroup negative 0.65 above the whole background {0.1,0.2,0.3}.
  CHECK(aeg(p, ClassPolarity::kNegativeClass) == 0.5);

  SubgroupPartition q;
  q.d_pos.scores = {0.1, 0.2, 0.3};
  q.dg_pos.scores = {0.5, 0.6};  // entirely above
  CHECK(aeg(q, ClassPolarity::kPositiveClass) == 0.5);
  q.dg_pos.scores = q.d_pos.scores;  // identical multisets
  CHECK(aeg(q, ClassPolarity::kPositiveClass) == 0.0);
  q.dg_pos.scores = {0.01, 0.02};  // entirely below
  CHECK(aeg(q, ClassPolarity::kPositiveClass) == -0.5);
}

TEST_CASE("aeg stays in [-0.5, 0.5]") {
  Xoshiro256pp rng(99);
  for (int round = 0; round < 200; ++round) {
    const auto p = random_partition(rng, 40, round % 2 ? 6 : 0);
    for (auto pol : {ClassPolarity::kPositiveClass, ClassPolarity::kNegativeClass}) {
      const double g = aeg(p, pol);
      REQUIRE(g >= -0.5);
      REQUIRE(g <= 0.5);
    }
  }
}

TEST_CASE("rate_curve on FIX1 positives") {
  const auto p = fixtures::fix1_partition();
  const auto curve = rate_curve(p, ClassPolarity::kPositiveClass);
  REQUIRE(curve.points.size() >= 2);
  CHECK(curve.points.front().threshold == -std::numeric_limits<double>::infinity());
  CHECK(curve.points.front().subgroup_rate == 1.0);
  CHECK(curve.points.front().background_rate == 1.0);
  CHECK(curve.points.back().threshold == std::numeric_limits<double>::infinity());
  CHECK(curve.points.back().subgroup_rate == 0.0);
  CHECK(curve.points.back().background_rate == 0.0);

  const auto at = rates_at(curve, 0.65);
  CHECK(at.subgroup_rate == 1.0);      // both 0.7 and 0.95 above
  CHECK(at.background_rate == 0.5);    // only 0.8 above

  // TPR curves are nonincreasing in t.
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    CHECK(curve.points[i].subgroup_rate >= curve.points[i + 1].subgroup_rate);
    CHECK(curve.points[i].background_rate >= curve.points[i + 1].background_rate);
  }
}

TEST_CASE("rate_curve with identical samples lies on the diagonal") {
  SubgroupPartition p;
  p.d_pos.scores = {0.2, 0.5, 0.5, 0.8};
  p.dg_pos.scores = p.d_pos.scores;
  const auto curve = rate_curve(p, ClassPolarity::kPositiveClass);
  for (const auto& pt : curve.points) {
    CHECK(pt.subgroup_rate == pt.background_rate);
  }
}

TEST_CASE("rate_curve single-point samples") {
  SubgroupPartition p;
  p.d_pos.scores = {0.6};
  p.dg_pos.scores = {0.9};
  const auto curve = rate_curve(p, ClassPolarity::kPositiveClass);
  for (double t : {0.6, 0.61, 0.75, 0.89}) {
    const auto at = rates_at(curve, t);
    CHECK(at.subgroup_rate == 1.0);
    CHECK(at.background_rate == 0.0);
  }
}

TEST_CASE("negative-class rate_curve is nondecreasing") {
  Xoshiro256pp rng(5);
  SubgroupPartition p;
  p.d_neg.scores = oracle::random_scores(rng, 50, 10);
  p.dg_neg.scores = oracle::random_scores(rng, 30, 10);
  const auto curve = rate_curve(p, ClassPolarity::kNegativeClass);
  CHECK(curve.points.front().subgroup_rate == 0.0);
  CHECK(curve.points.back().background_rate == 1.0);
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    CHECK(curve.points[i].subgroup_rate <= curve.points[i + 1].subgroup_rate);
    CHECK(curve.points[i].background_rate <= curve.points[i + 1].background_rate);
  }
}

TEST_CASE("aeg_by_integral matches the closed form") {
  SubgroupPartition p;
  p.d_pos.scores = {0.2, 0.4, 0.6};
  p.dg_pos.scores = p.d_pos.scores;
  CHECK(aeg_by_integral(p, ClassPolarity::kPositiveClass) == 0.0);

  p.dg_pos.scores = {0.7, 0.9};  // strictly above
  CHECK(aeg_by_integral(p, ClassPolarity::kPositiveClass) == 0.5);

  Xoshiro256pp rng(123);
  for (int round = 0; round < 100; ++round) {
    const auto q = random_partition(rng, 60, 0);  // tie-free w.p. 1
    for (auto pol : {ClassPolarity::kPositiveClass, ClassPolarity::kNegativeClass}) {
      REQUIRE_THAT(aeg_by_integral(q, pol),
                   Catch::Matchers::WithinAbs(aeg(q, pol), 1e-9));
    }
  }
  for (int round = 0; round < 100; ++round) {
    const auto q = random_partition(rng, 60, 7);  // heavy ties
    for (auto pol : {ClassPolarity::kPositiveClass, ClassPolarity::kNegativeClass}) {
      REQUIRE_THAT(aeg_by_integral(q, pol),
                   Catch::Matchers::WithinAbs(aeg(q, pol), 1e-6));
    }
  }
}

TEST_CASE("equality_gap examples") {
  const auto p = fixtures::fix1_partition();
  CHECK(equality_gap(p, ClassPolarity::kPositiveClass, 0.65) == 0.5);
  CHECK(equality_gap(p, ClassPolarity::kPositiveClass, 2.0) == 0.0);

  SubgroupPartition q;
  q.d_pos.scores = {0.2, 0.5, 0.9};
  q.dg_pos.scores = q.d_pos.scores;
  for (double t : {0.0, 0.2, 0.5, 0.7, 1.0}) {
    CHECK(equality_gap(q, ClassPolarity::kPositiveClass, t) == 0.0);
  }
  CHECK_THROWS_AS(equality_gap(q, ClassPolarity::kPositiveClass, std::nan("")),
                  NonFiniteScore);
}

TEST_CASE("identity case: subgroup copying the background zeroes the AEG") {
  Xoshiro256pp rng(2024);
  SubgroupPartition p;
  p.d_neg.scores = oracle::random_scores(rng, 70, 9);
  p.d_pos.scores = oracle::random_scores(rng, 55, 9);
  p.dg_neg.scores = p.d_neg.scores;
  p.dg_pos.scores = p.d_pos.scores;
  CHECK(aeg(p, ClassPolarity::kPositiveClass) == 0.0);
  CHECK(aeg(p, ClassPolarity::kNegativeClass) == 0.0);
  std::vector<double> thresholds = p.d_pos.scores;
  thresholds.insert(thresholds.end(), p.d_neg.scores.begin(), p.d_neg.scores.end());
  for (double t : thresholds) {
    CHECK(equality_gap(p, ClassPolarity::kPositiveClass, t) == 0.0);
    CHECK(equality_gap(p, ClassPolarity::kNegativeClass, t) == 0.0);
  }
}

TEST_CASE("monotone score maps leave every metric bit-identical") {
  Xoshiro256pp rng(77);
  auto cube = [](double x) { return x * x * x; };
  auto logistic = [](double x) { return 1.0 / (1.0 + std::exp(-(8.0 * x - 4.0))); };
  for (int round = 0; round < 20; ++round) {
    const auto p = random_partition(rng, 50, round % 2 ? 12 : 0);
    const auto before = bias_suite(p);
    for (auto* f : {+cube, +logistic}) {
      const auto after = bias_suite(map_scores(p, f));
      REQUIRE(after.subgroup_auc == before.subgroup_auc);
      REQUIRE(after.bpsn_auc == before.bpsn_auc);
      REQUIRE(after.bnsp_auc == before.bnsp_auc);
      REQUIRE(after.negative_aeg == before.negative_aeg);
      REQUIRE(after.positive_aeg == before.positive_aeg);
    }
  }
}

TEST_CASE("duplicating background positives changes nothing") {
  const auto p = fixtures::fix1_partition();
  for (int k : {2, 5, 17}) {
    SubgroupPartition dup = p;
    dup.d_pos.scores.clear();
    for (int i = 0; i < k; ++i) {
      dup.d_pos.scores.insert(dup.d_pos.scores.end(), p.d_pos.scores.begin(),
                              p.d_pos.scores.end());
    }
    CHECK(subgroup_auc(dup) == subgroup_auc(p));
    CHECK(bpsn_auc(dup) == bpsn_auc(p));
    CHECK(aeg(dup, ClassPolarity::kPositiveClass) == aeg(p, ClassPolarity::kPositiveClass));
  }
}

TEST_CASE("bias_suite on FIX1") {
  const auto row = bias_suite(fixtures::fix1_partition());
  CHECK(row.subgroup_id == "g");
  CHECK(row.n_bg_neg == 3);
  CHECK(row.n_bg_pos == 2);
  CHECK(row.n_sg_neg == 1);
  CHECK(row.n_sg_pos == 2);
  REQUIRE(row.subgroup_auc.has_value());
  CHECK(*row.subgroup_auc == 1.0);
  CHECK(*row.bpsn_auc == 0.5);
  CHECK(*row.bnsp_auc == 1.0);
  CHECK(*row.negative_aeg == 0.5);
  CHECK(*row.positive_aeg == 0.25);
}

TEST_CASE("bias_suite absence rules") {
  SubgroupPartition p = fixtures::fix1_partition();
  p.dg_pos.scores.clear();
  const auto row = bias_suite(p);
  CHECK_FALSE(row.subgroup_auc.has_value());
  CHECK_FALSE(row.bnsp_auc.has_value());
  CHECK_FALSE(row.positive_aeg.has_value());
  CHECK(row.bpsn_auc.has_value());
  CHECK(row.negative_aeg.has_value());
  CHECK(row.n_sg_pos == 0);

  const auto empty_row = bias_suite(SubgroupPartition{});
  CHECK_FALSE(empty_row.subgroup_auc.has_value());
  CHECK_FALSE(empty_row.bpsn_auc.has_value());
  CHECK_FALSE(empty_row.bnsp_auc.has_value());
  CHECK_FALSE(empty_row.negative_aeg.has_value());
  CHECK_FALSE(empty_row.positive_aeg.has_value());
}

TEST_CASE("subgroup matching the background distribution scores like it") {
  // Subgroup drawn from the same components as the background: AEGs near 0,
  // all three AUCs near the overall AUC.
  ScenarioSpec spec;
  spec.bg_neg = {0.3, 0.12, 0.0, 1.0};
  spec.bg_pos = {0.7, 0.12, 0.0, 1.0};
  spec.sg_neg = spec.bg_neg;
  spec.sg_pos = spec.bg_pos;
  spec.n_bg_neg = 40000;
  spec.n_bg_pos = 40000;
  spec.n_sg_neg = 10000;
  spec.n_sg_pos = 10000;
  const auto data = sample_scenario(spec, 31337);
  const auto p = partition(data, kSyntheticSubgroup);
  const auto row = bias_suite(p);

  ScoreSample all_neg = p.d_neg;
  all_neg.scores.insert(all_neg.scores.end(), p.dg_neg.scores.begin(), p.dg_neg.scores.end());
  ScoreSample all_pos = p.d_pos;
  all_pos.scores.insert(all_pos.scores.end(), p.dg_pos.scores.begin(), p.dg_pos.scores.end());
  const double overall = auc(all_neg, all_pos);

  CHECK_THAT(*row.negative_aeg, Catch::Matchers::WithinAbs(0.0, 0.02));
  CHECK_THAT(*row.positive_aeg, Catch::Matchers::WithinAbs(0.0, 0.02));
  CHECK_THAT(*row.subgroup_auc, Catch::Matchers::WithinAbs(overall, 0.02));
  CHECK_THAT(*row.bpsn_auc, Catch::Matchers::WithinAbs(overall, 0.02));
  CHECK_THAT(*row.bnsp_auc, Catch::Matchers::WithinAbs(overall, 0.02));
}
