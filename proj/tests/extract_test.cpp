#include <random>

#include <gtest/gtest.h>

#include "repe/extract.hpp"
#include "toy_fixture.hpp"

using namespace repe;
using repe::testkit::noiseless;
using repe::testkit::toy_pairs;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

} // namespace

TEST(Lat, WrapsScenarioBetweenPrefixAndSuffix) {
  const auto t = lat_template(Factor::superiority);
  const auto s = wrap_lat(t, "  Mike   got\nthe  role. ");
  EXPECT_EQ(s, t.prefix + "Mike got the role." + t.suffix);
  EXPECT_TRUE(s.ends_with("The level of advantage is"));
}

TEST(Lat, EveryFactorHasAFrame) {
  for (Factor f : all_factors) {
    const auto t = lat_template(f);
    EXPECT_FALSE(t.prefix.empty());
    EXPECT_FALSE(t.suffix.empty());
    EXPECT_NE(t.suffix.back(), '.');
  }
}

TEST(Lat, EmptyAndDoubleWrapRejected) {
  const auto t = lat_template(Factor::relevance);
  EXPECT_THROW(wrap_lat(t, " \n\t"), Error);
  EXPECT_THROW(wrap_lat(t, wrap_lat(t, "A day at the rink.")), Error);
}

TEST(MeanDifference, WorkedExamples) {
  const std::vector<std::pair<Vec, Vec>> one{{v2(1, 0), v2(0, 0)}};
  EXPECT_EQ(mean_difference(one), v2(1, 0));
  const std::vector<std::pair<Vec, Vec>> two{{v2(2, 1), v2(0, 1)}, {v2(1, 3), v2(1, 1)}};
  EXPECT_EQ(mean_difference(two), v2(1, 1));
  EXPECT_THROW(mean_difference(std::vector<std::pair<Vec, Vec>>{}), Error);
}

TEST(MeanDifference, LinearAndSwapNegates) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  std::vector<std::pair<Vec, Vec>> p, swapped, scaled;
  for (int i = 0; i < 30; ++i) {
    Vec a(6), b(6);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    p.emplace_back(a, b);
    swapped.emplace_back(b, a);
    scaled.emplace_back(2.5 * a, 2.5 * b);
  }
  EXPECT_LE((mean_difference(swapped) + mean_difference(p)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((mean_difference(scaled) - 2.5 * mean_difference(p)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalize, UnitAndDegenerate) {
  const Vec u = normalize(v2(3, 4));
  EXPECT_NEAR(u[0], 0.6, 1e-15);
  EXPECT_NEAR(u[1], 0.8, 1e-15);
  try {
    normalize(v2(0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate);
  }
}

TEST(ProjectionAccuracy, WorkedExamplesAndTies) {
  const Vec dir = v2(1, 0);
  const std::vector<std::pair<Vec, Vec>> pairs{
      {v2(1, 0), v2(0, 0)},   // hit
      {v2(0, 5), v2(1, 0)},   // miss
      {v2(2, 0), v2(2, 9)},   // tie: fails
      {v2(-1, 0), v2(-3, 0)}, // hit
  };
  EXPECT_DOUBLE_EQ(projection_accuracy(dir, pairs), 0.5);
  EXPECT_DOUBLE_EQ(projection_accuracy(Vec::Zero(2), pairs), 0.0);
}

TEST(ToyExtraction, NoiselessMeanDifferenceIsThePlantedAxis) {
  const toy::ToyModel m(noiseless());
  for (Factor f : antecedent_factors) {
    const auto tp = toy_pairs(m, f, 40, 0);
    for (std::size_t l = 1; l < m.n_states(); ++l) {
      const auto d = normalize(mean_difference(layer_pairs(select_layer(tp.set, l), tp.rows)));
      // The ACF store holds floats, so agreement is float-limited.
      EXPECT_NEAR(d.dot(m.concept_axis(f, l)), 1.0, 1e-6) << factor_name(f) << "@" << l;
    }
  }
}

TEST(LayerScan, NoiselessIsPerfectWhereSignalExists) {
  const toy::ToyModel m(noiseless());
  const auto tp = toy_pairs(m, Factor::relevance, 50, 1);
  const auto rep = kfold_layer_scan(tp.set, tp.rows, tp.folds, Factor::relevance);
  ASSERT_EQ(rep.mean_accuracy.size(), 13u);
  ASSERT_EQ(rep.fold_accuracy[3].size(), 5u);
  EXPECT_EQ(rep.mean_accuracy[0], 0.0); // zero difference everywhere: all ties
  for (std::size_t l = 1; l < 13; ++l) EXPECT_EQ(rep.mean_accuracy[l], 1.0) << l;
  ASSERT_TRUE(rep.stable_range.has_value());
  EXPECT_EQ(*rep.stable_range, (std::pair<std::size_t, std::size_t>{1, 12}));
}

TEST(LayerScan, NoisyToySeparatesEarlyFromMature) {
  const toy::ToyModel m(toy::ToyModelConfig{});
  const auto tp = toy_pairs(m, Factor::superiority, 200, 2);
  const auto rep = kfold_layer_scan(tp.set, tp.rows, tp.folds, Factor::superiority);
  EXPECT_NEAR(rep.mean_accuracy[0], 0.5, 0.1);
  for (std::size_t l = 4; l < 13; ++l) EXPECT_GE(rep.mean_accuracy[l], 0.95) << l;
}

TEST(LayerScan, ShuffledLabelsFallToChance) {
  const toy::ToyModel m(toy::ToyModelConfig{});
  auto tp = toy_pairs(m, Factor::superiority, 200, 3);
  std::mt19937_64 rng(3);
  for (auto& r : tp.rows)
    if (rng() & 1) std::swap(r.pos, r.neg);
  const auto rep = kfold_layer_scan(tp.set, tp.rows, tp.folds, Factor::superiority);
  for (std::size_t l = 6; l < 13; ++l) EXPECT_NEAR(rep.mean_accuracy[l], 0.5, 0.15) << l;
}

TEST(LayerScan, FoldsMustCoverRows) {
  const toy::ToyModel m(noiseless());
  auto tp = toy_pairs(m, Factor::weekday, 10, 0);
  tp.folds.fold_of.erase(tp.rows.front().pair_id);
  EXPECT_THROW(kfold_layer_scan(tp.set, tp.rows, tp.folds, Factor::weekday), Error);
}

TEST(Transfer, DiagonalEqualsFullFitAccuracy) {
  const toy::ToyModel m(toy::ToyModelConfig{});
  const auto tp = toy_pairs(m, Factor::relevance, 200, 4);
  const Mat t = cross_layer_transfer(tp.set, tp.rows);
  ASSERT_EQ(t.rows(), 13);
  for (std::size_t l = 1; l < 13; ++l) {
    const auto pairs = layer_pairs(select_layer(tp.set, l), tp.rows);
    EXPECT_DOUBLE_EQ(t(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(l)),
                     projection_accuracy(normalize(mean_difference(pairs)), pairs));
  }
  // Every block applies a fresh rotation, and matched pairs share almost all
  // their noise, so off-diagonal accuracy follows the sign of the cosine
  // between the layer-i fit and the layer-j axis.
  std::size_t checked = 0;
  for (std::size_t i = 2; i < 13; ++i) {
    const Vec di = normalize(mean_difference(layer_pairs(select_layer(tp.set, i), tp.rows)));
    for (std::size_t j = 2; j < 13; ++j) {
      const double c = di.dot(m.concept_axis(Factor::relevance, j));
      if (i == j || std::abs(c) < 0.2) continue;
      const double a = t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (c > 0) EXPECT_GE(a, 0.9) << i << "->" << j;
      else EXPECT_LE(a, 0.1) << i << "->" << j;
      ++checked;
    }
  }
  EXPECT_GT(checked, 0u);
}

TEST(LongestRun, PicksLongestAndRespectsMinimum) {
  const std::vector<double> a{0.5, 0.95, 0.96, 0.2, 0.91, 0.92, 0.93, 0.94, 0.1};
  auto r = longest_run(a, 0.9, 3);
  ASSERT_TRUE(r);
  EXPECT_EQ(*r, (std::pair<std::size_t, std::size_t>{4, 7}));
  EXPECT_FALSE(longest_run(a, 0.9, 5).has_value());
  const std::vector<double> tail{0.1, 0.9, 0.9, 0.9};
  EXPECT_EQ(*longest_run(tail, 0.9, 3), (std::pair<std::size_t, std::size_t>{1, 3}));
}

TEST(FitVectors, DegenerateLayersReportedNotFatal) {
  const toy::ToyModel m(noiseless());
  const auto tp = toy_pairs(m, Factor::weekday, 20, 0);
  std::vector<std::size_t> degenerate;
  const auto cvs = fit_concept_vectors(tp.set, tp.rows, Factor::weekday, "h", &degenerate);
  EXPECT_EQ(degenerate, std::vector<std::size_t>{0});
  EXPECT_EQ(cvs.size(), 12u);
  for (const auto& cv : cvs) {
    EXPECT_NEAR(cv.direction.norm(), 1.0, 1e-12);
    EXPECT_EQ(cv.n_pairs_used, 20u);
    const auto back = from_bundle_entry(to_bundle_entry(cv));
    EXPECT_EQ(back.direction, cv.direction);
    EXPECT_EQ(back.layer, cv.layer);
  }
}
