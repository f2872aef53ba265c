#include <random>

#include <gtest/gtest.h>

#include "repe/purify.hpp"
#include "toy_fixture.hpp"

using namespace repe;

namespace {

ConceptVector cv(Factor f, std::initializer_list<double> xs, std::size_t layer = 0) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return {f, layer, v, 1, ""};
}

Vec random_vec(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n;
  Vec v(d);
  for (auto& x : v) x = n(rng);
  return v;
}

} // namespace

TEST(ConfounderBasis, OrthonormalOnRandomInputs) {
  std::mt19937_64 rng(0);
  for (int t = 0; t < 50; ++t) {
    std::vector<Vec> vs{random_vec(rng, 16), random_vec(rng, 16), random_vec(rng, 16)};
    const Mat u = confounder_basis(vs);
    ASSERT_EQ(u.cols(), 3);
    EXPECT_LE((u.transpose() * u - Mat::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
    // Spans the inputs.
    for (const auto& v : vs) EXPECT_LE((v - u * (u.transpose() * v)).norm(), 1e-10);
  }
}

TEST(ConfounderBasis, RankCollapse) {
  std::mt19937_64 rng(1);
  const Vec a = random_vec(rng, 8);
  std::vector<Vec> vs{a, -2.0 * a};
  EXPECT_EQ(confounder_basis(vs).cols(), 1);
  std::vector<Vec> zeros{Vec::Zero(8)};
  EXPECT_THROW(confounder_basis(zeros), Error);
}

TEST(Orthogonalize, WorkedExample) {
  const double r = 1.0 / std::sqrt(2.0);
  const auto p = orthogonalize(cv(Factor::superiority, {r, r}), std::vector{cv(Factor::relevance, {1, 0})});
  EXPECT_NEAR(p.direction[0], 0.0, 1e-15);
  EXPECT_NEAR(p.direction[1], 1.0, 1e-15);
  EXPECT_NEAR(p.residual_norm_before_renorm, r, 1e-15);
  EXPECT_EQ(p.confounders, std::vector<Factor>{Factor::relevance});
}

TEST(Orthogonalize, AlreadyOrthogonalIsFixedPoint) {
  const auto p = orthogonalize(cv(Factor::superiority, {0, 0, 1}), std::vector{cv(Factor::relevance, {1, 0, 0}), cv(Factor::weekday, {0, 1, 0})});
  EXPECT_EQ(p.direction, cv(Factor::superiority, {0, 0, 1}).direction);
  const auto none = orthogonalize(cv(Factor::superiority, {0.6, 0.8}), {});
  EXPECT_EQ(none.direction, cv(Factor::superiority, {0.6, 0.8}).direction);
}

TEST(Orthogonalize, IdempotentAndOrderInvariant) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const ConceptVector target{Factor::superiority, 0, random_vec(rng, 12).normalized(), 1, ""};
    const ConceptVector a{Factor::relevance, 0, random_vec(rng, 12).normalized(), 1, ""};
    const ConceptVector b{Factor::weekday, 0, random_vec(rng, 12).normalized(), 1, ""};
    const auto p1 = orthogonalize(target, std::vector{a, b});
    const auto p2 = orthogonalize(target, std::vector{b, a});
    EXPECT_LE((p1.direction - p2.direction).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(p1.confounders, p2.confounders);
    const auto again = orthogonalize({Factor::superiority, 0, p1.direction, 1, ""}, std::vector{a, b});
    EXPECT_LE((again.direction - p1.direction).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(again.residual_norm_before_renorm, 1.0, 1e-12);
    EXPECT_LE(std::abs(p1.direction.dot(a.direction)), 1e-12);
    EXPECT_LE(std::abs(p1.direction.dot(b.direction)), 1e-12);
  }
}

TEST(Orthogonalize, TargetInsideSpanIsDegenerate) {
  try {
    orthogonalize(cv(Factor::superiority, {1, 1, 0}), std::vector{cv(Factor::relevance, {1, 0, 0}), cv(Factor::weekday, {0, 1, 0})});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate);
  }
}

TEST(Orthogonalize, Preconditions) {
  EXPECT_THROW(orthogonalize(cv(Factor::superiority, {1, 0}), std::vector{cv(Factor::superiority, {0, 1})}), Error);
  EXPECT_THROW(orthogonalize(cv(Factor::superiority, {1, 0}), std::vector{cv(Factor::relevance, {0, 1}, 3)}), Error);
  EXPECT_THROW(orthogonalize(cv(Factor::superiority, {1, 0}), std::vector{cv(Factor::relevance, {0, 1, 0})}), Error);
}

TEST(ConfoundersOf, OtherAntecedentsOnly) {
  EXPECT_EQ(confounders_of(Factor::superiority), (std::vector<Factor>{Factor::relevance, Factor::weekday}));
  EXPECT_EQ(confounders_of(Factor::relevance), (std::vector<Factor>{Factor::superiority, Factor::weekday}));
  EXPECT_EQ(confounders_of(Factor::weekday), (std::vector<Factor>{Factor::superiority, Factor::relevance}));
  for (Factor f : antecedent_factors)
    for (Factor c : confounders_of(f)) EXPECT_NE(c, Factor::jealousy);
}

TEST(PurifyBundle, ToyVectorsStayOnTheirAxesAndLoseConfounders) {
  const toy::ToyModel m(toy::ToyModelConfig{});
  VectorBundle raw;
  raw.dim = 64;
  for (Factor f : antecedent_factors) {
    const auto tp = testkit::toy_pairs(m, f, 200, 5);
    for (const auto& c : fit_concept_vectors(tp.set, tp.rows, f, "h")) raw.entries.push_back(to_bundle_entry(c));
  }
  const auto out = purify_bundle(raw);
  EXPECT_EQ(out.bundle.kind, "purified");
  EXPECT_TRUE(out.failures.empty());
  EXPECT_EQ(out.bundle.entries.size(), 39u);
  for (const auto& e : out.bundle.entries) {
    for (Factor c : confounders_of(e.factor)) EXPECT_LE(std::abs(e.direction.dot(raw.at(c, e.layer).direction)), 1e-6);
    if (e.layer >= 2) {
      EXPECT_GE(e.direction.dot(m.concept_axis(e.factor, e.layer)), 0.95) << factor_name(e.factor) << "@" << e.layer;
    }
    EXPECT_NEAR(e.direction.norm(), 1.0, 1e-12);
  }
}

TEST(PurifyBundle, MissingConfounderSkipsLayer) {
  VectorBundle raw;
  raw.dim = 3;
  for (auto c : {cv(Factor::superiority, {1, 0, 0}, 2), cv(Factor::relevance, {0, 1, 0}, 2)}) raw.entries.push_back(to_bundle_entry(c));
  const auto out = purify_bundle(raw);
  EXPECT_TRUE(out.bundle.entries.empty());
  EXPECT_EQ(out.failures.size(), 3u);
}
