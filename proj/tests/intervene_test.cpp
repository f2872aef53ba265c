#include <random>

#include <gtest/gtest.h>

#include "repe/intervene.hpp"
#include "toy_fixture.hpp"

using namespace repe;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec random_unit(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> g;
  Vec v(d);
  for (auto& x : v) x = g(rng);
  return v.normalized();
}

// Independent readout inverse: score = 1 + 4 sigmoid(logit).
double logit_of(double score) { return std::log((score - 1.0) / (5.0 - score)); }
double score_of(double logit) { return 1.0 + 4.0 / (1.0 + std::exp(-logit)); }

struct ToySetup {
  toy::ToyModel model{toy::ToyModelConfig{}};
  std::vector<Vignette> vig = fill_templates(default_template_bank(), {}, 0);
  toy::ToyBackend backend{model, vig, 0};
  VectorBundle planted = testkit::planted_bundle(model);

  Partition partition() const {
    std::vector<BaselineItem> items;
    std::map<std::string, double> scores;
    for (const auto& v : vig) {
      items.push_back({v.vignette_id, v.jealousy_gt});
      scores[v.vignette_id] = backend.baseline_score(v.vignette_id);
    }
    return partition_baseline(items, scores);
  }
};

// Backend with a fixed linear score and hooks only at some layers.
struct FakeBackend {
  std::size_t n_states() const { return 3; }
  std::size_t dim() const { return 2; }
  bool has_hook(std::size_t l) const { return l == 1 || l == 2; }
  Vec hidden_state(const std::string& id, std::size_t) const { return id == "lo" ? v2(-1, 0) : v2(1, 0); }
  double baseline_score(const std::string& id) const { return score_from(id, 2, hidden_state(id, 2)); }
  double score_from(const std::string&, std::size_t layer, const Vec& h) const {
    return std::clamp(3.0 + (layer == 2 ? 1.0 : 0.5) * h[0], 1.0, 5.0);
  }
};
static_assert(InterventionBackend<FakeBackend>);
static_assert(InterventionBackend<toy::ToyBackend>);

} // namespace

TEST(Steer, WorkedExamples) {
  const Vec e1 = v2(1, 0);
  EXPECT_EQ(steer(v2(0, 0), e1, 15, +1), v2(15, 0));
  EXPECT_EQ(steer(v2(0, 0), e1, 15, -1), v2(-15, 0));
  EXPECT_EQ(knockout(v2(3, 4), e1), v2(0, 4));
  EXPECT_THROW(steer(v2(0, 0), v2(2, 0), 1, +1), Error);
  EXPECT_THROW(knockout(v2(0, 0), v2(0.5, 0)), Error);
  EXPECT_THROW(steer(v2(0, 0), e1, 1, 0), Error);
}

TEST(Steer, ZeroAlphaIsBitExactAndStepsInvert) {
  std::mt19937_64 rng(0);
  std::normal_distribution<double> g(0, 10);
  for (int t = 0; t < 100; ++t) {
    const Vec d = random_unit(rng, 32);
    Vec h(32);
    for (auto& x : h) x = g(rng);
    const Vec same = steer(h, d, 0.0, +1);
    EXPECT_EQ(std::memcmp(same.data(), h.data(), sizeof(double) * 32), 0);
    EXPECT_LE((steer(steer(h, d, 7.5, +1), d, 7.5, -1) - h).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Knockout, OrthogonalAndIdempotent) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0, 5);
  for (int t = 0; t < 100; ++t) {
    const Vec d = random_unit(rng, 64);
    Vec h(64);
    for (auto& x : h) x = g(rng);
    const Vec k = knockout(h, d);
    EXPECT_LE(std::abs(k.dot(d)), 1e-9);
    EXPECT_LE((knockout(k, d) - k).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Modes, NamesRoundTrip) {
  for (SteerMode m : all_modes) EXPECT_EQ(parse_mode(mode_name(m)), m);
  EXPECT_FALSE(parse_mode("amplify").has_value());
  SteeringConfig c;
  c.alpha = -1;
  EXPECT_THROW(validate(c), Error);
  EXPECT_EQ(default_alpha_table().at("toy"), 3.0);
  EXPECT_EQ(default_alpha_table().at("llama"), 15.0);
  EXPECT_EQ(default_alpha_table().at("gemma"), 3000.0);
}

TEST(Partition, ThresholdExcludedFromBothGroups) {
  const std::vector<BaselineItem> items{{"a", 1}, {"b", 2}, {"c", 5}, {"d", 5}, {"e", 1}, {"f", 5}, {"g", 2}};
  const std::map<std::string, double> scores{{"a", 1.2}, {"b", 2.5}, {"c", 4.9}, {"d", 2.5}, {"e", 3.1}, {"f", 2.6}, {"g", 2.49}};
  const auto p = partition_baseline(items, scores);
  EXPECT_EQ(p.low, (std::vector<std::string>{"a", "g"}));
  EXPECT_EQ(p.high, (std::vector<std::string>{"c", "f"}));
  EXPECT_FALSE(p.empty_warning);
  const std::map<std::string, double> all_low{{"a", 1}, {"b", 1}, {"c", 1}, {"d", 1}, {"e", 1}, {"f", 1}, {"g", 1}};
  EXPECT_TRUE(partition_baseline(items, all_low).empty_warning);
  EXPECT_THROW(partition_baseline(items, {{"a", 1}}), Error);
}

TEST(DeltaPercent, QuarterScale) {
  EXPECT_DOUBLE_EQ(delta_percent(1.0), 25.0);
  EXPECT_DOUBLE_EQ(delta_percent(-4.0), -100.0);
}

TEST(ApplyAndScore, ClosedFormSigmoidShiftOnToy) {
  const ToySetup s;
  const double kappa = 4.0, a_sup = 1.0, a_rel = 1.5;
  for (const auto& v : s.vig) {
    for (std::size_t layer : {0u, 5u, 12u}) {
      for (double alpha : {0.5, 1.0, 3.0}) {
        SteeringConfig c{alpha, SteerMode::stimulate, layer, Factor::superiority, Positions::all};
        auto r = apply_and_score(s.backend, v.vignette_id, c, s.planted);
        EXPECT_NEAR(r.s_post, score_of(logit_of(r.s_pre) + kappa * a_sup * alpha), 1e-6) << v.vignette_id;
        c.factor = Factor::relevance;
        c.mode = SteerMode::suppress;
        r = apply_and_score(s.backend, v.vignette_id, c, s.planted);
        EXPECT_NEAR(r.s_post, score_of(logit_of(r.s_pre) - kappa * a_rel * alpha), 1e-6);
        EXPECT_NEAR(r.delta_pct, 25.0 * r.delta, 1e-12);
        c.factor = Factor::weekday;
        r = apply_and_score(s.backend, v.vignette_id, c, s.planted);
        EXPECT_LE(std::abs(r.delta), 1e-9);
      }
    }
    break;
  }
}

TEST(ApplyAndScore, ScoresStayOnScaleAndAlphaZeroIsExact) {
  const ToySetup s;
  for (const auto& v : s.vig) {
    for (double alpha : {0.0, 50.0}) {
      for (SteerMode m : all_modes) {
        const SteeringConfig c{alpha, m, 6, Factor::relevance, Positions::all};
        const auto r = apply_and_score(s.backend, v.vignette_id, c, s.planted);
        EXPECT_GE(r.s_post, 1.0);
        EXPECT_LE(r.s_post, 5.0);
        EXPECT_EQ(r.s_pre, s.backend.baseline_score(v.vignette_id));
        if (alpha == 0.0 && m != SteerMode::knockout) EXPECT_EQ(r.s_post, r.s_pre);
      }
    }
  }
}

TEST(ApplyAndScore, KnockoutOfSuperiorityLowersHighJealousy) {
  const ToySetup s;
  for (const auto& v : s.vig) {
    if (!(v.sup && v.rel)) continue;
    const SteeringConfig c{0, SteerMode::knockout, 12, Factor::superiority, Positions::all};
    EXPECT_LT(apply_and_score(s.backend, v.vignette_id, c, s.planted).delta, 0.0) << v.vignette_id;
  }
}

TEST(ApplyAndScore, MissingHookIsBackendUnavailable) {
  const FakeBackend b;
  const SteeringConfig c{1.0, SteerMode::stimulate, 0, Factor::superiority, Positions::all};
  try {
    apply_and_score(b, "lo", c, v2(1, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::backend_unavailable);
  }
  EXPECT_THROW(apply_and_score(b, "lo", SteeringConfig{1.0, SteerMode::stimulate, 2, Factor::superiority, Positions::all}, Vec::Ones(3).normalized()),
               Error);
}

TEST(Scan, CellsMatchPerRecordAggregate) {
  const ToySetup s;
  const auto part = s.partition();
  ASSERT_FALSE(part.empty_warning);
  ScanRequest req;
  req.layers = {7};
  req.alphas = {3.0, 1.0};
  const auto scan = layer_intervention_scan(s.backend, part, s.planted, req);
  // 3 factors x (2 stimulate + 2 suppress + 1 knockout)
  EXPECT_EQ(scan.cells.size(), 15u);
  EXPECT_EQ(scan.gate_alpha, 3.0);
  for (const auto& cell : scan.cells) {
    ASSERT_FALSE(cell.error.has_value());
    const auto& ids = subjects(part, cell.mode);
    double sum = 0;
    for (const auto& id : ids)
      sum += apply_and_score(s.backend, id, SteeringConfig{cell.alpha, cell.mode, 7, cell.factor, Positions::all}, s.planted).delta;
    EXPECT_NEAR(cell.mean_delta, sum / static_cast<double>(ids.size()), 1e-12);
    EXPECT_EQ(cell.n, ids.size());
  }
  EXPECT_NE(scan.find(7, Factor::superiority, SteerMode::knockout, 3.0), nullptr);
}

TEST(Scan, TargetRangeAndRanking) {
  const ToySetup s;
  ScanRequest req;
  for (std::size_t l = 0; l < 13; ++l) req.layers.push_back(l);
  const auto scan = layer_intervention_scan(s.backend, s.partition(), s.planted, req);
  ASSERT_TRUE(scan.target.has_value());
  EXPECT_EQ(*scan.target, (std::pair<std::size_t, std::size_t>{0, 12}));
  const auto rank = rank_factors(scan);
  ASSERT_EQ(rank.size(), 3u);
  EXPECT_EQ(rank[0].factor, Factor::relevance);
  EXPECT_EQ(rank[1].factor, Factor::superiority);
  EXPECT_EQ(rank[2].factor, Factor::weekday);
  EXPECT_LE(rank[2].mean_abs_delta, 0.05);
  for (const auto& r : rank) EXPECT_FALSE(r.tied);
}

TEST(Scan, SelectTargetPicksLongestRunAndSkipsGaps) {
  InterventionScan scan;
  scan.gate_alpha = 1;
  auto add = [&](std::size_t l, double st, double su) {
    for (Factor f : {Factor::superiority, Factor::relevance}) {
      ScanCell a;
      a.layer = l;
      a.factor = f;
      a.alpha = 1;
      a.n = 3;
      a.mode = SteerMode::stimulate;
      a.mean_delta = st;
      scan.cells.push_back(a);
      a.mode = SteerMode::suppress;
      a.mean_delta = su;
      scan.cells.push_back(a);
    }
  };
  add(1, 0.6, -0.6);
  add(2, 0.6, -0.6);
  add(3, 0.4, -0.6); // fails stimulation gate
  add(4, 0.5, -0.5); // gates are inclusive
  add(5, 0.9, -0.9);
  add(6, 0.9, -0.9);
  add(8, 0.9, -0.9);
  const std::vector<std::size_t> layers{1, 2, 3, 4, 5, 6, 8};
  EXPECT_EQ(*select_target(scan, layers, {}), (std::pair<std::size_t, std::size_t>{4, 6}));
  const std::vector<std::size_t> only3{3};
  EXPECT_FALSE(select_target(scan, only3, {}).has_value());
}

TEST(Rank, TiesFlaggedAndNameOrdered) {
  InterventionScan scan;
  scan.gate_alpha = 1;
  scan.target = std::pair<std::size_t, std::size_t>{0, 0};
  for (Factor f : antecedent_factors)
    for (SteerMode m : {SteerMode::stimulate, SteerMode::suppress}) {
      ScanCell c;
      c.factor = f;
      c.mode = m;
      c.alpha = 1;
      c.n = 1;
      c.mean_delta = f == Factor::weekday ? 0.1 : (m == SteerMode::stimulate ? 1.0 : -1.0);
      scan.cells.push_back(c);
    }
  const auto r = rank_factors(scan);
  EXPECT_EQ(r[0].factor, Factor::relevance);
  EXPECT_EQ(r[1].factor, Factor::superiority);
  EXPECT_TRUE(r[0].tied);
  EXPECT_TRUE(r[1].tied);
  EXPECT_FALSE(r[2].tied);
  scan.target.reset();
  EXPECT_THROW(rank_factors(scan), Error);
}

TEST(Scan, NoHookLayersRecordErrors) {
  const FakeBackend b;
  Partition p{{"lo"}, {"hi"}, false};
  VectorBundle vb;
  vb.dim = 2;
  for (std::size_t l : {0u, 1u})
    for (Factor f : antecedent_factors) {
      BundleEntry e;
      e.factor = f;
      e.layer = l;
      e.direction = v2(1, 0);
      vb.entries.push_back(e);
    }
  ScanRequest req;
  req.layers = {0, 1};
  req.alphas = {1.0};
  const auto scan = layer_intervention_scan(b, p, vb, req);
  for (const auto& c : scan.cells) {
    if (c.layer == 0) {
      ASSERT_TRUE(c.error.has_value());
      EXPECT_NE(c.error->find("backend_unavailable"), std::string::npos);
    } else {
      EXPECT_FALSE(c.error.has_value());
    }
  }
  const auto* st = scan.find(1, Factor::superiority, SteerMode::stimulate, 1.0);
  EXPECT_DOUBLE_EQ(st->mean_delta, 0.5);
}
