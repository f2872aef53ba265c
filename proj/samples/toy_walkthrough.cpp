// Walks the four phases on the toy backend in-process, at one mature layer.
//
//   ./build/samples/toy_walkthrough [layer]

#include <cstdio>
#include <cstdlib>

#include "repe/intervene.hpp"
#include "repe/purify.hpp"
#include "repe/toynet.hpp"
#include "repe/weighting.hpp"

using namespace repe;

int main(int argc, char** argv) {
  const std::size_t layer = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 9;
  const toy::ToyModel model(toy::ToyModelConfig{});
  const auto bank = default_template_bank();
  if (layer >= model.n_states()) {
    std::fprintf(stderr, "layer must be below %zu\n", model.n_states());
    return 2;
  }

  // Phase I: contrastive pairs -> mean-difference direction per factor.
  VectorBundle raw;
  raw.dim = model.dim();
  for (Factor f : all_factors) {
    const auto pairs = build_contrastive_pairs(bank, f, 200, 0);
    const auto set = toy::capture_pairs(model, pairs, 0);
    const auto rows = pair_rows(set);
    const auto v = normalize(mean_difference(layer_pairs(select_layer(set, layer), rows)));
    raw.entries.push_back(to_bundle_entry({f, layer, v, rows.size(), "sample"}));
    std::printf("%-12s cos(extracted, planted) = %.4f\n", std::string(factor_name(f)).c_str(), v.dot(model.concept_axis(f, layer)));
  }

  // Phase II: strip each antecedent of the other two.
  const auto pur = purify_bundle(raw).bundle;

  // Phase III: regress the jealousy projection on the purified projections.
  const auto vignettes = fill_templates(bank, {}, 0);
  const auto g1 = toy::capture_vignettes(model, vignettes, 0);
  const std::vector<std::size_t> one{layer};
  const auto rep = layer_sweep(g1, raw, pur, one).front();
  if (rep.error) {
    std::fprintf(stderr, "regression failed: %s\n", rep.error->c_str());
    return 4;
  }
  std::printf("beta sup=%.3f rel=%.3f wk=%.4f  R2=%.3f  valid=%s\n", rep.beta.at(Factor::superiority), rep.beta.at(Factor::relevance),
              rep.beta.at(Factor::weekday), rep.r2, rep.flags.overall ? "yes" : "no");

  // Phase IV: push one G_low vignette along each purified direction (alpha 1).
  const toy::ToyBackend backend(model, vignettes, 0);
  const auto& target = *std::find_if(vignettes.begin(), vignettes.end(), [&](const Vignette& v) {
    return v.jealousy_gt <= 2 && backend.baseline_score(v.vignette_id) < partition_threshold;
  });
  for (Factor f : antecedent_factors) {
    const SteeringConfig cfg{1.0, SteerMode::stimulate, layer, f, Positions::all};
    const auto r = apply_and_score(backend, target.vignette_id, cfg, pur);
    std::printf("stimulate %-12s %s: %.3f -> %.3f (%+.1f%%)\n", std::string(factor_name(f)).c_str(), target.vignette_id.c_str(), r.s_pre,
                r.s_post, r.delta_pct);
  }
  return 0;
}
