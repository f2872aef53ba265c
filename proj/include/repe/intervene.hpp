#pragma once

// Steering and knockout at a single layer, scored through a backend hook:
//   stimulate  h' = h + alpha d
//   suppress   h' = h - alpha d
//   knockout   h' = h - (h.d) d

#include <algorithm>
#include <cmath>
#include <concepts>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "repe/bundle.hpp"
#include "repe/common.hpp"
#include "repe/extract.hpp"

namespace repe {

enum class SteerMode { stimulate, suppress, knockout };

inline constexpr std::array<SteerMode, 3> all_modes = {SteerMode::stimulate, SteerMode::suppress, SteerMode::knockout};

inline constexpr std::string_view mode_name(SteerMode m) {
  switch (m) {
  case SteerMode::stimulate: return "stimulate";
  case SteerMode::suppress: return "suppress";
  case SteerMode::knockout: return "knockout";
  }
  return "?";
}

inline std::optional<SteerMode> parse_mode(std::string_view s) {
  for (SteerMode m : all_modes)
    if (mode_name(m) == s) return m;
  return std::nullopt;
}

enum class Positions { all, last };

struct SteeringConfig {
  double alpha = 3.0;
  SteerMode mode = SteerMode::stimulate;
  std::size_t layer = 0;
  Factor factor = Factor::superiority;
  Positions positions = Positions::all;
};

inline void validate(const SteeringConfig& c) {
  if (c.mode != SteerMode::knockout && !(c.alpha >= 0))
    throw Error(ErrorKind::invalid_argument, "steering alpha must be non-negative");
}

/// Per-backend default alphas. The toy value is calibrated to its unit-scale states.
inline const std::map<std::string, double>& default_alpha_table() {
  static const std::map<std::string, double> t = {{"toy", 3.0}, {"generic", 15.0}, {"llama", 15.0}, {"qwen", 15.0}, {"gemma", 3000.0}};
  return t;
}

inline constexpr double unit_norm_tol = 1e-6;

inline void require_unit(const Vec& d, const char* op) {
  if (!(std::abs(d.norm() - 1.0) <= unit_norm_tol))
    throw Error(ErrorKind::invalid_argument, std::string(op) + ": direction is not unit norm (|d| = " + std::to_string(d.norm()) + ")");
}

inline Vec steer(const Vec& h, const Vec& direction, double alpha, int sign) {
  require_unit(direction, "steer");
  if (h.size() != direction.size()) throw Error(ErrorKind::invalid_argument, "steer: dimension mismatch");
  if (sign != 1 && sign != -1) throw Error(ErrorKind::invalid_argument, "steer: sign must be +1 or -1");
  return h + (sign * alpha) * direction;
}

inline Vec knockout(const Vec& h, const Vec& direction) {
  require_unit(direction, "knockout");
  if (h.size() != direction.size()) throw Error(ErrorKind::invalid_argument, "knockout: dimension mismatch");
  return h - h.dot(direction) * direction;
}

inline Vec apply_transform(const Vec& h, const Vec& direction, const SteeringConfig& c) {
  switch (c.mode) {
  case SteerMode::stimulate: return steer(h, direction, c.alpha, +1);
  case SteerMode::suppress: return steer(h, direction, c.alpha, -1);
  case SteerMode::knockout: return knockout(h, direction);
  }
  return h;
}

/// What the intervention layer needs from a model.
template <typename B>
concept InterventionBackend = requires(const B& b, const std::string& id, std::size_t layer, const Vec& h) {
  { b.n_states() } -> std::convertible_to<std::size_t>;
  { b.dim() } -> std::convertible_to<std::size_t>;
  { b.has_hook(layer) } -> std::convertible_to<bool>;
  { b.hidden_state(id, layer) } -> std::convertible_to<Vec>;
  { b.baseline_score(id) } -> std::convertible_to<double>;
  { b.score_from(id, layer, h) } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------

struct Partition {
  std::vector<std::string> low, high;
  bool empty_warning = false;
};

inline constexpr double partition_threshold = 2.5;

struct BaselineItem {
  std::string id;
  int ground_truth = 0;
};

/// G_low: gt <= 2 and score < 2.5. G_high: gt = 5 and score > 2.5. A score of
/// exactly 2.5 joins neither.
inline Partition partition_baseline(std::span<const BaselineItem> items, const std::map<std::string, double>& scores) {
  Partition p;
  for (const auto& it : items) {
    auto s = scores.find(it.id);
    if (s == scores.end()) throw Error(ErrorKind::missing_input, "partition_baseline: no baseline score for '" + it.id + "'");
    if (it.ground_truth <= 2 && s->second < partition_threshold) p.low.push_back(it.id);
    else if (it.ground_truth == 5 && s->second > partition_threshold) p.high.push_back(it.id);
  }
  p.empty_warning = p.low.empty() || p.high.empty();
  return p;
}

struct InterventionResult {
  std::string record_id;
  double s_pre = 0, s_post = 0;
  double delta = 0, delta_pct = 0;
  SteerMode mode = SteerMode::stimulate;
  std::size_t layer = 0;
  Factor factor = Factor::superiority;
};

/// Score shift as a percentage of the 1..5 scale.
inline double delta_percent(double delta) { return 100.0 * delta / 4.0; }

template <InterventionBackend B>
InterventionResult apply_and_score(const B& backend, const std::string& record_id, const SteeringConfig& cfg, const Vec& direction) {
  validate(cfg);
  if (!backend.has_hook(cfg.layer))
    throw Error(ErrorKind::backend_unavailable, "no intervention hook at layer " + std::to_string(cfg.layer));
  if (direction.size() != static_cast<Eigen::Index>(backend.dim()))
    throw Error(ErrorKind::invalid_argument, "apply_and_score: direction dimension does not match the backend");
  const Vec h = backend.hidden_state(record_id, cfg.layer);
  InterventionResult r;
  r.record_id = record_id;
  r.mode = cfg.mode;
  r.layer = cfg.layer;
  r.factor = cfg.factor;
  r.s_pre = backend.score_from(record_id, cfg.layer, h);
  r.s_post = backend.score_from(record_id, cfg.layer, apply_transform(h, direction, cfg));
  r.delta = r.s_post - r.s_pre;
  r.delta_pct = delta_percent(r.delta);
  return r;
}

template <InterventionBackend B>
InterventionResult apply_and_score(const B& backend, const std::string& record_id, const SteeringConfig& cfg, const VectorBundle& vectors) {
  const auto& e = vectors.at(cfg.factor, cfg.layer);
  if (e.layer != cfg.layer) throw Error(ErrorKind::invalid_argument, "apply_and_score: direction/layer mismatch");
  return apply_and_score(backend, record_id, cfg, e.direction);
}

// ---------------------------------------------------------------------------

struct ScanCell {
  std::size_t layer = 0;
  Factor factor = Factor::superiority;
  SteerMode mode = SteerMode::stimulate;
  double alpha = 0;
  double mean_delta = 0, mean_delta_pct = 0;
  std::size_t n = 0;
  std::optional<std::string> error;
};

struct TargetGates {
  double stimulate_min = 0.5;
  double suppress_max = -0.5;
};

struct InterventionScan {
  std::vector<ScanCell> cells;
  double gate_alpha = 0;
  std::optional<std::pair<std::size_t, std::size_t>> target; // inclusive layer interval

  const ScanCell* find(std::size_t layer, Factor f, SteerMode m, double alpha) const {
    for (const auto& c : cells)
      if (c.layer == layer && c.factor == f && c.mode == m && c.alpha == alpha) return &c;
    return nullptr;
  }
};

struct ScanRequest {
  std::vector<std::size_t> layers;
  std::vector<Factor> factors{antecedent_factors.begin(), antecedent_factors.end()};
  std::vector<SteerMode> modes{all_modes.begin(), all_modes.end()};
  std::vector<double> alphas{3.0};
  std::optional<double> gate_alpha; // defaults to alphas.front()
  TargetGates gates;
};

/// Stimulation acts on G_low; suppression and knockout on G_high.
inline const std::vector<std::string>& subjects(const Partition& p, SteerMode m) {
  return m == SteerMode::stimulate ? p.low : p.high;
}

/// Longest run of layers where both antecedents pass the stimulation and suppression gates.
inline std::optional<std::pair<std::size_t, std::size_t>> select_target(const InterventionScan& scan, std::span<const std::size_t> layers,
                                                                        const TargetGates& gates) {
  std::vector<std::size_t> sorted(layers.begin(), layers.end());
  std::sort(sorted.begin(), sorted.end());
  auto passes = [&](std::size_t l) {
    for (Factor f : {Factor::superiority, Factor::relevance}) {
      const auto* st = scan.find(l, f, SteerMode::stimulate, scan.gate_alpha);
      const auto* su = scan.find(l, f, SteerMode::suppress, scan.gate_alpha);
      if (!st || !su || st->error || su->error || st->n == 0 || su->n == 0) return false;
      if (!(st->mean_delta >= gates.stimulate_min) || !(su->mean_delta <= gates.suppress_max)) return false;
    }
    return true;
  };
  std::optional<std::pair<std::size_t, std::size_t>> best;
  bool open = false;
  std::size_t start = 0, prev = 0;
  auto close = [&](std::size_t end) {
    if (open && (!best || end - start > best->second - best->first)) best = std::pair{start, end};
    open = false;
  };
  for (std::size_t l : sorted) {
    const bool ok = passes(l);
    if (open && l != prev + 1) close(prev);
    if (ok && !open) {
      open = true;
      start = l;
    }
    if (!ok) close(prev);
    prev = l;
  }
  close(prev);
  return best;
}

template <InterventionBackend B>
InterventionScan layer_intervention_scan(const B& backend, const Partition& partition, const VectorBundle& vectors, const ScanRequest& req) {
  if (partition.low.empty() && partition.high.empty()) throw Error(ErrorKind::invalid_argument, "intervention scan: both partitions are empty");
  if (req.alphas.empty()) throw Error(ErrorKind::invalid_argument, "intervention scan: no alpha values");
  InterventionScan scan;
  scan.gate_alpha = req.gate_alpha.value_or(req.alphas.front());
  for (std::size_t layer : req.layers)
    for (Factor f : req.factors)
      for (SteerMode m : req.modes)
        for (double alpha : req.alphas) {
          if (m == SteerMode::knockout && alpha != req.alphas.front()) continue;
          ScanCell cell;
          cell.layer = layer;
          cell.factor = f;
          cell.mode = m;
          cell.alpha = m == SteerMode::knockout ? scan.gate_alpha : alpha;
          try {
            const auto& ids = subjects(partition, m);
            const auto& dir = vectors.at(f, layer).direction;
            const SteeringConfig cfg{alpha, m, layer, f, Positions::all};
            double sum = 0;
            for (const auto& id : ids) sum += apply_and_score(backend, id, cfg, dir).delta;
            cell.n = ids.size();
            cell.mean_delta = ids.empty() ? 0.0 : sum / static_cast<double>(ids.size());
            cell.mean_delta_pct = delta_percent(cell.mean_delta);
          } catch (const Error& e) {
            cell.error = std::string(error_kind_name(e.kind())) + ": " + e.what();
          }
          scan.cells.push_back(std::move(cell));
        }
  scan.target = select_target(scan, req.layers, req.gates);
  return scan;
}

struct RankedFactor {
  Factor factor = Factor::superiority;
  double mean_abs_delta = 0;
  bool tied = false;
};

inline constexpr double rank_tie_tol = 1e-12;

/// Orders factors by mean |delta| over L_target (stimulation and suppression at the
/// gate alpha). Equal values fall back to name order and are flagged.
inline std::vector<RankedFactor> rank_factors(const InterventionScan& scan, std::span<const Factor> factors = antecedent_factors) {
  if (!scan.target) throw Error(ErrorKind::invalid_argument, "rank_factors: L_target is empty");
  std::vector<RankedFactor> out;
  for (Factor f : factors) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& c : scan.cells) {
      if (c.factor != f || c.error || c.alpha != scan.gate_alpha || c.mode == SteerMode::knockout) continue;
      if (c.layer < scan.target->first || c.layer > scan.target->second) continue;
      sum += std::abs(c.mean_delta);
      ++n;
    }
    if (n == 0) throw Error(ErrorKind::missing_input, "rank_factors: no scan cells for " + std::string(factor_name(f)) + " in L_target");
    out.push_back({f, sum / static_cast<double>(n), false});
  }
  std::sort(out.begin(), out.end(), [](const RankedFactor& a, const RankedFactor& b) {
    if (std::abs(a.mean_abs_delta - b.mean_abs_delta) > rank_tie_tol) return a.mean_abs_delta > b.mean_abs_delta;
    return factor_name(a.factor) < factor_name(b.factor);
  });
  for (std::size_t i = 0; i + 1 < out.size(); ++i)
    if (std::abs(out[i].mean_abs_delta - out[i + 1].mean_abs_delta) <= rank_tie_tol) out[i].tied = out[i + 1].tied = true;
  return out;
}

} // namespace repe
