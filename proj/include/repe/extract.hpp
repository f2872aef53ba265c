#pragma once

// Concept extraction: LAT prompt framing, contrastive mean difference, unit
// normalization, pair-level k-fold layer scan and cross-layer transfer.

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "repe/actstore.hpp"
#include "repe/bundle.hpp"
#include "repe/common.hpp"
#include "repe/corpus.hpp"

namespace repe {

// ---------------------------------------------------------------------------
// LAT templates

struct LatTemplate {
  Factor factor = Factor::superiority;
  std::string prefix;
  std::string suffix; // stops mid-sentence; the next token is the judgement
};

inline LatTemplate lat_template(Factor f) {
  switch (f) {
  case Factor::superiority:
    return {f, "Evaluate the other person's advantage over the narrator. Is it 'High' or 'Low'?\nScenario: ",
            "\nThe level of advantage is"};
  case Factor::relevance:
    return {f, "Evaluate the importance of this domain to the narrator. Is it 'High' or 'Low'?\nScenario: ",
            "\nThe importance of this domain to the narrator is"};
  case Factor::weekday:
    return {f, "Identify the day mentioned in the scenario. Is it 'Tuesday' or 'Thursday'?\nScenario: ",
            "\nThe day mentioned is"};
  case Factor::jealousy:
    return {f, "Evaluate the narrator's jealousy toward the other person. Is it 'High' or 'Low'?\nScenario: ",
            "\nThe level of jealousy is"};
  }
  return {};
}

namespace detail {
inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending = !out.empty();
    } else {
      if (pending) out += ' ';
      pending = false;
      out += c;
    }
  }
  return out;
}
} // namespace detail

/// prefix + scenario + suffix with the scenario's whitespace collapsed.
inline std::string wrap_lat(const LatTemplate& t, std::string_view scenario) {
  const std::string body = detail::collapse_whitespace(scenario);
  if (body.empty()) throw Error(ErrorKind::invalid_argument, "wrap_lat: empty scenario");
  if (body.find("Scenario:") != std::string::npos ||
      body.find(detail::collapse_whitespace(t.suffix)) != std::string::npos)
    throw Error(ErrorKind::invalid_argument, "wrap_lat: scenario is already wrapped in a LAT frame");
  return t.prefix + body + t.suffix;
}

// ---------------------------------------------------------------------------
// Vectors

struct ConceptVector {
  Factor factor = Factor::superiority;
  std::size_t layer = 0;
  Vec direction;
  std::size_t n_pairs_used = 0;
  std::string source_hash;
};

inline constexpr double degenerate_norm_tol = 1e-8;

/// (1/N) sum (h_pos - h_neg).
inline Vec mean_difference(std::span<const std::pair<Vec, Vec>> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::invalid_argument, "mean_difference: no pairs");
  const auto d = pairs.front().first.size();
  Vec acc = Vec::Zero(d);
  for (const auto& [pos, neg] : pairs) {
    if (pos.size() != d || neg.size() != d) throw Error(ErrorKind::invalid_argument, "mean_difference: dimension mismatch");
    acc += pos - neg;
  }
  return acc / static_cast<double>(pairs.size());
}

inline Vec normalize(const Vec& raw) {
  const double n = raw.norm();
  if (!(n > degenerate_norm_tol))
    throw Error(ErrorKind::degenerate, "degenerate concept: raw vector norm " + std::to_string(n) + " is below tolerance");
  return raw / n;
}

/// Fraction of pairs with h_pos . dir > h_neg . dir. Ties fail.
inline double projection_accuracy(const Vec& direction, std::span<const std::pair<Vec, Vec>> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::invalid_argument, "projection_accuracy: no pairs");
  std::size_t hits = 0;
  for (const auto& [pos, neg] : pairs) {
    if (pos.size() != direction.size() || neg.size() != direction.size())
      throw Error(ErrorKind::invalid_argument, "projection_accuracy: dimension mismatch");
    if (pos.dot(direction) > neg.dot(direction)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Pair bookkeeping over an ActivationSet

struct PairRows {
  std::string pair_id;
  std::size_t pos = 0;
  std::size_t neg = 0;
};

/// Pairs in record order of their positive half. If `keep` is given, only those pair ids.
inline std::vector<PairRows> pair_rows(const ActivationSet& set, const std::set<std::string>* keep = nullptr) {
  std::map<std::string, PairRows> by_id;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& r = set.records[i];
    if (!r.pair_id || !r.polarity) continue;
    if (keep && !keep->contains(*r.pair_id)) continue;
    auto [it, fresh] = by_id.try_emplace(*r.pair_id, PairRows{*r.pair_id, 0, 0});
    if (fresh) order.push_back(*r.pair_id);
    (*r.polarity == Polarity::pos ? it->second.pos : it->second.neg) = i;
  }
  std::vector<PairRows> out;
  for (const auto& id : order) out.push_back(by_id[id]);
  return out;
}

inline std::vector<std::pair<Vec, Vec>> layer_pairs(const LayerSlice& slice, std::span<const PairRows> rows) {
  std::vector<std::pair<Vec, Vec>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.emplace_back(slice.row(r.pos), slice.row(r.neg));
  return out;
}

/// Pair ids whose positive half is judged High and negative half Low.
inline std::set<std::string> consistent_pairs(const ActivationSet& set, const std::map<std::string, bool>& predicted_high) {
  auto kept = consistency_filter(std::span<const RecordMeta>(set.records), predicted_high,
                                 [](const RecordMeta& r) { return r.record_id; },
                                 [](const RecordMeta& r, bool high) { return !r.polarity || high == (*r.polarity == Polarity::pos); });
  std::map<std::string, int> halves;
  for (const auto& r : kept)
    if (r.pair_id) ++halves[*r.pair_id];
  std::set<std::string> out;
  for (const auto& [id, n] : halves)
    if (n == 2) out.insert(id);
  return out;
}

// ---------------------------------------------------------------------------
// Layer scan

struct LayerScanReport {
  Factor factor = Factor::superiority;
  std::size_t n_pairs = 0;
  std::size_t k = 0;
  std::vector<double> mean_accuracy;              // [layer]
  std::vector<std::vector<double>> fold_accuracy; // [layer][fold]
  std::optional<std::pair<std::size_t, std::size_t>> stable_range; // inclusive
};

/// Longest run of layers with accuracy >= threshold and length >= min_len (earliest on ties).
inline std::optional<std::pair<std::size_t, std::size_t>> longest_run(std::span<const double> values, double threshold,
                                                                      std::size_t min_len) {
  std::optional<std::pair<std::size_t, std::size_t>> best;
  std::size_t start = 0, best_len = 0;
  for (std::size_t i = 0; i <= values.size(); ++i) {
    const bool ok = i < values.size() && values[i] >= threshold;
    if (ok) continue;
    const std::size_t len = i - start;
    if (len >= min_len && len > best_len) {
      best = std::pair{start, i - 1};
      best_len = len;
    }
    start = i + 1;
  }
  return best;
}

struct ScanOptions {
  double stable_accuracy = 0.9;
  std::size_t stable_min_layers = 3;
};

inline LayerScanReport kfold_layer_scan(const ActivationSet& set, std::span<const PairRows> rows, const FoldAssignment& folds,
                                        Factor factor, const ScanOptions& opt = {}) {
  LayerScanReport rep;
  rep.factor = factor;
  rep.n_pairs = rows.size();
  rep.k = folds.k;
  std::vector<std::size_t> fold(rows.size());
  std::vector<std::size_t> fold_count(folds.k, 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto it = folds.fold_of.find(rows[i].pair_id);
    if (it == folds.fold_of.end()) throw Error(ErrorKind::invalid_argument, "pair '" + rows[i].pair_id + "' has no fold");
    fold[i] = it->second;
    ++fold_count[it->second];
  }
  for (std::size_t f = 0; f < folds.k; ++f)
    if (fold_count[f] == 0) throw Error(ErrorKind::invalid_argument, "fold " + std::to_string(f) + " has no test pairs");

  const auto d = static_cast<Eigen::Index>(set.dim);
  for (std::size_t layer = 0; layer < set.n_layers; ++layer) {
    const auto slice = select_layer(set, layer);
    Mat diffs(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i)
      diffs.row(static_cast<Eigen::Index>(i)) = slice.values.row(static_cast<Eigen::Index>(rows[i].pos)) -
                                                 slice.values.row(static_cast<Eigen::Index>(rows[i].neg));
    const Vec total = diffs.colwise().sum().transpose();
    std::vector<double> accs;
    for (std::size_t f = 0; f < folds.k; ++f) {
      Vec held = Vec::Zero(d);
      for (std::size_t i = 0; i < rows.size(); ++i)
        if (fold[i] == f) held += diffs.row(static_cast<Eigen::Index>(i)).transpose();
      // Training direction; a degenerate fit scores every test pair as a tie.
      const Vec train = (total - held) / static_cast<double>(rows.size() - fold_count[f]);
      const double n = train.norm();
      const Vec dir = n > degenerate_norm_tol ? Vec(train / n) : Vec(Vec::Zero(d));
      std::size_t hits = 0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (fold[i] != f) continue;
        const auto pos = slice.values.row(static_cast<Eigen::Index>(rows[i].pos));
        const auto neg = slice.values.row(static_cast<Eigen::Index>(rows[i].neg));
        if (pos.dot(dir) > neg.dot(dir)) ++hits;
      }
      accs.push_back(static_cast<double>(hits) / static_cast<double>(fold_count[f]));
    }
    double mean = 0;
    for (double a : accs) mean += a;
    rep.mean_accuracy.push_back(mean / static_cast<double>(accs.size()));
    rep.fold_accuracy.push_back(std::move(accs));
  }
  rep.stable_range = longest_run(rep.mean_accuracy, opt.stable_accuracy, opt.stable_min_layers);
  return rep;
}

/// Final per-layer directions fit on every retained pair. Layers whose mean
/// difference is degenerate are listed in `degenerate_layers` and skipped.
inline std::vector<ConceptVector> fit_concept_vectors(const ActivationSet& set, std::span<const PairRows> rows, Factor factor,
                                                      const std::string& source_hash,
                                                      std::vector<std::size_t>* degenerate_layers = nullptr) {
  std::vector<ConceptVector> out;
  for (std::size_t layer = 0; layer < set.n_layers; ++layer) {
    const auto pairs = layer_pairs(select_layer(set, layer), rows);
    try {
      out.push_back({factor, layer, normalize(mean_difference(pairs)), rows.size(), source_hash});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate) throw;
      if (degenerate_layers) degenerate_layers->push_back(layer);
    }
  }
  return out;
}

/// Accuracy of the layer-i full-fit direction on layer-j pairs, for all (i, j).
/// A degenerate layer-i fit yields a row of ties (accuracy 0).
inline Mat cross_layer_transfer(const ActivationSet& set, std::span<const PairRows> rows) {
  if (rows.empty()) throw Error(ErrorKind::invalid_argument, "cross_layer_transfer: no pairs");
  const auto L = static_cast<Eigen::Index>(set.n_layers);
  std::vector<std::vector<std::pair<Vec, Vec>>> pairs;
  for (std::size_t l = 0; l < set.n_layers; ++l) pairs.push_back(layer_pairs(select_layer(set, l), rows));
  Mat acc(L, L);
  for (Eigen::Index i = 0; i < L; ++i) {
    const Vec raw = mean_difference(pairs[static_cast<std::size_t>(i)]);
    const Vec dir = raw.norm() > degenerate_norm_tol ? Vec(raw / raw.norm()) : Vec(Vec::Zero(raw.size()));
    for (Eigen::Index j = 0; j < L; ++j) acc(i, j) = projection_accuracy(dir, pairs[static_cast<std::size_t>(j)]);
  }
  return acc;
}

inline BundleEntry to_bundle_entry(const ConceptVector& v) {
  BundleEntry e;
  e.factor = v.factor;
  e.layer = v.layer;
  e.direction = v.direction;
  e.n_pairs_used = v.n_pairs_used;
  e.source_hash = v.source_hash;
  return e;
}

inline ConceptVector from_bundle_entry(const BundleEntry& e) {
  return {e.factor, e.layer, e.direction, e.n_pairs_used, e.source_hash};
}

} // namespace repe
