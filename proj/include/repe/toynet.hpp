#pragma once

// Deterministic toy backend with planted concept directions.
//
//   h_0     = b_0 + g_0 * sum_t y_t v_t(0) + eps
//   h_{l+1} = R_l h_l + b_{l+1} + g_{l+1} * sum_t y_t v_t(l+1)
//   v_t(l)  = R_{l-1} ... R_0 v_t(0)
//
// R_l are orthogonal, so along v_t(l) the state carries y_t * sum_{j<=l} g_j plus
// rotated noise. The score readout is 1 + 4 sigmoid(kappa * w.(h_L - bbar_L)) with
// w = a_sup v_sup(L) + a_rel v_rel(L); weekday never reaches the readout.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "repe/actstore.hpp"
#include "repe/common.hpp"
#include "repe/corpus.hpp"

namespace repe::toy {

/// Linear ramp over layers 0..3, flat through layer L-3, zero afterwards; sums to 1.
inline std::vector<double> default_gamma(std::size_t n_layers) {
  std::vector<double> g(n_layers + 1, 0.0);
  for (std::size_t l = 0; l <= n_layers; ++l) {
    if (l <= 3) g[l] = static_cast<double>(l) / 4.0;
    else if (l + 3 <= n_layers) g[l] = 1.0;
  }
  const double s = std::accumulate(g.begin(), g.end(), 0.0);
  if (s > 0)
    for (auto& x : g) x /= s;
  return g;
}

struct ToyModelConfig {
  std::size_t d = 64;
  std::size_t n_layers = 12; // rotations; the model exposes n_layers + 1 states
  std::uint64_t seed = 0;
  std::vector<double> gamma = default_gamma(12);
  double a_sup = 1.0;
  double a_rel = 1.5;
  double noise_sigma = 0.3;
  double kappa = 4.0;
  // Fraction of noise variance the two halves of a matched pair share.
  double pair_noise_share = 0.999;
  double bias_scale = 1.0;
};

inline void validate(const ToyModelConfig& c) {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::config, "toy model: " + m); };
  if (c.d < 8) fail("d must be at least 8");
  if (c.n_layers < 4) fail("n_layers must be at least 4");
  if (c.gamma.size() != c.n_layers + 1)
    fail("gamma needs n_layers + 1 = " + std::to_string(c.n_layers + 1) + " entries, got " + std::to_string(c.gamma.size()));
  double sum = 0;
  for (double g : c.gamma) {
    if (!(g >= 0)) fail("gamma entries must be nonnegative");
    sum += g;
  }
  if (sum == 0) throw Error(ErrorKind::degenerate, "toy model: gamma is all zero");
  if (std::abs(sum - 1.0) > 1e-9) fail("gamma must sum to 1 (got " + std::to_string(sum) + ")");
  if (!(c.noise_sigma >= 0)) fail("noise_sigma must be nonnegative");
  if (!(c.kappa > 0)) fail("kappa must be positive");
  if (!(c.pair_noise_share >= 0 && c.pair_noise_share <= 1)) fail("pair_noise_share must lie in [0,1]");
}

/// Planted coefficient per direction (superiority, relevance, weekday).
struct Coefficients {
  double sup = 0, rel = 0, wk = 0;
};

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stable sub-seed for (base seed, stream tag, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

class ToyModel {
public:
  explicit ToyModel(ToyModelConfig config) : cfg_(std::move(config)) {
    validate(cfg_);
    const auto d = static_cast<Eigen::Index>(cfg_.d);
    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto gaussian = [&](Eigen::Index rows, Eigen::Index cols) {
      Mat m(rows, cols);
      for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
      return m;
    };
    auto orthonormal_columns = [](const Mat& a) {
      Eigen::HouseholderQR<Mat> qr(a);
      Mat q = qr.householderQ() * Mat::Identity(a.rows(), a.cols());
      const Mat r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
      for (Eigen::Index j = 0; j < a.cols(); ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
      return q;
    };

    const Mat v0 = orthonormal_columns(gaussian(d, 3));
    rotations_.reserve(cfg_.n_layers);
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) rotations_.push_back(orthonormal_columns(gaussian(d, d)));
    for (std::size_t l = 0; l <= cfg_.n_layers; ++l) biases_.push_back(gaussian(d, 1).col(0) * (cfg_.bias_scale / std::sqrt(double(cfg_.d))));

    planted_.resize(cfg_.n_layers + 1);
    for (int t = 0; t < 3; ++t) planted_[0][t] = v0.col(t);
    for (std::size_t l = 1; l <= cfg_.n_layers; ++l)
      for (int t = 0; t < 3; ++t) planted_[l][t] = rotations_[l - 1] * planted_[l - 1][t];

    cumulative_.resize(cfg_.n_layers + 1);
    std::partial_sum(cfg_.gamma.begin(), cfg_.gamma.end(), cumulative_.begin());

    bias_trajectory_ = encode(Coefficients{}, Vec::Zero(d));
    readout_ = cfg_.a_sup * planted_[cfg_.n_layers][0] + cfg_.a_rel * planted_[cfg_.n_layers][1];
  }

  const ToyModelConfig& config() const { return cfg_; }
  std::size_t dim() const { return cfg_.d; }
  std::size_t n_layers() const { return cfg_.n_layers; }
  std::size_t n_states() const { return cfg_.n_layers + 1; }
  const Mat& rotation(std::size_t l) const { return rotations_.at(l); }
  const Vec& bias(std::size_t l) const { return biases_.at(l); }
  const Vec& bias_trajectory(std::size_t l) const { return bias_trajectory_.at(l); }
  double cumulative_gain(std::size_t l) const { return cumulative_.at(l); }
  const Vec& readout_direction() const { return readout_; }

  /// Exact planted unit vectors {v_sup(l), v_rel(l), v_wk(l)}.
  const std::array<Vec, 3>& planted_directions(std::size_t layer) const {
    if (layer > cfg_.n_layers) throw Error(ErrorKind::out_of_range, "toy layer " + std::to_string(layer) + " out of range");
    return planted_[layer];
  }

  /// Unit axis along which the toy represents a concept. Jealousy has no planted
  /// direction of its own; its appraisal lies on the (normalized) readout axis.
  Vec concept_axis(Factor f, std::size_t layer) const {
    const auto& p = planted_directions(layer);
    switch (f) {
    case Factor::superiority: return p[0];
    case Factor::relevance: return p[1];
    case Factor::weekday: return p[2];
    case Factor::jealousy: {
      Vec w = cfg_.a_sup * p[0] + cfg_.a_rel * p[1];
      return w / w.norm();
    }
    }
    return p[0];
  }

  /// Maps a record's label set onto planted coefficients.
  Coefficients coefficients(const std::map<Factor, int>& labels) const {
    auto get = [&](Factor f) {
      auto it = labels.find(f);
      return it == labels.end() ? 0.0 : double(it->second);
    };
    Coefficients c{get(Factor::superiority), get(Factor::relevance), get(Factor::weekday)};
    if (const double j = get(Factor::jealousy); j != 0) {
      const double n = std::hypot(cfg_.a_sup, cfg_.a_rel);
      c.sup += j * cfg_.a_sup / n;
      c.rel += j * cfg_.a_rel / n;
    }
    return c;
  }

  Vec draw_noise(std::uint64_t noise_seed) const {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec e(static_cast<Eigen::Index>(cfg_.d));
    for (auto& x : e) x = normal(rng) * cfg_.noise_sigma;
    return e;
  }

  /// Noise for one half of a matched pair: a shared draw mixed with an own draw.
  Vec pair_noise(std::uint64_t pair_seed, std::uint64_t own_seed) const {
    const double rho = cfg_.pair_noise_share;
    return std::sqrt(rho) * draw_noise(pair_seed) + std::sqrt(1.0 - rho) * draw_noise(own_seed);
  }

  /// States h_0..h_L for planted coefficients and a given noise vector.
  std::vector<Vec> encode(const Coefficients& y, const Vec& noise) const {
    std::vector<Vec> h;
    h.reserve(n_states());
    h.push_back(biases_[0] + cfg_.gamma[0] * injection(y, 0) + noise);
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) h.push_back(step(h.back(), l, y));
    return h;
  }

  std::vector<Vec> encode(const Coefficients& y, std::uint64_t noise_seed) const { return encode(y, draw_noise(noise_seed)); }

  /// Binary vignette labels (sup, rel, weekday).
  std::vector<Vec> encode(int sup, int rel, int weekday, std::uint64_t noise_seed) const {
    return encode(Coefficients{double(sup), double(rel), double(weekday)}, noise_seed);
  }

  double readout_logit(const Vec& h_last) const {
    return cfg_.kappa * readout_.dot(h_last - bias_trajectory_.back());
  }

  double predict_score(const Vec& h_last) const {
    if (h_last.size() != static_cast<Eigen::Index>(cfg_.d))
      throw Error(ErrorKind::invalid_argument, "predict_score: state has wrong dimension");
    return 1.0 + 4.0 * sigmoid(readout_logit(h_last));
  }

  struct ForwardResult {
    Vec h_last;
    double score = 0;
  };

  /// Continues the forward pass from a (possibly modified) state at `layer`.
  ForwardResult forward_from(std::size_t layer, const Vec& h, const Coefficients& y) const {
    if (layer > cfg_.n_layers) throw Error(ErrorKind::out_of_range, "forward_from: layer " + std::to_string(layer) + " out of range");
    if (h.size() != static_cast<Eigen::Index>(cfg_.d)) throw Error(ErrorKind::invalid_argument, "forward_from: state has wrong dimension");
    Vec cur = h;
    for (std::size_t l = layer; l < cfg_.n_layers; ++l) cur = step(cur, l, y);
    ForwardResult r;
    r.score = predict_score(cur);
    r.h_last = std::move(cur);
    return r;
  }

  /// Zero-shot High/Low judgement used by the consistency filter.
  bool assess_high(const Vec& h_last, Factor f) const {
    return concept_axis(f, cfg_.n_layers).dot(h_last - bias_trajectory_.back()) > 0.5;
  }

  std::string model_id() const {
    return "toy:d" + std::to_string(cfg_.d) + ":L" + std::to_string(cfg_.n_layers) + ":seed" + std::to_string(cfg_.seed);
  }

private:
  Vec injection(const Coefficients& y, std::size_t l) const {
    const auto& p = planted_[l];
    return y.sup * p[0] + y.rel * p[1] + y.wk * p[2];
  }

  Vec step(const Vec& h, std::size_t l, const Coefficients& y) const {
    return rotations_[l] * h + biases_[l + 1] + cfg_.gamma[l + 1] * injection(y, l + 1);
  }

  ToyModelConfig cfg_;
  std::vector<Mat> rotations_;
  std::vector<Vec> biases_;
  std::vector<std::array<Vec, 3>> planted_;
  std::vector<double> cumulative_;
  std::vector<Vec> bias_trajectory_;
  Vec readout_;
};

inline ToyModel init_model(const ToyModelConfig& config) { return ToyModel(config); }

// ---------------------------------------------------------------------------
// Capture into ActivationSets

inline constexpr std::uint64_t stream_pair_shared = 1;
inline constexpr std::uint64_t stream_pair_own = 2;
inline constexpr std::uint64_t stream_vignette = 3;

inline std::uint64_t factor_stream(Factor f) { return 16 + static_cast<std::uint64_t>(f); }

inline void append_states(ActivationSet& set, const std::vector<Vec>& states) {
  for (const auto& h : states)
    for (Eigen::Index k = 0; k < h.size(); ++k) set.tensor.push_back(static_cast<float>(h[k]));
}

/// Two records per pair ("<pair_id>/pos", "<pair_id>/neg"). Labels: the target
/// factor (1/0) plus the pair's shared context labels.
inline ActivationSet capture_pairs(const ToyModel& model, std::span<const ContrastivePair> pairs, std::uint64_t seed) {
  ActivationSet set;
  set.n_layers = model.n_states();
  set.dim = model.dim();
  set.model_id = model.model_id();
  set.capture_note = pairs.empty() ? "lat" : "lat:" + std::string(factor_name(pairs.front().factor));
  set.extra["layer_indexing"] = "0 = input state, l = output of block l";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const std::uint64_t stream = factor_stream(p.factor);
    const std::uint64_t shared = derive_seed(seed, stream * 8 + stream_pair_shared, i);
    for (int pol : {1, 0}) {
      RecordMeta r;
      r.record_id = p.pair_id + (pol ? "/pos" : "/neg");
      r.labels = p.context;
      r.labels[p.factor] = pol;
      r.split_tag = "t1";
      r.pair_id = p.pair_id;
      r.polarity = pol ? Polarity::pos : Polarity::neg;
      const auto own = derive_seed(seed, stream * 8 + stream_pair_own, 2 * i + static_cast<std::uint64_t>(pol));
      append_states(set, model.encode(model.coefficients(r.labels), model.pair_noise(shared, own)));
      set.records.push_back(std::move(r));
    }
  }
  validate(set);
  return set;
}

inline std::uint64_t vignette_noise_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed(seed, stream_vignette, index);
}

inline RecordMeta vignette_record(const Vignette& v) {
  RecordMeta r;
  r.record_id = v.vignette_id;
  r.labels = {{Factor::superiority, v.sup}, {Factor::relevance, v.rel}, {Factor::weekday, v.weekday}};
  r.ground_truth = v.jealousy_gt;
  r.split_tag = "g1";
  return r;
}

inline ActivationSet capture_vignettes(const ToyModel& model, std::span<const Vignette> vignettes, std::uint64_t seed) {
  ActivationSet set;
  set.n_layers = model.n_states();
  set.dim = model.dim();
  set.model_id = model.model_id();
  set.capture_note = "lat:jealousy";
  set.extra["layer_indexing"] = "0 = input state, l = output of block l";
  for (std::size_t i = 0; i < vignettes.size(); ++i) {
    const auto& v = vignettes[i];
    append_states(set, model.encode(v.sup, v.rel, v.weekday, vignette_noise_seed(seed, i)));
    set.records.push_back(vignette_record(v));
  }
  validate(set);
  return set;
}

/// Per-record High/Low predictions for the records of a pair capture.
inline std::map<std::string, bool> assess_pairs(const ToyModel& model, const ActivationSet& set, Factor factor) {
  std::map<std::string, bool> out;
  const std::size_t last = set.n_layers - 1;
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto st = set.state(i, last);
    Vec h(static_cast<Eigen::Index>(set.dim));
    for (std::size_t k = 0; k < set.dim; ++k) h[static_cast<Eigen::Index>(k)] = st[k];
    out[set.records[i].record_id] = model.assess_high(h, factor);
  }
  return out;
}

/// Intervention backend over a fixed set of vignettes. Hidden states are
/// recomputed in double precision from the same seeds used by capture_vignettes.
class ToyBackend {
public:
  ToyBackend(const ToyModel& model, std::span<const Vignette> vignettes, std::uint64_t seed) : model_(&model) {
    for (std::size_t i = 0; i < vignettes.size(); ++i) {
      const auto& v = vignettes[i];
      Entry e;
      e.coeffs = Coefficients{double(v.sup), double(v.rel), double(v.weekday)};
      e.states = model.encode(e.coeffs, vignette_noise_seed(seed, i));
      entries_.emplace(v.vignette_id, std::move(e));
    }
  }

  std::size_t n_states() const { return model_->n_states(); }
  std::size_t dim() const { return model_->dim(); }
  bool has_hook(std::size_t layer) const { return layer < n_states(); }

  const Vec& hidden_state(const std::string& id, std::size_t layer) const { return entry(id).states.at(layer); }

  double baseline_score(const std::string& id) const { return model_->predict_score(entry(id).states.back()); }

  double score_from(const std::string& id, std::size_t layer, const Vec& h) const {
    return model_->forward_from(layer, h, entry(id).coeffs).score;
  }

private:
  struct Entry {
    Coefficients coeffs;
    std::vector<Vec> states;
  };

  const Entry& entry(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw Error(ErrorKind::invalid_argument, "toy backend has no record '" + id + "'");
    return it->second;
  }

  const ToyModel* model_;
  std::unordered_map<std::string, Entry> entries_;
};

} // namespace repe::toy
