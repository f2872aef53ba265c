#pragma once

// Phase orchestration behind the `repe` command.
//
// Work directory layout:
//   corpus/pairs_<factor>.jsonl  corpus/vignettes.jsonl        (gen)
//   acts/t1_<factor>.acf         acts/g1.acf                   (capture)
//   vectors/raw.cvb              vectors/purified.cvb          (scan, purify)
//   report/...                                                 (scan..report)
//   manifest.json

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "repe/actstore.hpp"
#include "repe/bundle.hpp"
#include "repe/common.hpp"
#include "repe/corpus.hpp"
#include "repe/digest.hpp"
#include "repe/extract.hpp"
#include "repe/intervene.hpp"
#include "repe/purify.hpp"
#include "repe/report.hpp"
#include "repe/toynet.hpp"
#include "repe/weighting.hpp"

namespace repe {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* tool_version = "0.1.0";

// ---------------------------------------------------------------------------
// Configuration

inline json default_config() {
  return json::parse(R"({
    "backend": "toy",
    "seed": 0,
    "paths": {"work_dir": "repe_run", "templates": "", "acf_in": ""},
    "corpus": {"pairs_per_factor": 200, "families": [], "consistency_filter": true},
    "toy": {"d": 64, "n_layers": 12, "noise_sigma": 0.3, "a_sup": 1.0, "a_rel": 1.5, "kappa": 4.0,
            "pair_noise_share": 0.999, "bias_scale": 1.0},
    "scan": {"k": 5, "stable_accuracy": 0.9, "stable_min_layers": 3},
    "layers": {"first": 0, "last": -1},
    "regress": {"significance": 0.05, "placebo_beta": 0.05, "layers": "stable"},
    "steer": {"alpha": null,
              "alpha_table": {"toy": 3.0, "generic": 15.0, "llama": 15.0, "qwen": 15.0, "gemma": 3000.0},
              "alpha_grid": [0.5, 1.0, 1.5, 2.0, 3.0],
              "modes": ["stimulate", "suppress", "knockout"],
              "gates": {"stimulate_min": 0.5, "suppress_max": -0.5}},
    "factors": ["superiority", "relevance", "weekday", "jealousy"]
  })");
}

/// Parses an override value: JSON if it parses, otherwise a bare string.
inline json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

/// Sets a dotted key ("steer.alpha") on an existing config. Unknown keys are errors.
inline void apply_override(json& cfg, const std::string& dotted, const json& value) {
  json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty() || !node->is_object() || !node->contains(key))
      throw Error(ErrorKind::config, "unknown config key '" + dotted + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
}

inline void apply_set_argument(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::config, "override must look like key=value, got '" + assignment + "'");
  apply_override(cfg, assignment.substr(0, eq), parse_override_value(assignment.substr(eq + 1)));
}

/// REPE_STEER__ALPHA=5 sets steer.alpha. Keys are lower-cased; "__" separates levels.
inline void apply_env_overrides(json& cfg, char** envp) {
  if (!envp) return;
  for (char** e = envp; *e; ++e) {
    const std::string kv = *e;
    if (kv.rfind("REPE_", 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    std::string key = kv.substr(5, eq - 5);
    for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::string dotted;
    for (std::size_t i = 0; i < key.size(); ++i) {
      if (key.compare(i, 2, "__") == 0) {
        dotted += '.';
        ++i;
      } else {
        dotted += key[i];
      }
    }
    apply_override(cfg, dotted, parse_override_value(kv.substr(eq + 1)));
  }
}

/// Recursively overlays `patch` onto `base`, rejecting keys the defaults do not know.
inline void merge_config(json& base, const json& patch, const std::string& prefix = "") {
  if (!patch.is_object()) throw Error(ErrorKind::config, "config " + (prefix.empty() ? "root" : "'" + prefix + "'") + " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
    auto& slot = base[it.key()];
    if (slot.is_object() && it->is_object() && key != "steer.alpha_table") merge_config(slot, *it, key);
    else slot = *it;
  }
}

inline json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::missing_input, "cannot open config '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::config, "config '" + path + "': " + e.what());
  }
}

struct RunConfig {
  std::string backend = "toy";
  std::uint64_t seed = 0;
  fs::path work_dir;
  std::string templates;
  std::string acf_in;
  std::size_t pairs_per_factor = 200;
  std::vector<std::string> families;
  bool consistency_filter = true;
  toy::ToyModelConfig toy;
  std::size_t k = 5;
  ScanOptions scan;
  long first_layer = 0, last_layer = -1;
  ValidityThresholds thresholds;
  bool regress_stable_only = true;
  double alpha = 3.0;
  std::vector<double> alpha_grid;
  std::vector<SteerMode> modes;
  TargetGates gates;
  std::vector<Factor> factors;
  json effective; // the merged JSON this was built from
};

inline RunConfig build_run_config(const json& j) {
  RunConfig c;
  auto fail = [](const std::string& m) { throw Error(ErrorKind::config, m); };
  try {
    c.effective = j;
    c.backend = j.at("backend").get<std::string>();
    if (c.backend != "toy" && c.backend != "acf" && c.backend != "tap") fail("backend must be one of toy, acf, tap");
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& p = j.at("paths");
    c.work_dir = p.at("work_dir").get<std::string>();
    if (c.work_dir.empty()) fail("paths.work_dir must not be empty");
    c.templates = p.at("templates").get<std::string>();
    c.acf_in = p.at("acf_in").get<std::string>();
    if (!c.templates.empty() && !fs::exists(c.templates)) fail("paths.templates '" + c.templates + "' does not exist");
    if (c.backend == "acf") {
      if (c.acf_in.empty()) fail("backend 'acf' needs paths.acf_in");
      if (!fs::is_directory(c.acf_in)) fail("paths.acf_in '" + c.acf_in + "' is not a directory");
    }
    const auto& corp = j.at("corpus");
    c.pairs_per_factor = corp.at("pairs_per_factor").get<std::size_t>();
    if (c.pairs_per_factor < 10) fail("corpus.pairs_per_factor must be at least 10");
    c.families = corp.at("families").get<std::vector<std::string>>();
    c.consistency_filter = corp.at("consistency_filter").get<bool>();

    const auto& t = j.at("toy");
    c.toy.d = t.at("d").get<std::size_t>();
    c.toy.n_layers = t.at("n_layers").get<std::size_t>();
    c.toy.gamma = toy::default_gamma(c.toy.n_layers);
    c.toy.noise_sigma = t.at("noise_sigma").get<double>();
    c.toy.a_sup = t.at("a_sup").get<double>();
    c.toy.a_rel = t.at("a_rel").get<double>();
    c.toy.kappa = t.at("kappa").get<double>();
    c.toy.pair_noise_share = t.at("pair_noise_share").get<double>();
    c.toy.bias_scale = t.at("bias_scale").get<double>();
    c.toy.seed = c.seed;
    toy::validate(c.toy);

    const auto& s = j.at("scan");
    c.k = s.at("k").get<std::size_t>();
    if (c.k < 2) fail("scan.k must be at least 2");
    c.scan.stable_accuracy = s.at("stable_accuracy").get<double>();
    c.scan.stable_min_layers = s.at("stable_min_layers").get<std::size_t>();
    if (!(c.scan.stable_accuracy > 0.5 && c.scan.stable_accuracy <= 1)) fail("scan.stable_accuracy must lie in (0.5, 1]");
    if (c.scan.stable_min_layers < 1) fail("scan.stable_min_layers must be at least 1");

    c.first_layer = j.at("layers").at("first").get<long>();
    c.last_layer = j.at("layers").at("last").get<long>();
    if (c.first_layer < 0) fail("layers.first must be nonnegative");

    const auto& r = j.at("regress");
    c.thresholds.significance = r.at("significance").get<double>();
    c.thresholds.placebo_beta = r.at("placebo_beta").get<double>();
    if (!(c.thresholds.significance > 0 && c.thresholds.significance < 1)) fail("regress.significance must lie in (0, 1)");
    if (!(c.thresholds.placebo_beta >= 0 && c.thresholds.placebo_beta < 1)) fail("regress.placebo_beta must lie in [0, 1)");
    const auto which = r.at("layers").get<std::string>();
    if (which != "stable" && which != "all") fail("regress.layers must be 'stable' or 'all'");
    c.regress_stable_only = which == "stable";

    const auto& st = j.at("steer");
    const auto& table = st.at("alpha_table");
    if (st.at("alpha").is_null()) {
      const std::string key = c.backend == "toy" ? "toy" : "generic";
      if (!table.contains(key)) fail("steer.alpha_table has no entry for '" + key + "'");
      c.alpha = table.at(key).get<double>();
    } else {
      c.alpha = st.at("alpha").get<double>();
    }
    if (!(c.alpha > 0)) fail("steer.alpha must be positive");
    c.alpha_grid = st.at("alpha_grid").get<std::vector<double>>();
    for (double a : c.alpha_grid)
      if (!(a > 0)) fail("steer.alpha_grid values must be positive");
    for (const auto& m : st.at("modes")) {
      auto mode = parse_mode(m.get<std::string>());
      if (!mode) fail("unknown steering mode '" + m.get<std::string>() + "'");
      c.modes.push_back(*mode);
    }
    c.gates.stimulate_min = st.at("gates").at("stimulate_min").get<double>();
    c.gates.suppress_max = st.at("gates").at("suppress_max").get<double>();
    if (!(c.gates.stimulate_min > 0) || !(c.gates.suppress_max < 0)) fail("steer.gates: stimulate_min must be > 0 and suppress_max < 0");

    for (const auto& f : j.at("factors")) {
      auto fac = parse_factor(f.get<std::string>());
      if (!fac) fail("unknown factor '" + f.get<std::string>() + "'");
      c.factors.push_back(*fac);
    }
    for (Factor f : all_factors)
      if (std::find(c.factors.begin(), c.factors.end(), f) == c.factors.end())
        fail("factors must include " + std::string(factor_name(f)));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Exit codes

enum ExitCode : int { exit_ok = 0, exit_usage = 2, exit_missing_input = 3, exit_phase = 4, exit_io = 5, exit_backend = 6 };

inline int exit_code_for(ErrorKind k) {
  switch (k) {
  case ErrorKind::config: return exit_usage;
  case ErrorKind::missing_input: return exit_missing_input;
  case ErrorKind::io: return exit_io;
  case ErrorKind::backend_unavailable: return exit_backend;
  default: return exit_phase;
  }
}

// ---------------------------------------------------------------------------
// Pipeline

enum class Phase { gen, capture, scan, purify, regress, steer, report };

inline constexpr std::array<Phase, 7> all_phases = {Phase::gen, Phase::capture, Phase::scan, Phase::purify,
                                                    Phase::regress, Phase::steer, Phase::report};

inline constexpr std::string_view phase_name(Phase p) {
  switch (p) {
  case Phase::gen: return "gen";
  case Phase::capture: return "capture";
  case Phase::scan: return "scan";
  case Phase::purify: return "purify";
  case Phase::regress: return "regress";
  case Phase::steer: return "steer";
  case Phase::report: return "report";
  }
  return "?";
}

class Pipeline {
public:
  explicit Pipeline(RunConfig cfg, std::ostream* log = &std::cerr) : cfg_(std::move(cfg)), log_(log) {}

  const RunConfig& config() const { return cfg_; }

  fs::path path(const std::string& rel) const { return cfg_.work_dir / rel; }

  void run(Phase p) {
    try {
      fs::create_directories(cfg_.work_dir);
      fs::create_directories(path("report"));
      load_manifest();
      artifacts_.clear();
      switch (p) {
      case Phase::gen: gen(); break;
      case Phase::capture: capture(); break;
      case Phase::scan: scan(); break;
      case Phase::purify: purify(); break;
      case Phase::regress: regress(); break;
      case Phase::steer: steer(); break;
      case Phase::report: report(); break;
      }
      record_phase(p);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(phase_name(p)) + ": " + e.what());
    } catch (const fs::filesystem_error& e) {
      throw Error(ErrorKind::io, std::string(phase_name(p)) + ": " + e.what());
    }
  }

  void run_all() {
    for (Phase p : all_phases) run(p);
  }

  std::string report_digest() const { return compute_report_digest(); }

private:
  // ---- helpers -----------------------------------------------------------

  void note(const std::string& msg) const {
    if (log_) *log_ << msg << '\n';
  }

  std::string rel_of(const fs::path& p) const { return fs::relative(p, cfg_.work_dir).generic_string(); }

  void written(const fs::path& p) { artifacts_.push_back(rel_of(p)); }

  void write_text(const std::string& rel, const std::string& text) {
    const auto p = path(rel);
    fs::create_directories(p.parent_path());
    report::write_text(p.string(), text);
    written(p);
  }

  void require(const fs::path& p, const std::string& hint) const {
    if (!fs::exists(p)) throw Error(ErrorKind::missing_input, "'" + rel_of(p) + "' not found; run `" + hint + "` first");
  }

  toy::ToyModel model() const { return toy::ToyModel(cfg_.toy); }

  void require_toy(const char* what) const {
    if (cfg_.backend == "tap")
      throw Error(ErrorKind::backend_unavailable, std::string(what) + " with backend 'tap' runs through the external model-tap adapter");
    if (cfg_.backend != "toy") throw Error(ErrorKind::backend_unavailable, std::string(what) + " needs the toy backend (backend is '" + cfg_.backend + "')");
  }

  std::vector<std::size_t> layer_range(std::size_t n_states) const {
    const std::size_t last = cfg_.last_layer < 0 ? n_states - 1 : static_cast<std::size_t>(cfg_.last_layer);
    if (last >= n_states || static_cast<std::size_t>(cfg_.first_layer) > last)
      throw Error(ErrorKind::config, "layer range [" + std::to_string(cfg_.first_layer) + ", " + std::to_string(cfg_.last_layer) +
                                         "] does not fit " + std::to_string(n_states) + " layers");
    std::vector<std::size_t> out;
    for (std::size_t l = static_cast<std::size_t>(cfg_.first_layer); l <= last; ++l) out.push_back(l);
    return out;
  }

  /// Configured layer range, narrowed to the layers every factor's scan found stable.
  std::vector<std::size_t> regress_layers(std::size_t n_states) const {
    auto layers = layer_range(n_states);
    if (!cfg_.regress_stable_only) return layers;
    const auto p = path("report/scan.json");
    require(p, "repe scan");
    std::ifstream f(p);
    const json scan = json::parse(f);
    std::size_t lo = 0, hi = n_states - 1;
    for (Factor fac : cfg_.factors) {
      const auto& r = scan.at(std::string(factor_name(fac))).at("stable_range");
      if (r.is_null()) {
        note("regress: " + std::string(factor_name(fac)) + " has no stable range; sweeping the configured layers");
        return layers;
      }
      lo = std::max(lo, r[0].get<std::size_t>());
      hi = std::min(hi, r[1].get<std::size_t>());
    }
    std::vector<std::size_t> out;
    for (std::size_t l : layers)
      if (l >= lo && l <= hi) out.push_back(l);
    if (out.empty()) {
      note("regress: stable ranges do not overlap; sweeping the configured layers");
      return layers;
    }
    return out;
  }

  static std::string pairs_rel(Factor f) { return "corpus/pairs_" + std::string(factor_name(f)) + ".jsonl"; }
  static std::string t1_rel(Factor f) { return "acts/t1_" + std::string(factor_name(f)) + ".acf"; }

  TemplateBank bank() const { return cfg_.templates.empty() ? default_template_bank() : load_template_bank(cfg_.templates); }

  // ---- phases ------------------------------------------------------------

  void gen() {
    const auto b = bank();
    fs::create_directories(path("corpus"));
    for (Factor f : cfg_.factors) {
      const auto pairs = build_contrastive_pairs(b, f, cfg_.pairs_per_factor, toy::derive_seed(cfg_.seed, 100, static_cast<std::uint64_t>(f)));
      save_jsonl(path(pairs_rel(f)).string(), pairs);
      written(path(pairs_rel(f)));
      note("gen: " + std::to_string(pairs.size()) + " " + std::string(factor_name(f)) + " pairs");
    }
    const auto vig = fill_templates(b, cfg_.families, toy::derive_seed(cfg_.seed, 101, 0));
    save_jsonl(path("corpus/vignettes.jsonl").string(), vig);
    written(path("corpus/vignettes.jsonl"));
    note("gen: " + std::to_string(vig.size()) + " vignettes");
  }

  void capture() {
    fs::create_directories(path("acts"));
    if (cfg_.backend == "tap")
      throw Error(ErrorKind::backend_unavailable, "capture with backend 'tap' is done by the external model-tap adapter; point backend 'acf' at its output");
    if (cfg_.backend == "acf") {
      // Externally captured sets: validate and take canonical copies.
      for (Factor f : cfg_.factors) {
        const fs::path src = fs::path(cfg_.acf_in) / fs::path(t1_rel(f)).filename();
        if (!fs::exists(src)) throw Error(ErrorKind::missing_input, "expected '" + src.string() + "'");
        save_acf(load_acf(src.string()), path(t1_rel(f)).string());
        written(path(t1_rel(f)));
      }
      const fs::path g1 = fs::path(cfg_.acf_in) / "g1.acf";
      if (!fs::exists(g1)) throw Error(ErrorKind::missing_input, "expected '" + g1.string() + "'");
      save_acf(load_acf(g1.string()), path("acts/g1.acf").string());
      written(path("acts/g1.acf"));
      return;
    }
    const auto m = model();
    for (Factor f : cfg_.factors) {
      require(path(pairs_rel(f)), "repe gen");
      const auto pairs = load_pairs(path(pairs_rel(f)).string());
      save_acf(toy::capture_pairs(m, pairs, cfg_.seed), path(t1_rel(f)).string());
      written(path(t1_rel(f)));
    }
    require(path("corpus/vignettes.jsonl"), "repe gen");
    const auto vig = load_vignettes(path("corpus/vignettes.jsonl").string());
    save_acf(toy::capture_vignettes(m, vig, cfg_.seed), path("acts/g1.acf").string());
    written(path("acts/g1.acf"));
    note("capture: " + m.model_id());
  }

  void scan() {
    VectorBundle raw;
    raw.kind = "raw";
    report::CsvTable folds_csv({"factor", "layer", "fold", "accuracy"});
    report::CsvTable summary_csv({"factor", "layer", "mean_accuracy", "in_stable_range"});
    report::CsvTable recovery_csv({"factor", "layer", "cumulative_gain", "cosine_to_planted"});
    report::Heatmap heat{"Held-out projection accuracy", {}, {}, {}};
    json summary = json::object();
    std::optional<toy::ToyModel> m;
    if (cfg_.backend == "toy") m.emplace(model());

    for (Factor f : cfg_.factors) {
      require(path(t1_rel(f)), "repe capture");
      const auto set = load_acf(path(t1_rel(f)).string());
      raw.dim = set.dim;
      const std::string source_hash = sha256_file(path(t1_rel(f)).string());

      std::set<std::string> keep;
      const bool filtered = cfg_.consistency_filter && m.has_value();
      if (filtered) keep = consistent_pairs(set, toy::assess_pairs(*m, set, f));
      const auto rows = pair_rows(set, filtered ? &keep : nullptr);
      if (rows.size() < cfg_.k)
        throw Error(ErrorKind::degenerate, std::string(factor_name(f)) + ": only " + std::to_string(rows.size()) + " pairs survive filtering");
      std::vector<std::string> ids;
      for (const auto& r : rows) ids.push_back(r.pair_id);
      const auto folds = kfold_split(ids, cfg_.k, toy::derive_seed(cfg_.seed, 102, static_cast<std::uint64_t>(f)));
      const auto rep = kfold_layer_scan(set, rows, folds, f, cfg_.scan);

      std::vector<std::size_t> degenerate;
      const auto cvs = fit_concept_vectors(set, rows, f, source_hash, &degenerate);
      for (const auto& cv : cvs) raw.entries.push_back(to_bundle_entry(cv));

      const std::string fname(factor_name(f));
      for (std::size_t l = 0; l < rep.mean_accuracy.size(); ++l) {
        for (std::size_t k = 0; k < rep.fold_accuracy[l].size(); ++k)
          folds_csv.row({fname, std::to_string(l), std::to_string(k), report::num(rep.fold_accuracy[l][k])});
        const bool in_range = rep.stable_range && l >= rep.stable_range->first && l <= rep.stable_range->second;
        summary_csv.row({fname, std::to_string(l), report::num(rep.mean_accuracy[l]), in_range ? "1" : "0"});
      }
      if (m)
        for (const auto& cv : cvs)
          recovery_csv.row({fname, std::to_string(cv.layer), report::num(m->cumulative_gain(cv.layer)),
                            report::num(cv.direction.dot(m->concept_axis(f, cv.layer)))});

      const Mat transfer = cross_layer_transfer(set, rows);
      std::vector<std::string> header{"train_layer"};
      for (Eigen::Index j = 0; j < transfer.cols(); ++j) header.push_back("test_" + std::to_string(j));
      report::CsvTable tcsv(header);
      for (Eigen::Index i = 0; i < transfer.rows(); ++i) {
        std::vector<std::string> row{std::to_string(i)};
        for (Eigen::Index j = 0; j < transfer.cols(); ++j) row.push_back(report::num(transfer(i, j)));
        tcsv.row(row);
      }
      write_text("report/transfer_" + fname + ".csv", tcsv.str());

      heat.row_labels.push_back(fname);
      heat.values.push_back(rep.mean_accuracy);
      json s = {{"pairs_total", set.size() / 2}, {"pairs_used", rows.size()}, {"k", cfg_.k}, {"degenerate_layers", degenerate},
                {"source_sha256", source_hash}};
      s["stable_range"] = rep.stable_range ? json::array({rep.stable_range->first, rep.stable_range->second}) : json(nullptr);
      summary[fname] = s;
      note("scan: " + fname + " pairs=" + std::to_string(rows.size()) +
           (rep.stable_range ? " stable=[" + std::to_string(rep.stable_range->first) + "," + std::to_string(rep.stable_range->second) + "]"
                             : " stable=none"));
    }
    for (std::size_t l = 0; l < heat.values.front().size(); ++l) heat.col_labels.push_back(std::to_string(l));

    fs::create_directories(path("vectors"));
    save_bundle(raw, path("vectors/raw.cvb").string());
    written(path("vectors/raw.cvb"));
    write_text("report/scan_folds.csv", folds_csv.str());
    write_text("report/scan_summary.csv", summary_csv.str());
    if (m) write_text("report/toy_recovery.csv", recovery_csv.str());
    write_text("report/scan_accuracy.svg", report::svg_heatmap(heat));
    write_text("report/scan.json", summary.dump(2) + "\n");
  }

  void purify() {
    require(path("vectors/raw.cvb"), "repe scan");
    const auto raw = load_bundle(path("vectors/raw.cvb").string());
    const auto out = purify_bundle(raw);
    save_bundle(out.bundle, path("vectors/purified.cvb").string());
    written(path("vectors/purified.cvb"));
    report::CsvTable csv({"factor", "layer", "residual_norm", "max_abs_dot_confounder"});
    for (const auto& e : out.bundle.entries) {
      double worst = 0;
      for (Factor c : e.confounders) worst = std::max(worst, std::abs(e.direction.dot(raw.at(c, e.layer).direction)));
      csv.row({std::string(factor_name(e.factor)), std::to_string(e.layer), report::num(e.residual_norm), report::num(worst)});
    }
    write_text("report/purify.csv", csv.str());
    write_text("report/purify.json", json{{"failures", out.failures}}.dump(2) + "\n");
    for (const auto& f : out.failures) note("purify: skipped " + f);
  }

  void regress() {
    require(path("vectors/purified.cvb"), "repe purify");
    require(path("vectors/raw.cvb"), "repe scan");
    require(path("acts/g1.acf"), "repe capture");
    const auto raw = load_bundle(path("vectors/raw.cvb").string());
    const auto pur = load_bundle(path("vectors/purified.cvb").string());
    const auto g1 = load_acf(path("acts/g1.acf").string());
    const auto layers = regress_layers(g1.n_layers);
    const auto reports = layer_sweep(g1, raw, pur, layers, cfg_.thresholds);

    report::CsvTable csv({"layer", "factor", "beta", "p", "r2", "pearson", "antecedent_ok", "placebo_ok", "valid", "error"});
    report::Heatmap heat{"Standardized regression weights", {}, {}, {}};
    for (Factor f : antecedent_factors) heat.row_labels.push_back(std::string(factor_name(f)));
    heat.values.assign(3, {});
    std::vector<std::size_t> valid_layers;
    for (const auto& r : reports) {
      heat.col_labels.push_back(std::to_string(r.layer));
      for (std::size_t i = 0; i < 3; ++i) {
        const Factor f = antecedent_factors[i];
        const std::string fname(factor_name(f));
        if (r.error) {
          csv.row({std::to_string(r.layer), fname, "nan", "nan", "nan", "nan", "0", "0", "0", *r.error});
          heat.values[i].push_back(std::nan(""));
          continue;
        }
        csv.row({std::to_string(r.layer), fname, report::num(r.beta.at(f)), report::num(r.p_value.at(f)), report::num(r.r2),
                 report::num(r.pearson_r), r.flags.antecedent_ok ? "1" : "0", r.flags.placebo_ok ? "1" : "0", r.flags.overall ? "1" : "0", ""});
        heat.values[i].push_back(r.beta.at(f));
      }
      if (r.flags.overall) valid_layers.push_back(r.layer);
    }
    write_text("report/regression.csv", csv.str());
    write_text("report/regression_beta.svg", report::svg_heatmap(heat));
    write_text("report/regression.json", json{{"valid_layers", valid_layers}, {"n", g1.size()}}.dump(2) + "\n");
    note("regress: " + std::to_string(valid_layers.size()) + " of " + std::to_string(reports.size()) + " layers pass the validity check");
  }

  void steer() {
    require_toy("steer");
    require(path("vectors/purified.cvb"), "repe purify");
    require(path("corpus/vignettes.jsonl"), "repe gen");
    const auto pur = load_bundle(path("vectors/purified.cvb").string());
    const auto vig = load_vignettes(path("corpus/vignettes.jsonl").string());
    const auto m = model();
    const toy::ToyBackend backend(m, vig, cfg_.seed);

    std::vector<BaselineItem> items;
    std::map<std::string, double> scores;
    for (const auto& v : vig) {
      items.push_back({v.vignette_id, v.jealousy_gt});
      scores[v.vignette_id] = backend.baseline_score(v.vignette_id);
    }
    const auto part = partition_baseline(items, scores);
    report::CsvTable pcsv({"vignette_id", "ground_truth", "baseline_score", "group"});
    std::set<std::string> low(part.low.begin(), part.low.end()), high(part.high.begin(), part.high.end());
    for (const auto& it : items)
      pcsv.row({it.id, std::to_string(it.ground_truth), report::num(scores[it.id]), low.contains(it.id) ? "low" : high.contains(it.id) ? "high" : ""});
    write_text("report/partition.csv", pcsv.str());
    if (part.empty_warning)
      note("steer: warning: partition sizes low=" + std::to_string(part.low.size()) + " high=" + std::to_string(part.high.size()));

    ScanRequest req;
    req.layers = layer_range(backend.n_states());
    req.modes = cfg_.modes;
    req.alphas = {cfg_.alpha};
    for (double a : cfg_.alpha_grid)
      if (std::find(req.alphas.begin(), req.alphas.end(), a) == req.alphas.end()) req.alphas.push_back(a);
    req.gate_alpha = cfg_.alpha;
    req.gates = cfg_.gates;
    const auto scan = layer_intervention_scan(backend, part, pur, req);

    report::CsvTable csv({"layer", "factor", "mode", "alpha", "mean_delta", "mean_delta_pct", "n", "error"});
    for (const auto& c : scan.cells)
      csv.row({std::to_string(c.layer), std::string(factor_name(c.factor)), std::string(mode_name(c.mode)), report::num(c.alpha),
               report::num(c.mean_delta), report::num(c.mean_delta_pct), std::to_string(c.n), c.error.value_or("")});
    write_text("report/intervention.csv", csv.str());

    for (SteerMode mode : cfg_.modes) {
      report::Heatmap heat{"Score shift % (" + std::string(mode_name(mode)) + ", alpha " + report::num(scan.gate_alpha) + ")", {}, {}, {}};
      for (std::size_t l : req.layers) heat.col_labels.push_back(std::to_string(l));
      std::vector<report::Series> traj;
      for (Factor f : req.factors) {
        heat.row_labels.push_back(std::string(factor_name(f)));
        std::vector<double> row;
        report::Series s{std::string(factor_name(f)), {}, {}};
        for (std::size_t l : req.layers) {
          const auto* c = scan.find(l, f, mode, scan.gate_alpha);
          const double v = c && !c->error ? c->mean_delta_pct : std::nan("");
          row.push_back(v);
          s.x.push_back(static_cast<double>(l));
          s.y.push_back(c && !c->error ? c->mean_delta : std::nan(""));
        }
        heat.values.push_back(row);
        traj.push_back(s);
      }
      const std::string mname(mode_name(mode));
      write_text("report/intervention_" + mname + ".svg", report::svg_heatmap(heat));
      write_text("report/trajectory_" + mname + ".svg", report::svg_lines("Mean score shift by layer (" + mname + ")", traj, "layer", "mean delta"));
    }

    json s = {{"alpha", scan.gate_alpha}, {"g_low", part.low.size()}, {"g_high", part.high.size()},
              {"delta_pct_denominator", "score range 4 (delta_pct = 25 * delta)"}};
    s["l_target"] = scan.target ? json::array({scan.target->first, scan.target->second}) : json(nullptr);
    json ranking = json::array();
    if (scan.target) {
      for (const auto& r : rank_factors(scan))
        ranking.push_back({{"factor", factor_name(r.factor)}, {"mean_abs_delta", r.mean_abs_delta}, {"tied", r.tied}});
      note("steer: L_target=[" + std::to_string(scan.target->first) + "," + std::to_string(scan.target->second) + "]");
    } else {
      note("steer: no layer passes the L_target gates");
    }
    s["ranking"] = ranking;
    write_text("report/steer.json", s.dump(2) + "\n");
  }

  void report() {
    json summary = json::object();
    for (const char* name : {"scan", "purify", "regression", "steer"}) {
      const auto p = path(std::string("report/") + name + ".json");
      if (!fs::exists(p)) continue;
      std::ifstream f(p);
      summary[name] = json::parse(f);
    }
    if (summary.empty()) throw Error(ErrorKind::missing_input, "no phase outputs under report/; run the earlier phases first");
    summary["config_sha256"] = config_digest();
    write_text("report/summary.json", summary.dump(2) + "\n");
    std::string md = "# repe run summary\n\n";
    md += "- backend: " + cfg_.backend + "\n- seed: " + std::to_string(cfg_.seed) + "\n";
    if (summary.contains("steer")) {
      const auto& s = summary["steer"];
      md += "- L_target: " + (s["l_target"].is_null() ? std::string("none") : s["l_target"].dump()) + "\n";
      md += "- ranking:";
      for (const auto& r : s["ranking"]) md += " " + r["factor"].get<std::string>();
      md += "\n- delta_pct = 25 * delta (score range 4)\n";
    }
    if (summary.contains("regression")) md += "- valid regression layers: " + summary["regression"]["valid_layers"].dump() + "\n";
    write_text("report/README.md", md);
    note("report: digest " + compute_report_digest());
  }

  // ---- manifest ----------------------------------------------------------

  // The work directory is where a run lives, not what it computes.
  std::string config_digest() const {
    json c = cfg_.effective;
    c["paths"].erase("work_dir");
    return sha256_hex(c.dump());
  }

  /// Digest of every file under report/, keyed by relative path. No timestamps involved.
  std::string compute_report_digest() const {
    std::vector<std::string> files;
    const auto dir = path("report");
    if (fs::exists(dir))
      for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(rel_of(e.path()));
    std::sort(files.begin(), files.end());
    Sha256 h;
    for (const auto& f : files) h.update(f).update("\n").update(sha256_file(path(f).string())).update("\n");
    return h.hex();
  }

  void load_manifest() {
    manifest_ = json::object();
    const auto p = path("manifest.json");
    if (!fs::exists(p)) return;
    try {
      std::ifstream f(p);
      manifest_ = json::parse(f);
    } catch (const json::parse_error&) {
      note("manifest.json is unreadable; starting a new one");
      manifest_ = json::object();
    }
  }

  static std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  void record_phase(Phase p) {
    manifest_["tool_version"] = tool_version;
    manifest_["config_sha256"] = config_digest();
    manifest_["config"] = cfg_.effective;
    json arts = json::object();
    for (const auto& a : artifacts_) arts[a] = sha256_file(path(a).string());
    manifest_["phases"][std::string(phase_name(p))] = {{"artifacts", arts}, {"finished_at", utc_now()}};
    // Digest groups rebuilt from the recorded phases.
    json corpus = json::object(), bundles = json::object();
    for (auto& [name, ph] : manifest_["phases"].items())
      for (auto& [rel, digest] : ph["artifacts"].items()) {
        if (rel.rfind("corpus/", 0) == 0) corpus[rel] = digest;
        if (rel.rfind("vectors/", 0) == 0) bundles[rel] = digest;
      }
    manifest_["corpus_sha256"] = corpus;
    manifest_["bundle_sha256"] = bundles;
    manifest_["report_sha256"] = compute_report_digest();
    if (!manifest_.contains("created_at")) manifest_["created_at"] = utc_now();
    manifest_["updated_at"] = utc_now();
    report::write_text(path("manifest.json").string(), manifest_.dump(2) + "\n");
  }

  RunConfig cfg_;
  std::ostream* log_;
  json manifest_;
  std::vector<std::string> artifacts_;
};

} // namespace repe
