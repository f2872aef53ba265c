#pragma once

// Stimulus corpora: atomic contrastive pairs (extraction set) and slot-filled
// vignettes (weighting / intervention set), both stored as JSON Lines.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "repe/common.hpp"
#include "repe/default_bank.hpp"

namespace repe {

struct ContrastivePair {
  std::string pair_id;
  Factor factor = Factor::superiority;
  std::string text_pos;
  std::string text_neg;
  std::string domain_tag;
  bool verified = false;
  // Labels of the non-target factors, identical for both halves.
  std::map<Factor, int> context;

  friend bool operator==(const ContrastivePair&, const ContrastivePair&) = default;
};

struct Vignette {
  std::string vignette_id;
  std::string family;
  std::string text;
  int sup = 0;
  int rel = 0;
  int weekday = 0;
  int jealousy_gt = 1;
  std::map<std::string, std::string> slots; // slot name -> fragment id
  std::string other;                        // comparison person's name

  friend bool operator==(const Vignette&, const Vignette&) = default;
};

// ---------------------------------------------------------------------------
// Ground truth

/// Rule-based 1..5 jealousy label. Weekday is deliberately not an input.
constexpr int assign_ground_truth(int sup, int rel) {
  if (sup == 1 && rel == 1) return 5;
  if (sup == 1) return 2;
  return 1;
}

// ---------------------------------------------------------------------------
// Template bank

enum class Slot : std::uint8_t { relevance_context, weekday, failure, superiority_event };

inline constexpr std::array<Slot, 4> slot_order = {Slot::relevance_context, Slot::weekday, Slot::failure,
                                                   Slot::superiority_event};

inline constexpr std::string_view slot_name(Slot s) {
  switch (s) {
  case Slot::relevance_context: return "relevance_context";
  case Slot::weekday: return "weekday";
  case Slot::failure: return "failure";
  case Slot::superiority_event: return "superiority_event";
  }
  return "?";
}

/// The factor whose polarity selects fragments for a slot.
inline constexpr Factor slot_factor(Slot s) {
  switch (s) {
  case Slot::relevance_context: return Factor::relevance;
  case Slot::weekday: return Factor::weekday;
  case Slot::failure:
  case Slot::superiority_event: return Factor::superiority;
  }
  return Factor::superiority;
}

struct Fragment {
  std::string id;
  std::string text;
  int polarity = 0;
};

struct ScenarioFamily {
  std::string id;
  std::string domain;
  std::vector<std::string> names;
  std::map<Slot, std::vector<Fragment>> slots;

  std::vector<const Fragment*> fragments(Slot s, int polarity) const {
    std::vector<const Fragment*> out;
    if (auto it = slots.find(s); it != slots.end())
      for (const auto& f : it->second)
        if (f.polarity == polarity) out.push_back(&f);
    return out;
  }
};

struct TemplateBank {
  std::vector<ScenarioFamily> families;

  const ScenarioFamily* family(std::string_view id) const {
    for (const auto& f : families)
      if (f.id == id) return &f;
    return nullptr;
  }
};

inline void validate_family(const ScenarioFamily& fam) {
  if (fam.names.empty()) throw Error(ErrorKind::schema, "family '" + fam.id + "' has no names");
  for (Slot s : slot_order)
    for (int p : {0, 1})
      if (fam.fragments(s, p).empty())
        throw Error(ErrorKind::schema, "family '" + fam.id + "' lacks a polarity-" + std::to_string(p) + " fragment for slot " +
                                           std::string(slot_name(s)));
}

inline void validate(const TemplateBank& bank) {
  std::set<std::string> ids;
  for (const auto& fam : bank.families) {
    if (!ids.insert(fam.id).second) throw Error(ErrorKind::duplicate, "duplicate family id '" + fam.id + "'");
    validate_family(fam);
  }
}

inline TemplateBank parse_template_bank(const nlohmann::json& j) {
  TemplateBank bank;
  try {
    for (const auto& jf : j.at("families")) {
      ScenarioFamily fam;
      fam.id = jf.at("id").get<std::string>();
      fam.domain = jf.value("domain", "");
      fam.names = jf.value("names", std::vector<std::string>{});
      for (const auto& [name, frags] : jf.at("slots").items()) {
        auto slot = std::find_if(slot_order.begin(), slot_order.end(), [&](Slot s) { return slot_name(s) == name; });
        if (slot == slot_order.end()) throw Error(ErrorKind::schema, "family '" + fam.id + "': unknown slot '" + name + "'");
        std::map<int, int> seen;
        for (const auto& jfrag : frags) {
          Fragment f;
          f.polarity = jfrag.at("polarity").get<int>();
          if (f.polarity != 0 && f.polarity != 1)
            throw Error(ErrorKind::schema, "family '" + fam.id + "': fragment polarity must be 0 or 1");
          f.text = jfrag.at("text").get<std::string>();
          f.id = fam.id + "/" + name + "/" + std::to_string(f.polarity) + "/" + std::to_string(seen[f.polarity]++);
          fam.slots[*slot].push_back(std::move(f));
        }
      }
      bank.families.push_back(std::move(fam));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::schema, std::string("template bank: ") + e.what());
  }
  validate(bank);
  return bank;
}

inline nlohmann::json to_json(const TemplateBank& bank) {
  nlohmann::json fams = nlohmann::json::array();
  for (const auto& fam : bank.families) {
    nlohmann::json slots = nlohmann::json::object();
    for (const auto& [s, frags] : fam.slots) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& f : frags) arr.push_back({{"polarity", f.polarity}, {"text", f.text}});
      slots[std::string(slot_name(s))] = std::move(arr);
    }
    fams.push_back({{"id", fam.id}, {"domain", fam.domain}, {"names", fam.names}, {"slots", std::move(slots)}});
  }
  return {{"version", 1}, {"families", std::move(fams)}};
}

inline TemplateBank default_template_bank() {
  return parse_template_bank(nlohmann::json::parse(default_template_bank_json));
}

inline TemplateBank load_template_bank(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::missing_input, "cannot open template bank '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::schema, "template bank '" + path + "': " + e.what());
  }
  return parse_template_bank(j);
}

namespace detail {

inline std::string substitute_other(std::string text, const std::string& name) {
  static constexpr std::string_view key = "{other}";
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + name.size()))
    text.replace(pos, key.size(), name);
  return text;
}

struct Composition {
  std::map<Slot, const Fragment*> chosen;
  std::string other;

  std::string text() const {
    std::string out;
    for (Slot s : slot_order) {
      if (!out.empty()) out += ' ';
      out += substitute_other(chosen.at(s)->text, other);
    }
    return out;
  }
};

} // namespace detail

/// One vignette per (family x sup x rel x weekday). Fragment and name choices
/// come from a generator seeded with `seed`; an empty selection means every family.
inline std::vector<Vignette> fill_templates(const TemplateBank& bank, std::span<const std::string> families,
                                            std::uint64_t seed) {
  std::vector<const ScenarioFamily*> selected;
  if (families.empty()) {
    for (const auto& f : bank.families) selected.push_back(&f);
  } else {
    for (const auto& id : families) {
      const auto* f = bank.family(id);
      if (!f) throw Error(ErrorKind::invalid_argument, "unknown scenario family '" + id + "'");
      selected.push_back(f);
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<Vignette> out;
  for (const auto* fam : selected) {
    validate_family(*fam);
    for (int sup : {0, 1})
      for (int rel : {0, 1})
        for (int wk : {0, 1}) {
          const std::map<Factor, int> labels = {{Factor::superiority, sup}, {Factor::relevance, rel}, {Factor::weekday, wk}};
          detail::Composition comp;
          Vignette v;
          for (Slot s : slot_order) {
            auto options = fam->fragments(s, labels.at(slot_factor(s)));
            std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
            comp.chosen[s] = options[pick(rng)];
            v.slots[std::string(slot_name(s))] = comp.chosen[s]->id;
          }
          std::uniform_int_distribution<std::size_t> pick_name(0, fam->names.size() - 1);
          comp.other = fam->names[pick_name(rng)];
          v.vignette_id = fam->id + "-s" + std::to_string(sup) + "r" + std::to_string(rel) + "w" + std::to_string(wk);
          v.family = fam->id;
          v.text = comp.text();
          v.sup = sup;
          v.rel = rel;
          v.weekday = wk;
          v.jealousy_gt = assign_ground_truth(sup, rel);
          v.other = comp.other;
          out.push_back(std::move(v));
        }
  }
  return out;
}

/// Builds `count` matched pairs for `factor` from the bank. Both halves use the same
/// fragments except those keyed to the target factor. For jealousy the positive half
/// is a (sup=1, rel=1) scenario and the negative half one of the low-jealousy cells.
inline std::vector<ContrastivePair> build_contrastive_pairs(const TemplateBank& bank, Factor factor, std::size_t count,
                                                            std::uint64_t seed) {
  validate(bank);
  struct Candidate {
    const ScenarioFamily* fam;
    detail::Composition pos, neg;
    std::map<Factor, int> context;
  };
  std::vector<Candidate> cands;
  auto first = [](const ScenarioFamily& f, Slot s, int p) { return f.fragments(s, p).front(); };

  for (const auto& fam : bank.families) {
    const auto& ctx_all = fam.slots.at(Slot::relevance_context);
    for (const auto& name : fam.names) {
      for (int wk : {1, 0}) {
        const Fragment* wk_frag = first(fam, Slot::weekday, wk);
        switch (factor) {
        case Factor::superiority:
          for (const auto& ctx : ctx_all) {
            Candidate c{&fam, {}, {}, {{Factor::relevance, ctx.polarity}, {Factor::weekday, wk}}};
            for (auto* comp : {&c.pos, &c.neg}) {
              const int p = comp == &c.pos ? 1 : 0;
              comp->other = name;
              comp->chosen = {{Slot::relevance_context, &ctx},
                              {Slot::weekday, wk_frag},
                              {Slot::failure, first(fam, Slot::failure, p)},
                              {Slot::superiority_event, first(fam, Slot::superiority_event, p)}};
            }
            cands.push_back(std::move(c));
          }
          break;
        case Factor::relevance: {
          auto hi = fam.fragments(Slot::relevance_context, 1);
          auto lo = fam.fragments(Slot::relevance_context, 0);
          for (std::size_t i = 0; i < std::min(hi.size(), lo.size()); ++i)
            for (int s : {1, 0}) {
              Candidate c{&fam, {}, {}, {{Factor::superiority, s}, {Factor::weekday, wk}}};
              for (auto* comp : {&c.pos, &c.neg}) {
                comp->other = name;
                comp->chosen = {{Slot::relevance_context, comp == &c.pos ? hi[i] : lo[i]},
                                {Slot::weekday, wk_frag},
                                {Slot::failure, first(fam, Slot::failure, s)},
                                {Slot::superiority_event, first(fam, Slot::superiority_event, s)}};
              }
              cands.push_back(std::move(c));
            }
          break;
        }
        case Factor::weekday:
          if (wk == 0) break; // polarity is the varied slot; enumerate once
          for (const auto& ctx : ctx_all)
            for (int s : {1, 0}) {
              Candidate c{&fam, {}, {}, {{Factor::superiority, s}, {Factor::relevance, ctx.polarity}}};
              for (auto* comp : {&c.pos, &c.neg}) {
                comp->other = name;
                comp->chosen = {{Slot::relevance_context, &ctx},
                                {Slot::weekday, first(fam, Slot::weekday, comp == &c.pos ? 1 : 0)},
                                {Slot::failure, first(fam, Slot::failure, s)},
                                {Slot::superiority_event, first(fam, Slot::superiority_event, s)}};
              }
              cands.push_back(std::move(c));
            }
          break;
        case Factor::jealousy: {
          auto hi = fam.fragments(Slot::relevance_context, 1);
          auto lo = fam.fragments(Slot::relevance_context, 0);
          for (std::size_t i = 0; i < std::min(hi.size(), lo.size()); ++i)
            for (auto [ns, nr] : {std::pair{0, 0}, std::pair{1, 0}, std::pair{0, 1}}) {
              Candidate c{&fam, {}, {}, {{Factor::weekday, wk}}};
              c.pos.other = c.neg.other = name;
              c.pos.chosen = {{Slot::relevance_context, hi[i]},
                              {Slot::weekday, wk_frag},
                              {Slot::failure, first(fam, Slot::failure, 1)},
                              {Slot::superiority_event, first(fam, Slot::superiority_event, 1)}};
              c.neg.chosen = {{Slot::relevance_context, nr ? hi[i] : lo[i]},
                              {Slot::weekday, wk_frag},
                              {Slot::failure, first(fam, Slot::failure, ns)},
                              {Slot::superiority_event, first(fam, Slot::superiority_event, ns)}};
              cands.push_back(std::move(c));
            }
          break;
        }
        }
      }
    }
  }
  if (cands.empty()) throw Error(ErrorKind::invalid_argument, "template bank yields no contrastive pairs");

  std::mt19937_64 rng(seed);
  std::shuffle(cands.begin(), cands.end(), rng);
  std::vector<ContrastivePair> out;
  out.reserve(count);
  char buf[32];
  for (std::size_t i = 0; i < count; ++i) {
    const auto& c = cands[i % cands.size()];
    std::snprintf(buf, sizeof buf, "%s-%03zu", std::string(factor_name(factor)).c_str(), i);
    ContrastivePair p;
    p.pair_id = buf;
    p.factor = factor;
    p.text_pos = c.pos.text();
    p.text_neg = c.neg.text();
    p.domain_tag = c.fam->domain;
    p.verified = true;
    p.context = c.context;
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON Lines I/O

inline nlohmann::json to_json(const ContrastivePair& p) {
  nlohmann::json ctx = nlohmann::json::object();
  for (const auto& [f, v] : p.context) ctx[std::string(factor_name(f))] = v;
  return {{"pair_id", p.pair_id},   {"factor", factor_name(p.factor)}, {"text_pos", p.text_pos}, {"text_neg", p.text_neg},
          {"domain_tag", p.domain_tag}, {"verified", p.verified},      {"context", std::move(ctx)}};
}

inline nlohmann::json to_json(const Vignette& v) {
  return {{"vignette_id", v.vignette_id}, {"family", v.family}, {"text", v.text},       {"sup", v.sup},
          {"rel", v.rel},                 {"weekday", v.weekday}, {"jealousy_gt", v.jealousy_gt}, {"slots", v.slots},
          {"other", v.other}};
}

template <typename T> void save_jsonl(std::ostream& out, std::span<const T> items) {
  for (const auto& it : items) out << to_json(it).dump() << '\n';
}

template <typename T> void save_jsonl(const std::string& path, const std::vector<T>& items) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  save_jsonl<T>(f, std::span<const T>(items));
}

namespace detail {

template <typename Fn> void for_each_jsonl_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::schema, "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::schema, "line " + std::to_string(lineno) + ": not an object");
    fn(j, lineno);
  }
}

inline std::string require_string(const nlohmann::json& j, const char* key, std::size_t lineno) {
  if (!j.contains(key) || !j[key].is_string())
    throw Error(ErrorKind::schema, "line " + std::to_string(lineno) + ": missing string field '" + key + "'");
  return j[key].get<std::string>();
}

inline int require_binary(const nlohmann::json& j, const char* key, std::size_t lineno) {
  if (!j.contains(key) || !j[key].is_number_integer() || (j[key] != 0 && j[key] != 1))
    throw Error(ErrorKind::schema, "line " + std::to_string(lineno) + ": field '" + key + "' must be 0 or 1");
  return j[key].get<int>();
}

} // namespace detail

inline std::vector<ContrastivePair> load_pairs(std::istream& in) {
  std::vector<ContrastivePair> out;
  std::set<std::string> ids;
  detail::for_each_jsonl_line(in, [&](const nlohmann::json& j, std::size_t lineno) {
    ContrastivePair p;
    p.pair_id = detail::require_string(j, "pair_id", lineno);
    const auto fname = detail::require_string(j, "factor", lineno);
    auto f = parse_factor(fname);
    if (!f) throw Error(ErrorKind::schema, "line " + std::to_string(lineno) + ": unknown factor '" + fname + "'");
    p.factor = *f;
    p.text_pos = detail::require_string(j, "text_pos", lineno);
    p.text_neg = detail::require_string(j, "text_neg", lineno);
    if (p.text_pos == p.text_neg)
      throw Error(ErrorKind::schema, "line " + std::to_string(lineno) + ": text_pos equals text_neg");
    p.domain_tag = j.value("domain_tag", "");
    p.verified = j.value("verified", false);
    if (j.contains("context")) {
      for (const auto& [name, v] : j["context"].items()) {
        auto cf = parse_factor(name);
        if (!cf || !v.is_number_integer() || (v != 0 && v != 1))
          throw Error(ErrorKind::schema, "line " + std::to_string(lineno) + ": bad context entry '" + name + "'");
        p.context[*cf] = v.get<int>();
      }
    }
    if (!ids.insert(p.pair_id).second)
      throw Error(ErrorKind::duplicate, "line " + std::to_string(lineno) + ": duplicate pair_id '" + p.pair_id + "'");
    out.push_back(std::move(p));
  });
  return out;
}

inline std::vector<ContrastivePair> load_pairs(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::missing_input, "cannot open pair corpus '" + path + "'");
  return load_pairs(f);
}

inline std::vector<Vignette> load_vignettes(std::istream& in) {
  std::vector<Vignette> out;
  std::set<std::string> ids;
  detail::for_each_jsonl_line(in, [&](const nlohmann::json& j, std::size_t lineno) {
    Vignette v;
    v.vignette_id = detail::require_string(j, "vignette_id", lineno);
    v.family = j.value("family", "");
    v.text = detail::require_string(j, "text", lineno);
    v.sup = detail::require_binary(j, "sup", lineno);
    v.rel = detail::require_binary(j, "rel", lineno);
    v.weekday = detail::require_binary(j, "weekday", lineno);
    if (!j.contains("jealousy_gt") || !j["jealousy_gt"].is_number_integer())
      throw Error(ErrorKind::schema, "line " + std::to_string(lineno) + ": missing jealousy_gt");
    v.jealousy_gt = j["jealousy_gt"].get<int>();
    if (v.jealousy_gt != assign_ground_truth(v.sup, v.rel))
      throw Error(ErrorKind::schema, "line " + std::to_string(lineno) + ": jealousy_gt disagrees with the label map");
    v.slots = j.value("slots", std::map<std::string, std::string>{});
    v.other = j.value("other", "");
    if (!ids.insert(v.vignette_id).second)
      throw Error(ErrorKind::duplicate, "line " + std::to_string(lineno) + ": duplicate vignette_id '" + v.vignette_id + "'");
    out.push_back(std::move(v));
  });
  return out;
}

inline std::vector<Vignette> load_vignettes(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::missing_input, "cannot open vignette corpus '" + path + "'");
  return load_vignettes(f);
}

// ---------------------------------------------------------------------------
// Folds and filtering

struct FoldAssignment {
  std::size_t k = 0;
  std::map<std::string, std::size_t> fold_of; // pair_id -> fold

  std::size_t fold_size(std::size_t fold) const {
    return static_cast<std::size_t>(std::count_if(fold_of.begin(), fold_of.end(), [&](auto& kv) { return kv.second == fold; }));
  }
};

/// Pair-level folds: shuffle ids with `seed`, deal round-robin.
inline FoldAssignment kfold_split(std::span<const std::string> pair_ids, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::invalid_argument, "k must be at least 2");
  if (pair_ids.size() < k)
    throw Error(ErrorKind::invalid_argument,
                "k=" + std::to_string(k) + " exceeds the number of pairs (" + std::to_string(pair_ids.size()) + ")");
  std::vector<std::string> ids(pair_ids.begin(), pair_ids.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw Error(ErrorKind::duplicate, "duplicate pair id in fold split");
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  FoldAssignment fa;
  fa.k = k;
  for (std::size_t i = 0; i < ids.size(); ++i) fa.fold_of[ids[i]] = i % k;
  return fa;
}

inline FoldAssignment kfold_split(std::span<const ContrastivePair> pairs, std::size_t k, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& p : pairs) ids.push_back(p.pair_id);
  return kfold_split(ids, k, seed);
}

/// Keeps the items whose prediction agrees with their label under `rule(item, prediction)`.
/// `key(item)` gives the id used to look up predictions; a missing prediction is an error.
template <typename Item, typename Prediction, typename KeyFn, typename Rule>
std::vector<Item> consistency_filter(std::span<const Item> items, const std::map<std::string, Prediction>& predictions,
                                     KeyFn&& key, Rule&& rule) {
  std::vector<Item> kept;
  for (const auto& it : items) {
    const std::string id = key(it);
    auto p = predictions.find(id);
    if (p == predictions.end()) throw Error(ErrorKind::missing_input, "no prediction for '" + id + "'");
    if (rule(it, p->second)) kept.push_back(it);
  }
  return kept;
}

} // namespace repe
