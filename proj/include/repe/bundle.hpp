#pragma once

// Concept-vector bundle (CVB1): per-(factor, layer) unit directions.
//
//   "CVB1" | u32 count | u32 dim | u32 meta_len | meta JSON | count*dim f64 LE
//
// meta = {"kind": "raw"|"purified", "entries": [{"factor", "layer", ...}]}; entry i
// owns payload values [i*dim, (i+1)*dim).

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "repe/common.hpp"

namespace repe {

struct BundleEntry {
  Factor factor = Factor::superiority;
  std::size_t layer = 0;
  Vec direction;
  std::size_t n_pairs_used = 0;
  std::string source_hash;
  std::vector<Factor> confounders;
  double residual_norm = 0; // purified only: norm before re-normalization

  friend bool operator==(const BundleEntry& a, const BundleEntry& b) {
    return a.factor == b.factor && a.layer == b.layer && a.direction == b.direction && a.n_pairs_used == b.n_pairs_used &&
           a.source_hash == b.source_hash && a.confounders == b.confounders && a.residual_norm == b.residual_norm;
  }
};

struct VectorBundle {
  std::string kind = "raw";
  std::size_t dim = 0;
  std::vector<BundleEntry> entries;

  const BundleEntry* find(Factor f, std::size_t layer) const {
    for (const auto& e : entries)
      if (e.factor == f && e.layer == layer) return &e;
    return nullptr;
  }

  const BundleEntry& at(Factor f, std::size_t layer) const {
    if (const auto* e = find(f, layer)) return *e;
    throw Error(ErrorKind::missing_input, std::string(kind) + " bundle has no " + std::string(factor_name(f)) + " vector at layer " +
                                              std::to_string(layer));
  }

  std::vector<std::size_t> layers(Factor f) const {
    std::vector<std::size_t> out;
    for (const auto& e : entries)
      if (e.factor == f) out.push_back(e.layer);
    std::sort(out.begin(), out.end());
    return out;
  }

  friend bool operator==(const VectorBundle&, const VectorBundle&) = default;
};

inline constexpr std::array<char, 4> cvb_magic = {'C', 'V', 'B', '1'};

inline std::vector<std::uint8_t> encode_bundle(const VectorBundle& b) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : b.entries) {
    if (e.direction.size() != static_cast<Eigen::Index>(b.dim))
      throw Error(ErrorKind::invalid_argument, "bundle entry dimension mismatch");
    nlohmann::json j = {{"factor", factor_name(e.factor)}, {"layer", e.layer}, {"n_pairs_used", e.n_pairs_used}};
    if (!e.source_hash.empty()) j["source_hash"] = e.source_hash;
    if (!e.confounders.empty()) {
      nlohmann::json c = nlohmann::json::array();
      for (Factor f : e.confounders) c.push_back(factor_name(f));
      j["confounders"] = std::move(c);
      j["residual_norm"] = e.residual_norm;
    }
    entries.push_back(std::move(j));
  }
  const std::string meta = nlohmann::json{{"kind", b.kind}, {"entries", std::move(entries)}}.dump();
  std::vector<std::uint8_t> out(cvb_magic.begin(), cvb_magic.end());
  bytes::put_u32(out, static_cast<std::uint32_t>(b.entries.size()));
  bytes::put_u32(out, static_cast<std::uint32_t>(b.dim));
  bytes::put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());
  for (const auto& e : b.entries)
    for (double v : e.direction) bytes::put_f64(out, v);
  return out;
}

inline VectorBundle decode_bundle(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || !std::equal(cvb_magic.begin(), cvb_magic.end(), in.begin()))
    throw Error(ErrorKind::bad_magic, "not a CVB1 vector bundle");
  if (in.size() < 16) throw Error(ErrorKind::truncated, "truncated vector bundle header");
  const std::uint64_t count = bytes::get_u32(in.data() + 4);
  const std::uint64_t dim = bytes::get_u32(in.data() + 8);
  const std::uint64_t m = bytes::get_u32(in.data() + 12);
  const std::uint64_t expected = 16 + m + 8 * count * dim;
  if (in.size() != expected)
    throw Error(in.size() < expected ? ErrorKind::truncated : ErrorKind::trailing_data,
                "vector bundle: expected " + std::to_string(expected) + " bytes, got " + std::to_string(in.size()));
  VectorBundle b;
  b.dim = dim;
  try {
    const auto meta = nlohmann::json::parse(in.begin() + 16, in.begin() + 16 + m);
    b.kind = meta.at("kind").get<std::string>();
    const auto& entries = meta.at("entries");
    if (entries.size() != count) throw Error(ErrorKind::invalid_metadata, "vector bundle entry count mismatch");
    const std::uint8_t* p = in.data() + 16 + m;
    for (std::size_t i = 0; i < count; ++i) {
      const auto& j = entries[i];
      BundleEntry e;
      auto f = parse_factor(j.at("factor").get<std::string>());
      if (!f) throw Error(ErrorKind::invalid_metadata, "vector bundle: unknown factor");
      e.factor = *f;
      e.layer = j.at("layer").get<std::size_t>();
      e.n_pairs_used = j.value("n_pairs_used", std::size_t{0});
      e.source_hash = j.value("source_hash", "");
      if (j.contains("confounders")) {
        for (const auto& c : j["confounders"]) {
          auto cf = parse_factor(c.get<std::string>());
          if (!cf) throw Error(ErrorKind::invalid_metadata, "vector bundle: unknown confounder");
          e.confounders.push_back(*cf);
        }
        e.residual_norm = j.value("residual_norm", 0.0);
      }
      e.direction.resize(static_cast<Eigen::Index>(dim));
      for (std::size_t k = 0; k < dim; ++k) e.direction[static_cast<Eigen::Index>(k)] = bytes::get_f64(p + 8 * (i * dim + k));
      b.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_metadata, std::string("vector bundle metadata: ") + e.what());
  }
  return b;
}

inline void save_bundle(const VectorBundle& b, const std::string& path) {
  const auto buf = encode_bundle(b);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw Error(ErrorKind::io, "write to '" + path + "' failed");
}

inline VectorBundle load_bundle(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::missing_input, "cannot open vector bundle '" + path + "'");
  std::vector<std::uint8_t> buf{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  return decode_bundle(buf);
}

} // namespace repe
