#pragma once

// Activation Capture Format (ACF), version 1.
//
//   offset  size        field
//   0       4           magic "ACF1"
//   4       4           N  (records, u32 LE)
//   8       4           L  (captured layer states, u32 LE)
//   12      4           d  (hidden dim, u32 LE)
//   16      4           M  (metadata length in bytes, u32 LE)
//   20      M           metadata, UTF-8 JSON (compact, keys sorted)
//   20+M    4*N*L*d     payload, f32 LE, index ((n * L) + l) * d + k
//
// Metadata object: {"capture_note", "model_id", "records": [...]} plus any extra
// top-level keys a capture backend wants to carry (kept verbatim). Each record is
// {"record_id", "labels": {factor: 0|1}, "ground_truth"?, "split_tag"?, "pair_id"?,
// "polarity"? ("pos"|"neg")}.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "repe/common.hpp"

namespace repe {

enum class Polarity { pos, neg };

struct RecordMeta {
  std::string record_id;
  std::map<Factor, int> labels;
  std::optional<int> ground_truth;
  std::optional<std::string> split_tag;
  std::optional<std::string> pair_id;
  std::optional<Polarity> polarity;

  friend bool operator==(const RecordMeta&, const RecordMeta&) = default;
};

struct ActivationSet {
  std::vector<RecordMeta> records;
  std::size_t n_layers = 0;
  std::size_t dim = 0;
  std::vector<float> tensor; // record-major, then layer, then dimension
  std::string model_id;
  std::string capture_note = "raw";
  nlohmann::json extra = nlohmann::json::object();

  std::size_t size() const { return records.size(); }

  float at(std::size_t record, std::size_t layer, std::size_t k) const {
    return tensor[(record * n_layers + layer) * dim + k];
  }
  float& at(std::size_t record, std::size_t layer, std::size_t k) {
    return tensor[(record * n_layers + layer) * dim + k];
  }

  std::span<const float> state(std::size_t record, std::size_t layer) const {
    return {tensor.data() + (record * n_layers + layer) * dim, dim};
  }

  friend bool operator==(const ActivationSet&, const ActivationSet&) = default;
};

inline constexpr std::array<char, 4> acf_magic = {'A', 'C', 'F', '1'};
inline constexpr std::size_t acf_header_bytes = 20;

/// Throws Error(invalid_metadata) on the first violated ActivationSet invariant.
inline void validate(const ActivationSet& set) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::invalid_metadata, msg); };
  if (set.tensor.size() != set.records.size() * set.n_layers * set.dim)
    fail("tensor has " + std::to_string(set.tensor.size()) + " values, expected N*L*d = " +
         std::to_string(set.records.size() * set.n_layers * set.dim));
  std::set<std::string> ids;
  std::map<std::string, std::vector<Polarity>> pairs;
  for (const auto& r : set.records) {
    if (r.record_id.empty()) fail("empty record_id");
    if (!ids.insert(r.record_id).second) fail("duplicate record_id '" + r.record_id + "'");
    for (const auto& [f, v] : r.labels)
      if (v != 0 && v != 1)
        fail("record '" + r.record_id + "': label " + std::string(factor_name(f)) + " must be 0 or 1");
    if (r.ground_truth && (*r.ground_truth < 1 || *r.ground_truth > 5))
      fail("record '" + r.record_id + "': ground_truth outside 1..5");
    if (r.pair_id) {
      if (!r.polarity) fail("record '" + r.record_id + "': pair_id without polarity");
      pairs[*r.pair_id].push_back(*r.polarity);
    }
  }
  for (const auto& [id, pols] : pairs) {
    if (pols.size() != 2 || pols[0] == pols[1])
      fail("pair '" + id + "' must have exactly one pos and one neg record");
  }
}

namespace detail {

inline nlohmann::json record_to_json(const RecordMeta& r) {
  nlohmann::json j;
  j["record_id"] = r.record_id;
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [f, v] : r.labels) labels[std::string(factor_name(f))] = v;
  j["labels"] = std::move(labels);
  if (r.ground_truth) j["ground_truth"] = *r.ground_truth;
  if (r.split_tag) j["split_tag"] = *r.split_tag;
  if (r.pair_id) j["pair_id"] = *r.pair_id;
  if (r.polarity) j["polarity"] = *r.polarity == Polarity::pos ? "pos" : "neg";
  return j;
}

inline RecordMeta record_from_json(const nlohmann::json& j, std::size_t index) {
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::invalid_metadata, "record " + std::to_string(index) + ": " + msg);
  };
  if (!j.is_object()) fail("not an object");
  RecordMeta r;
  if (!j.contains("record_id") || !j["record_id"].is_string()) fail("missing record_id");
  r.record_id = j["record_id"].get<std::string>();
  if (j.contains("labels")) {
    if (!j["labels"].is_object()) fail("labels must be an object");
    for (const auto& [name, v] : j["labels"].items()) {
      auto f = parse_factor(name);
      if (!f) fail("unknown factor '" + name + "'");
      if (!v.is_number_integer()) fail("label " + name + " is not an integer");
      r.labels[*f] = v.get<int>();
    }
  }
  if (j.contains("ground_truth")) {
    if (!j["ground_truth"].is_number_integer()) fail("ground_truth is not an integer");
    r.ground_truth = j["ground_truth"].get<int>();
  }
  if (j.contains("split_tag")) r.split_tag = j["split_tag"].get<std::string>();
  if (j.contains("pair_id")) r.pair_id = j["pair_id"].get<std::string>();
  if (j.contains("polarity")) {
    const auto p = j["polarity"].get<std::string>();
    if (p == "pos") r.polarity = Polarity::pos;
    else if (p == "neg") r.polarity = Polarity::neg;
    else fail("polarity must be pos or neg");
  }
  return r;
}

inline std::string encode_metadata(const ActivationSet& set) {
  nlohmann::json meta = set.extra.is_object() ? set.extra : nlohmann::json::object();
  meta["model_id"] = set.model_id;
  meta["capture_note"] = set.capture_note;
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : set.records) recs.push_back(record_to_json(r));
  meta["records"] = std::move(recs);
  return meta.dump();
}

} // namespace detail

inline std::vector<std::uint8_t> encode_acf(const ActivationSet& set) {
  validate(set);
  const std::string meta = detail::encode_metadata(set);
  std::vector<std::uint8_t> out;
  out.reserve(acf_header_bytes + meta.size() + 4 * set.tensor.size());
  out.insert(out.end(), acf_magic.begin(), acf_magic.end());
  bytes::put_u32(out, static_cast<std::uint32_t>(set.records.size()));
  bytes::put_u32(out, static_cast<std::uint32_t>(set.n_layers));
  bytes::put_u32(out, static_cast<std::uint32_t>(set.dim));
  bytes::put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());
  for (float v : set.tensor) bytes::put_f32(out, v);
  return out;
}

/// Writes `set` to `sink`; returns the byte count. Nothing is written if validation fails.
inline std::size_t save_acf(const ActivationSet& set, std::ostream& sink) {
  const auto buf = encode_acf(set);
  sink.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!sink) throw Error(ErrorKind::io, "ACF sink write failed");
  return buf.size();
}

inline std::size_t save_acf(const ActivationSet& set, const std::string& path) {
  const auto buf = encode_acf(set);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw Error(ErrorKind::io, "write to '" + path + "' failed");
  return buf.size();
}

inline ActivationSet decode_acf(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || !std::equal(acf_magic.begin(), acf_magic.end(), in.begin()))
    throw Error(ErrorKind::bad_magic, "not an ACF1 file (bad magic)");
  if (in.size() < acf_header_bytes)
    throw Error(ErrorKind::truncated, "truncated header: expected " + std::to_string(acf_header_bytes) +
                                          " bytes, got " + std::to_string(in.size()));
  const std::uint64_t n = bytes::get_u32(in.data() + 4);
  const std::uint64_t l = bytes::get_u32(in.data() + 8);
  const std::uint64_t d = bytes::get_u32(in.data() + 12);
  const std::uint64_t m = bytes::get_u32(in.data() + 16);
  const std::uint64_t expected = acf_header_bytes + m + 4 * n * l * d;
  if (in.size() < expected)
    throw Error(ErrorKind::truncated, "truncated ACF: expected " + std::to_string(expected) +
                                          " bytes, got " + std::to_string(in.size()));
  if (in.size() > expected)
    throw Error(ErrorKind::trailing_data, std::to_string(in.size() - expected) +
                                              " trailing bytes after ACF payload");

  ActivationSet set;
  set.n_layers = l;
  set.dim = d;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in.begin() + acf_header_bytes, in.begin() + acf_header_bytes + m);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_metadata, std::string("metadata is not valid JSON: ") + e.what());
  }
  if (!meta.is_object()) throw Error(ErrorKind::invalid_metadata, "metadata must be a JSON object");
  try {
    set.model_id = meta.value("model_id", "");
    set.capture_note = meta.value("capture_note", "raw");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_metadata, e.what());
  }
  if (!meta.contains("records") || !meta["records"].is_array())
    throw Error(ErrorKind::invalid_metadata, "metadata lacks a records array");
  const auto& recs = meta["records"];
  if (recs.size() != n)
    throw Error(ErrorKind::invalid_metadata, "header declares " + std::to_string(n) + " records, metadata has " +
                                                 std::to_string(recs.size()));
  set.records.reserve(n);
  try {
    for (std::size_t i = 0; i < recs.size(); ++i) set.records.push_back(detail::record_from_json(recs[i], i));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_metadata, e.what());
  }
  for (auto it = meta.begin(); it != meta.end(); ++it)
    if (it.key() != "model_id" && it.key() != "capture_note" && it.key() != "records") set.extra[it.key()] = it.value();

  set.tensor.resize(n * l * d);
  const std::uint8_t* p = in.data() + acf_header_bytes + m;
  for (std::size_t i = 0; i < set.tensor.size(); ++i) set.tensor[i] = bytes::get_f32(p + 4 * i);
  validate(set);
  return set;
}

inline ActivationSet load_acf(std::istream& source) {
  std::vector<std::uint8_t> buf{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
  return decode_acf(buf);
}

inline ActivationSet load_acf(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::missing_input, "cannot open ACF file '" + path + "'");
  return load_acf(f);
}

/// One layer of an ActivationSet as an N x d matrix; row i belongs to records[i].
struct LayerSlice {
  std::size_t layer = 0;
  Mat values;
  std::span<const RecordMeta> records;

  Vec row(std::size_t i) const { return values.row(static_cast<Eigen::Index>(i)).transpose(); }
};

inline LayerSlice select_layer(const ActivationSet& set, std::size_t layer) {
  if (layer >= set.n_layers)
    throw Error(ErrorKind::out_of_range,
                "layer " + std::to_string(layer) + " out of range (L=" + std::to_string(set.n_layers) + ")");
  LayerSlice s;
  s.layer = layer;
  s.records = set.records;
  s.values.resize(static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(set.dim));
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto st = set.state(i, layer);
    for (std::size_t k = 0; k < set.dim; ++k) s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = st[k];
  }
  return s;
}

inline std::optional<std::size_t> find_record(const ActivationSet& set, const std::string& id) {
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set.records[i].record_id == id) return i;
  return std::nullopt;
}

} // namespace repe
