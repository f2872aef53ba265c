#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "repe/actstore.hpp"

namespace repe::testkit {

/// Scratch directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("repe_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
  std::filesystem::path path_;
};

/// Random valid set: paired records, labels, optional ground truth, arbitrary floats.
inline ActivationSet random_set(std::mt19937_64& rng, std::size_t max_pairs = 6) {
  std::uniform_int_distribution<std::size_t> npairs(0, max_pairs), nl(1, 5), nd(1, 9);
  std::uniform_int_distribution<int> bit(0, 1), gt(1, 5);
  std::normal_distribution<float> val(0.0f, 3.0f);
  ActivationSet s;
  s.n_layers = nl(rng);
  s.dim = nd(rng);
  s.model_id = "rand-" + std::to_string(rng() % 1000);
  s.capture_note = bit(rng) ? "raw" : "lat:superiority";
  const std::size_t p = npairs(rng);
  for (std::size_t i = 0; i < p; ++i)
    for (int pol : {1, 0}) {
      RecordMeta r;
      r.record_id = "p" + std::to_string(i) + (pol ? "/pos" : "/neg");
      r.labels[Factor::superiority] = pol;
      if (bit(rng)) r.labels[Factor::weekday] = bit(rng);
      if (bit(rng)) r.ground_truth = gt(rng);
      r.split_tag = "t1";
      r.pair_id = "p" + std::to_string(i);
      r.polarity = pol ? Polarity::pos : Polarity::neg;
      s.records.push_back(r);
    }
  if (bit(rng)) {
    RecordMeta r;
    r.record_id = "solo";
    r.labels[Factor::jealousy] = 1;
    s.records.push_back(r);
  }
  s.tensor.resize(s.records.size() * s.n_layers * s.dim);
  for (auto& x : s.tensor) x = val(rng);
  return s;
}

} // namespace repe::testkit
