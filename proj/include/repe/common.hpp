#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace repe {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Factor registry. Every label map, corpus record and vector bundle keys on these names.
enum class Factor : std::uint8_t { superiority, relevance, weekday, jealousy };

inline constexpr std::array<Factor, 4> all_factors = {Factor::superiority, Factor::relevance,
                                                      Factor::weekday, Factor::jealousy};
// Predictors in the regression and steering targets; jealousy is the response.
inline constexpr std::array<Factor, 3> antecedent_factors = {Factor::superiority, Factor::relevance,
                                                             Factor::weekday};

inline constexpr std::string_view factor_name(Factor f) {
  switch (f) {
  case Factor::superiority: return "superiority";
  case Factor::relevance: return "relevance";
  case Factor::weekday: return "weekday";
  case Factor::jealousy: return "jealousy";
  }
  return "?";
}

inline std::optional<Factor> parse_factor(std::string_view name) {
  for (Factor f : all_factors)
    if (factor_name(f) == name) return f;
  return std::nullopt;
}

/// Error categories. The CLI maps these onto exit codes.
enum class ErrorKind {
  invalid_argument,
  bad_magic,
  truncated,
  invalid_metadata,
  trailing_data,
  io,
  schema,
  duplicate,
  degenerate,
  rank,
  out_of_range,
  missing_input,
  config,
  backend_unavailable,
};

inline constexpr std::string_view error_kind_name(ErrorKind k) {
  switch (k) {
  case ErrorKind::invalid_argument: return "invalid_argument";
  case ErrorKind::bad_magic: return "bad_magic";
  case ErrorKind::truncated: return "truncated";
  case ErrorKind::invalid_metadata: return "invalid_metadata";
  case ErrorKind::trailing_data: return "trailing_data";
  case ErrorKind::io: return "io";
  case ErrorKind::schema: return "schema";
  case ErrorKind::duplicate: return "duplicate";
  case ErrorKind::degenerate: return "degenerate";
  case ErrorKind::rank: return "rank";
  case ErrorKind::out_of_range: return "out_of_range";
  case ErrorKind::missing_input: return "missing_input";
  case ErrorKind::config: return "config";
  case ErrorKind::backend_unavailable: return "backend_unavailable";
  }
  return "?";
}

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

namespace bytes {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }
inline double get_f64(const std::uint8_t* p) { return std::bit_cast<double>(get_u64(p)); }

} // namespace bytes

} // namespace repe
