#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radbar/error.hpp"

namespace radbar {

/// The four IRMA axes: technical, directional, anatomical, biological.
enum class IrmaAxis : std::size_t { T = 0, D = 1, A = 2, B = 3 };

inline constexpr std::array<std::size_t, 4> kIrmaAxisLengths = {4, 3, 3, 3};
inline constexpr std::size_t kIrmaCodeLength = 13;

/// 13-character hierarchical label split into axes of lengths (4, 3, 3, 3).
class IrmaCode {
 public:
  IrmaCode() = default;

  /// Accepts "TTTTDDDAAABBB" or "TTTT-DDD-AAA-BBB". Characters must be
  /// ASCII alphanumeric.
  static IrmaCode parse(std::string_view text);

  const std::string& raw() const { return raw_; }
  std::string_view axis(std::size_t k) const;
  std::string_view axis(IrmaAxis k) const { return axis(static_cast<std::size_t>(k)); }
  /// Character at 1-based position j of axis k.
  char at(std::size_t k, std::size_t j) const { return raw_[offset(k) + j - 1]; }

  std::string hyphenated() const;

  bool operator==(const IrmaCode&) const = default;

  static constexpr std::size_t offset(std::size_t k) {
    std::size_t o = 0;
    for (std::size_t i = 0; i < k; ++i) o += kIrmaAxisLengths[i];
    return o;
  }

 private:
  std::string raw_;
};

inline IrmaCode parse_irma(std::string_view text) { return IrmaCode::parse(text); }

/// Number of possible labels at each axis position (1-based j in the API).
class CardinalityTable {
 public:
  /// All ones.
  CardinalityTable();
  /// Rows must have lengths (4, 3, 3, 3) and entries >= 1.
  explicit CardinalityTable(std::array<std::vector<std::uint32_t>, 4> rows);

  std::uint32_t at(std::size_t k, std::size_t j) const { return rows_[k][j - 1]; }
  const std::array<std::vector<std::uint32_t>, 4>& rows() const { return rows_; }

  bool operator==(const CardinalityTable&) const = default;

 private:
  std::array<std::vector<std::uint32_t>, 4> rows_;
};

/// Distinct characters observed per axis position. Throws on empty input.
CardinalityTable build_cardinalities(std::span<const IrmaCode> codes);

/// Reads {"T": [..4], "D": [..3], "A": [..3], "B": [..3]}.
CardinalityTable load_cardinalities(const std::filesystem::path& path);
std::string cardinalities_to_json(const CardinalityTable& table);
CardinalityTable cardinalities_from_json(std::string_view json);

enum class ErrorMode {
  /// Independent mismatch per position.
  Literal,
  /// Once a position of an axis mismatches, every later position of that
  /// axis counts as mismatched too.
  Hierarchical,
};

/// sum_k sum_j (1 / B[k][j]) * (1 / j) * [query_kj != retrieved_kj]
double irma_error(const IrmaCode& query, const IrmaCode& retrieved, const CardinalityTable& table,
                  ErrorMode mode = ErrorMode::Literal);

/// Largest value irma_error can take under `table`.
double max_irma_error(const CardinalityTable& table);

struct FirstHit {
  std::string query_id;
  std::string hit_id;
  IrmaCode query;
  IrmaCode hit;
};

struct QueryError {
  std::string query_id;
  std::string hit_id;
  double error = 0.0;
};

struct EvaluationReport {
  std::vector<QueryError> per_query;
  double total_error = 0.0;
  std::size_t query_count = 0;
  /// Queries excluded because the query or its first hit had no label.
  std::size_t skipped = 0;
};

/// Per-query first-hit errors and their sum. Throws on empty input. The sum
/// is order-independent (sorted compensated summation).
EvaluationReport total_error(std::span<const FirstHit> hits, const CardinalityTable& table,
                             ErrorMode mode = ErrorMode::Literal);

/// {query_count, total_error, skipped, per_query: [{query_id, hit_id, error}]}
std::string report_to_json(const EvaluationReport& report);
std::string report_summary(const EvaluationReport& report);

}  // namespace radbar
