#include "radbar/irma.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

namespace radbar {

using nlohmann::json;

IrmaCode IrmaCode::parse(std::string_view text) {
  std::string raw;
  if (text.size() == 16) {
    if (text[4] != '-' || text[8] != '-' || text[12] != '-') {
      throw InvalidInput("IRMA code '" + std::string(text) + "' has misplaced hyphens, expected TTTT-DDD-AAA-BBB");
    }
    for (char c : text) {
      if (c != '-') raw.push_back(c);
    }
    if (raw.size() != kIrmaCodeLength) {
      throw InvalidInput("IRMA code '" + std::string(text) + "' has misplaced hyphens, expected TTTT-DDD-AAA-BBB");
    }
  } else if (text.size() == kIrmaCodeLength) {
    raw = std::string(text);
  } else {
    throw InvalidInput("IRMA code '" + std::string(text) + "' has length " + std::to_string(text.size()) +
                       ", expected 13 or 16 (hyphenated)");
  }
  for (char c : raw) {
    if (!std::isalnum(static_cast<unsigned char>(c))) {
      throw InvalidInput("IRMA code '" + std::string(text) + "' contains non-alphanumeric character '" +
                         std::string(1, c) + "'");
    }
  }
  IrmaCode code;
  code.raw_ = std::move(raw);
  return code;
}

std::string_view IrmaCode::axis(std::size_t k) const {
  return std::string_view(raw_).substr(offset(k), kIrmaAxisLengths[k]);
}

std::string IrmaCode::hyphenated() const {
  std::string out;
  for (std::size_t k = 0; k < 4; ++k) {
    if (k) out.push_back('-');
    out.append(axis(k));
  }
  return out;
}

CardinalityTable::CardinalityTable() {
  for (std::size_t k = 0; k < 4; ++k) rows_[k].assign(kIrmaAxisLengths[k], 1);
}

CardinalityTable::CardinalityTable(std::array<std::vector<std::uint32_t>, 4> rows) : rows_(std::move(rows)) {
  for (std::size_t k = 0; k < 4; ++k) {
    if (rows_[k].size() != kIrmaAxisLengths[k]) {
      throw InvalidInput("cardinality table axis " + std::to_string(k) + " has " + std::to_string(rows_[k].size()) +
                         " positions, expected " + std::to_string(kIrmaAxisLengths[k]));
    }
    for (auto b : rows_[k]) {
      if (b < 1) throw InvalidInput("cardinality table entries must be >= 1");
    }
  }
}

CardinalityTable build_cardinalities(std::span<const IrmaCode> codes) {
  if (codes.empty()) throw InvalidInput("cannot build cardinalities from an empty collection");
  std::array<std::vector<std::uint32_t>, 4> rows;
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t j = 1; j <= kIrmaAxisLengths[k]; ++j) {
      std::set<char> seen;
      for (const auto& code : codes) seen.insert(code.at(k, j));
      rows[k].push_back(static_cast<std::uint32_t>(seen.size()));
    }
  }
  return CardinalityTable(std::move(rows));
}

namespace {

constexpr const char* kAxisNames[4] = {"T", "D", "A", "B"};

}  // namespace

CardinalityTable cardinalities_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed cardinality table: ") + e.what());
  }
  std::array<std::vector<std::uint32_t>, 4> rows;
  for (std::size_t k = 0; k < 4; ++k) {
    if (!doc.contains(kAxisNames[k]) || !doc[kAxisNames[k]].is_array()) {
      throw InvalidInput(std::string("cardinality table lacks axis ") + kAxisNames[k]);
    }
    for (const auto& v : doc[kAxisNames[k]]) {
      if (!v.is_number_unsigned()) throw InvalidInput("cardinality table entries must be positive integers");
      rows[k].push_back(v.get<std::uint32_t>());
    }
  }
  return CardinalityTable(std::move(rows));
}

CardinalityTable load_cardinalities(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot read cardinality table " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return cardinalities_from_json(buffer.str());
}

std::string cardinalities_to_json(const CardinalityTable& table) {
  json doc = json::object();
  for (std::size_t k = 0; k < 4; ++k) doc[kAxisNames[k]] = table.rows()[k];
  return doc.dump();
}

double irma_error(const IrmaCode& query, const IrmaCode& retrieved, const CardinalityTable& table, ErrorMode mode) {
  if (query.raw().size() != kIrmaCodeLength || retrieved.raw().size() != kIrmaCodeLength) {
    throw InvalidInput("irma_error needs two parsed codes");
  }
  double error = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    bool wrong = false;
    for (std::size_t j = 1; j <= kIrmaAxisLengths[k]; ++j) {
      const bool differs = query.at(k, j) != retrieved.at(k, j);
      wrong = mode == ErrorMode::Hierarchical ? (wrong || differs) : differs;
      if (wrong) error += 1.0 / (static_cast<double>(table.at(k, j)) * static_cast<double>(j));
    }
  }
  return error;
}

double max_irma_error(const CardinalityTable& table) {
  double total = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t j = 1; j <= kIrmaAxisLengths[k]; ++j) {
      total += 1.0 / (static_cast<double>(table.at(k, j)) * static_cast<double>(j));
    }
  }
  return total;
}

EvaluationReport total_error(std::span<const FirstHit> hits, const CardinalityTable& table, ErrorMode mode) {
  if (hits.empty()) throw InvalidInput("total_error needs at least one query");
  EvaluationReport report;
  report.per_query.reserve(hits.size());
  for (const auto& h : hits) {
    report.per_query.push_back({h.query_id, h.hit_id, irma_error(h.query, h.hit, table, mode)});
  }
  std::vector<double> values;
  values.reserve(hits.size());
  for (const auto& q : report.per_query) values.push_back(q.error);
  std::sort(values.begin(), values.end());
  // Neumaier summation over the sorted values.
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  report.total_error = sum + carry;
  report.query_count = hits.size();
  return report;
}

std::string report_to_json(const EvaluationReport& report) {
  json doc;
  doc["query_count"] = report.query_count;
  doc["total_error"] = report.total_error;
  doc["skipped"] = report.skipped;
  json rows = json::array();
  for (const auto& q : report.per_query) {
    rows.push_back({{"query_id", q.query_id}, {"hit_id", q.hit_id}, {"error", q.error}});
  }
  doc["per_query"] = std::move(rows);
  return doc.dump(2);
}

std::string report_summary(const EvaluationReport& report) {
  std::ostringstream out;
  std::size_t id_width = 8;
  for (const auto& q : report.per_query) id_width = std::max({id_width, q.query_id.size(), q.hit_id.size()});
  out << std::left << std::setw(static_cast<int>(id_width)) << "query" << "  " << std::setw(static_cast<int>(id_width))
      << "first hit" << "  " << "error\n";
  for (const auto& q : report.per_query) {
    out << std::setw(static_cast<int>(id_width)) << q.query_id << "  " << std::setw(static_cast<int>(id_width))
        << q.hit_id << "  " << std::fixed << std::setprecision(4) << q.error << "\n";
  }
  out << "queries: " << report.query_count << "  skipped: " << report.skipped << "  total error: " << std::fixed
      << std::setprecision(4) << report.total_error << "\n";
  return out.str();
}

}  // namespace radbar
