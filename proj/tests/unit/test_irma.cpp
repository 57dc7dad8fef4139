#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "radbar/irma.hpp"
#include "test_util.hpp"

using namespace radbar;

namespace {

const std::string kAlphabet = "0123456789abcdefghij";

std::string random_code(std::mt19937_64& rng, std::size_t alphabet = 4) {
  std::string s(13, '0');
  for (auto& c : s) c = kAlphabet[rng() % alphabet];
  return s;
}

CardinalityTable random_table(std::mt19937_64& rng) {
  std::array<std::vector<std::uint32_t>, 4> rows;
  for (std::size_t k = 0; k < 4; ++k) {
    rows[k].resize(kIrmaAxisLengths[k]);
    for (auto& b : rows[k]) b = 1 + rng() % 12;
  }
  return CardinalityTable(rows);
}

std::vector<std::vector<unsigned>> as_oracle(const CardinalityTable& t) {
  std::vector<std::vector<unsigned>> out;
  for (const auto& row : t.rows()) out.emplace_back(row.begin(), row.end());
  return out;
}

/// Table with all ones except one entry.
CardinalityTable with_entry(std::size_t k, std::size_t j, std::uint32_t value) {
  auto rows = CardinalityTable().rows();
  rows[k][j - 1] = value;
  return CardinalityTable(rows);
}

}  // namespace

TEST(IrmaCode, ParsesHyphenatedForm) {
  const auto c = parse_irma("1121-127-700-500");
  EXPECT_EQ(c.raw(), "1121127700500");
  EXPECT_EQ(c.axis(IrmaAxis::T), "1121");
  EXPECT_EQ(c.axis(IrmaAxis::D), "127");
  EXPECT_EQ(c.axis(IrmaAxis::A), "700");
  EXPECT_EQ(c.axis(IrmaAxis::B), "500");
  EXPECT_EQ(c.at(1, 3), '7');
  EXPECT_EQ(c.hyphenated(), "1121-127-700-500");
  EXPECT_EQ(parse_irma("1121127700500"), c);
}

TEST(IrmaCode, RejectsMalformed) {
  EXPECT_THROW(parse_irma("112112770050"), InvalidInput);
  EXPECT_THROW(parse_irma("11211277005000"), InvalidInput);
  EXPECT_THROW(parse_irma("112-1127-700-500"), InvalidInput);
  EXPECT_THROW(parse_irma("1121-127-7 0-500"), InvalidInput);
  EXPECT_THROW(parse_irma("1121_127_700_500"), InvalidInput);
}

TEST(IrmaCode, RoundTripOnRandomCodes) {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 200; ++i) {
    const auto raw = random_code(rng, 20);
    const auto c = parse_irma(raw);
    EXPECT_EQ(parse_irma(c.hyphenated()), c);
    EXPECT_EQ(c.raw(), raw);
  }
}

TEST(Cardinalities, Examples) {
  const std::vector<IrmaCode> one{parse_irma("1121127700500")};
  EXPECT_EQ(build_cardinalities(one), CardinalityTable());

  const std::vector<IrmaCode> two{parse_irma("1121127700500"), parse_irma("1122127700500")};
  EXPECT_EQ(build_cardinalities(two), with_entry(0, 4, 2));

  std::vector<IrmaCode> ten;
  for (char d = '0'; d <= '9'; ++d) ten.push_back(parse_irma(std::string("1121127") + d + "00500"));
  EXPECT_EQ(build_cardinalities(ten).at(2, 1), 10u);

  EXPECT_THROW(build_cardinalities(std::vector<IrmaCode>{}), InvalidInput);
}

TEST(Cardinalities, JsonRoundTripAndValidation) {
  std::mt19937_64 rng(42);
  const auto t = random_table(rng);
  EXPECT_EQ(cardinalities_from_json(cardinalities_to_json(t)), t);
  EXPECT_THROW(cardinalities_from_json(R"({"T":[1,1,1],"D":[1,1,1],"A":[1,1,1],"B":[1,1,1]})"), InvalidInput);
  EXPECT_THROW(cardinalities_from_json(R"({"T":[1,1,1,0],"D":[1,1,1],"A":[1,1,1],"B":[1,1,1]})"), InvalidInput);
  EXPECT_THROW(cardinalities_from_json("not json"), InvalidInput);

  testutil::TempDir dir;
  std::ofstream(dir / "b.json") << cardinalities_to_json(t);
  EXPECT_EQ(load_cardinalities(dir / "b.json"), t);
  EXPECT_THROW(load_cardinalities(dir / "missing.json"), NotFound);
}

TEST(IrmaError, Examples) {
  const auto q = parse_irma("1121127700500");
  EXPECT_EQ(irma_error(q, q, CardinalityTable()), 0.0);
  EXPECT_NEAR(irma_error(q, parse_irma("2121127700500"), with_entry(0, 1, 3)), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(irma_error(q, parse_irma("1121137700500"), with_entry(1, 2, 5)), 0.1, 1e-15);
}

TEST(IrmaError, MatchesOracleAndIsSymmetricAndBounded) {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 500; ++i) {
    const auto t = random_table(rng);
    const auto a = random_code(rng), b = random_code(rng);
    const double e = irma_error(parse_irma(a), parse_irma(b), t);
    EXPECT_NEAR(e, oracle::irma_error(a, b, as_oracle(t)), 1e-12);
    EXPECT_EQ(e, irma_error(parse_irma(b), parse_irma(a), t));
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, max_irma_error(t) + 1e-12);
  }
}

TEST(IrmaError, EarlierPositionsWeighMore) {
  const auto q = parse_irma("1121127700500");
  const CardinalityTable t;
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t j = 1; j < kIrmaAxisLengths[k]; ++j) {
      auto a = q.raw(), b = q.raw();
      const auto pos = IrmaCode::offset(k) + j - 1;
      a[pos] = 'x';
      b[pos + 1] = 'x';
      EXPECT_GT(irma_error(q, parse_irma(a), t), irma_error(q, parse_irma(b), t));
    }
  }
}

TEST(IrmaError, HierarchicalPropagatesWithinAxis) {
  const auto q = parse_irma("1121127700500");
  const auto h = parse_irma("1121227700500");  // D axis position 1 differs
  const CardinalityTable t;
  EXPECT_DOUBLE_EQ(irma_error(q, h, t, ErrorMode::Literal), 1.0);
  EXPECT_DOUBLE_EQ(irma_error(q, h, t, ErrorMode::Hierarchical), 1.0 + 0.5 + 1.0 / 3.0);
}

TEST(TotalError, SumsPerQueryErrors) {
  const auto q = parse_irma("1121127700500");
  const std::vector<FirstHit> same{{"a", "x", q, q}, {"b", "y", q, q}};
  EXPECT_EQ(total_error(same, CardinalityTable()).total_error, 0.0);

  std::mt19937_64 rng(44);
  const auto t = random_table(rng);
  std::vector<FirstHit> hits;
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    const auto a = random_code(rng), b = random_code(rng);
    expected += oracle::irma_error(a, b, as_oracle(t));
    hits.push_back({"q" + std::to_string(i), "h" + std::to_string(i), parse_irma(a), parse_irma(b)});
  }
  const auto report = total_error(hits, t);
  EXPECT_EQ(report.query_count, 3u);
  ASSERT_EQ(report.per_query.size(), 3u);
  EXPECT_EQ(report.per_query[1].query_id, "q1");
  EXPECT_NEAR(report.total_error, expected, 1e-9);
  EXPECT_THROW(total_error(std::vector<FirstHit>{}, t), InvalidInput);
}

TEST(TotalError, PermutationInvariant) {
  std::mt19937_64 rng(45);
  const auto t = random_table(rng);
  std::vector<FirstHit> hits;
  for (int i = 0; i < 400; ++i)
    hits.push_back({std::to_string(i), "h", parse_irma(random_code(rng, 10)), parse_irma(random_code(rng, 10))});
  const double base = total_error(hits, t).total_error;
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(hits.begin(), hits.end(), rng);
    EXPECT_EQ(total_error(hits, t).total_error, base);
  }
}

TEST(TotalError, ReportJsonShape) {
  const auto q = parse_irma("1121127700500");
  const std::vector<FirstHit> hits{{"qa", "hb", q, parse_irma("2121127700500")}};
  const auto j = nlohmann::json::parse(report_to_json(total_error(hits, CardinalityTable())));
  EXPECT_EQ(j.at("query_count"), 1);
  EXPECT_DOUBLE_EQ(j.at("total_error").get<double>(), 1.0);
  EXPECT_EQ(j.at("per_query").at(0).at("query_id"), "qa");
  EXPECT_EQ(j.at("per_query").at(0).at("hit_id"), "hb");
  EXPECT_DOUBLE_EQ(j.at("per_query").at(0).at("error").get<double>(), 1.0);
  EXPECT_FALSE(report_summary(total_error(hits, CardinalityTable())).empty());
}
