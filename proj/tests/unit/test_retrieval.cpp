#include <gtest/gtest.h>
#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <random>
#include <thread>

#include "oracles.hpp"
#include "radbar/datastore.hpp"
#include "radbar/retrieval.hpp"
#include "radbar/synthetic.hpp"
#include "test_util.hpp"

using namespace radbar;

namespace {

BitCode bits_of(const std::string& s, CodeKind kind) {
  std::vector<std::uint8_t> v;
  for (char c : s) v.push_back(c == '1');
  return BitCode::from_bits(v, kind, {.dimension = kind == CodeKind::Cnnc ? v.size() : 0});
}

BitCode random_code(std::mt19937_64& rng, std::size_t n, CodeKind kind) {
  return BitCode::from_bits(oracle::random_bits(rng, n), kind, {.dimension = kind == CodeKind::Cnnc ? n : 0});
}

/// Index over hand-made codes: cnnc_bits-bit CNNCs and 2 x 4 = 8-bit RBCs.
IndexConfig small_config(std::size_t cnnc_bits) {
  IndexConfig cfg;
  cfg.cnnc_dim = cnnc_bits;
  cfg.rbc = {4, 2};
  return cfg;
}

RetrievalIndex random_index(std::mt19937_64& rng, std::size_t count, std::size_t cnnc_bits) {
  std::vector<IndexEntry> entries;
  for (std::size_t i = 0; i < count; ++i) {
    IndexEntry e;
    e.image_id = "img" + std::to_string(rng() % 100000) + "_" + std::to_string(i);
    e.cnnc = random_code(rng, cnnc_bits, CodeKind::Cnnc);
    e.rbc = random_code(rng, 8, CodeKind::Rbc);
    entries.push_back(std::move(e));
  }
  return RetrievalIndex(small_config(cnnc_bits), entries);
}

struct Ranked {
  std::string id;
  std::uint32_t cnnc;
  std::uint32_t rbc;
};

/// Exhaustive one-stage ranking by (rbc, cnnc, id).
std::vector<Ranked> brute_force(const RetrievalIndex& index, const BitCode& qc, const BitCode& qr) {
  std::vector<Ranked> all;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& e = index.entries()[i];
    all.push_back({e.image_id, hamming(e.cnnc, qc), hamming(*e.rbc, qr)});
  }
  std::sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) {
    return std::tie(a.rbc, a.cnnc, a.id) < std::tie(b.rbc, b.cnnc, b.id);
  });
  return all;
}

class SyntheticCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testutil::TempDir();
    synthetic::write_dataset(dir_->path(), {.per_class = 3, .train_per_class = 2, .seed = 7});
    manifest_ = new Manifest(read_manifest(dir_->path() / "manifest.csv"));
  }
  static void TearDownTestSuite() {
    delete manifest_;
    delete dir_;
  }
  static IndexConfig config(RbcMode mode = RbcMode::Precompute) {
    IndexConfig cfg;
    cfg.cnnc_dim = 256;
    cfg.rbc = {48, 8};
    cfg.rbc_mode = mode;
    return cfg;
  }
  static inline testutil::TempDir* dir_ = nullptr;
  static inline Manifest* manifest_ = nullptr;
};

}  // namespace

TEST(Enums, RoundTrip) {
  EXPECT_EQ(parse_split(to_string(Split::Test)), Split::Test);
  EXPECT_EQ(parse_rbc_mode(to_string(RbcMode::Lazy)), RbcMode::Lazy);
  EXPECT_THROW(parse_split("validation"), InvalidInput);
  EXPECT_THROW(parse_rbc_mode("eager"), InvalidInput);
}

TEST(RetrievalIndex, SortsAndValidates) {
  std::vector<IndexEntry> entries(2);
  entries[0].image_id = "b";
  entries[1].image_id = "a";
  for (auto& e : entries) {
    e.cnnc = bits_of("1010", CodeKind::Cnnc);
    e.rbc = bits_of("11110000", CodeKind::Rbc);
  }
  const RetrievalIndex index(small_config(4), entries);
  EXPECT_EQ(index.entries()[0].image_id, "a");
  EXPECT_EQ(index.find("b"), 1u);
  EXPECT_FALSE(index.find("c"));

  auto dup = entries;
  dup[1].image_id = "b";
  EXPECT_THROW(RetrievalIndex(small_config(4), dup), InvalidInput);

  auto wrong_len = entries;
  wrong_len[0].cnnc = bits_of("101", CodeKind::Cnnc);
  EXPECT_THROW(RetrievalIndex(small_config(4), wrong_len), InvalidInput);

  auto missing_rbc = entries;
  missing_rbc[0].rbc.reset();
  EXPECT_THROW(RetrievalIndex(small_config(4), missing_rbc), InvalidInput);

  auto external = small_config(4);
  external.cnnc_source = ActivationSource::External;
  EXPECT_THROW(RetrievalIndex(external, entries), InvalidInput);
}

TEST(Stage1, SingleEntryCorpus) {
  std::mt19937_64 rng(51);
  const auto index = random_index(rng, 1, 8);
  const auto c = stage1_candidates(index, random_code(rng, 8, CodeKind::Cnnc), 50);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].entry, 0u);
}

TEST(Stage1, HandAssignedCodesMatchBruteForce) {
  const std::vector<std::pair<std::string, std::string>> codes = {
      {"e", "11110000"}, {"a", "11111111"}, {"d", "00001111"}, {"b", "11110001"}, {"c", "11110000"}};
  std::vector<IndexEntry> entries;
  for (const auto& [id, bits] : codes) {
    IndexEntry e;
    e.image_id = id;
    e.cnnc = bits_of(bits, CodeKind::Cnnc);
    e.rbc = bits_of("00000000", CodeKind::Rbc);
    entries.push_back(e);
  }
  const RetrievalIndex index(small_config(8), entries);
  const auto q = bits_of("11110000", CodeKind::Cnnc);
  const auto c = stage1_candidates(index, q, 5);
  std::vector<std::string> ids;
  for (const auto& x : c) ids.push_back(index.entries()[x.entry].image_id);
  // distances: c=0, e=0, b=1, a=4, d=8
  EXPECT_EQ(ids, (std::vector<std::string>{"c", "e", "b", "a", "d"}));
  EXPECT_EQ(c[2].cnnc_distance, 1u);
  EXPECT_EQ(stage1_candidates(index, q, 2).size(), 2u);
}

TEST(Stage1, IsPrefixOfFullRankingAcrossThreadCounts) {
  std::mt19937_64 rng(52);
  const int saved = omp_get_max_threads();
  for (int trial = 0; trial < 20; ++trial) {
    const auto index = random_index(rng, 5000 + rng() % 3000, 24);
    const auto q = random_code(rng, 24, CodeKind::Cnnc);
    const auto full = stage1_candidates(index, q, index.size(), Execution::Serial);
    for (std::size_t i = 1; i < full.size(); ++i) {
      ASSERT_LE(full[i - 1].cnnc_distance, full[i].cnnc_distance);
      if (full[i - 1].cnnc_distance == full[i].cnnc_distance) ASSERT_LT(full[i - 1].entry, full[i].entry);
    }
    const std::size_t k1 = 1 + rng() % 100;
    for (int threads : {1, 4, 8}) {
      omp_set_num_threads(threads);
      const auto part = stage1_candidates(index, q, k1, Execution::Parallel);
      ASSERT_EQ(part, std::vector<Candidate>(full.begin(), full.begin() + k1));
    }
  }
  omp_set_num_threads(saved);
}

TEST(Stage2, Examples) {
  std::vector<IndexEntry> entries(2);
  entries[0].image_id = "x";
  entries[0].cnnc = bits_of("1110", CodeKind::Cnnc);
  entries[1].image_id = "y";
  entries[1].cnnc = bits_of("0000", CodeKind::Cnnc);
  for (auto& e : entries) e.rbc = bits_of("10101010", CodeKind::Rbc);
  const RetrievalIndex index(small_config(4), entries);
  const auto qr = bits_of("10101011", CodeKind::Rbc);

  const std::vector<Candidate> one{{1, 9}};
  const auto single = stage2_rerank(index, one, qr, 10);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].final_rank, 1u);
  EXPECT_EQ(single[0].rbc_distance, 1u);

  const std::vector<Candidate> two{{0, 3}, {1, 1}};
  const auto hits = stage2_rerank(index, two, qr, 10);
  EXPECT_EQ(hits[0].image_id, "y");
  EXPECT_EQ(hits[1].image_id, "x");
  EXPECT_EQ(hits[1].final_rank, 2u);

  EXPECT_THROW(stage2_rerank(index, two, bits_of("1010", CodeKind::Rbc), 10), InvalidInput);
  EXPECT_THROW(stage2_rerank(index, std::vector<Candidate>{}, qr, 10), InvalidInput);
}

TEST(TwoStage, EqualsExhaustiveRankingWhenK1CoversCorpus) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    const auto index = random_index(rng, 1 + rng() % 40, 12);
    const auto qc = random_code(rng, 12, CodeKind::Cnnc);
    const auto qr = random_code(rng, 8, CodeKind::Rbc);
    const std::size_t k2 = 1 + rng() % 15;
    const auto hits = stage2_rerank(index, stage1_candidates(index, qc, index.size()), qr, k2);
    const auto oracle = brute_force(index, qc, qr);
    ASSERT_EQ(hits.size(), std::min(k2, index.size()));
    for (std::size_t i = 0; i < hits.size(); ++i) {
      EXPECT_EQ(hits[i].image_id, oracle[i].id);
      EXPECT_EQ(hits[i].rbc_distance, oracle[i].rbc);
      EXPECT_EQ(hits[i].cnnc_distance, oracle[i].cnnc);
      EXPECT_EQ(hits[i].final_rank, i + 1);
    }
  }
}

TEST(TwoStage, ShrinkingK1PreservesRelativeOrder) {
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 100; ++trial) {
    const auto index = random_index(rng, 10 + rng() % 60, 10);
    const auto qc = random_code(rng, 10, CodeKind::Cnnc);
    const auto qr = random_code(rng, 8, CodeKind::Rbc);
    const std::size_t big = index.size(), small = 1 + rng() % big;
    const auto a = stage2_rerank(index, stage1_candidates(index, qc, big), qr, big);
    const auto b = stage2_rerank(index, stage1_candidates(index, qc, small), qr, big);
    std::vector<std::string> order_a;
    for (const auto& h : a)
      if (std::any_of(b.begin(), b.end(), [&](const Hit& x) { return x.image_id == h.image_id; }))
        order_a.push_back(h.image_id);
    std::vector<std::string> order_b;
    for (const auto& h : b) order_b.push_back(h.image_id);
    EXPECT_EQ(order_a, order_b);
  }
}

TEST_F(SyntheticCorpus, BuildIndexCoversTrainSplit) {
  const auto images = manifest_->images();
  const auto index = build_index(images, {}, config());
  EXPECT_EQ(index.size(), synthetic::kClassCount * 2);
  for (const auto& e : index.entries()) {
    EXPECT_EQ(e.split, Split::Train);
    EXPECT_EQ(e.cnnc.length(), 256u);
    ASSERT_TRUE(e.rbc);
    EXPECT_EQ(e.rbc->length(), 48u * 8u);
    ASSERT_TRUE(e.irma);
  }
  ASSERT_TRUE(index.cardinalities());
  EXPECT_EQ(index.cardinalities()->at(1, 2), 4u);  // D axis middle digit: 1, 2, 3, 0
}

TEST_F(SyntheticCorpus, BuildIndexMatchesHandFallback) {
  auto images = manifest_->images();
  images.resize(3);
  const auto index = build_index(images, {}, config());
  for (const auto& img : images) {
    if (img.split != Split::Train) continue;
    const auto g = load_grayscale(img.path);
    // Oracle: 16x16 bilinear down-sample, subtract the mean, sign bits.
    const std::vector<double> px(g.pixels().begin(), g.pixels().end());
    auto small = oracle::bilinear_resample(px, g.width(), g.height(), 16, 16);
    long double mean = 0;
    for (double v : small) mean += v;
    mean /= small.size();
    std::vector<std::uint8_t> bits;
    for (double v : small) bits.push_back(double(v - mean) > 0);
    const auto& entry = index.entries()[*index.find(img.image_id)];
    EXPECT_EQ(entry.cnnc.to_bit_string(), BitCode::from_bits(bits, CodeKind::Cnnc).to_bit_string());
  }
}

TEST_F(SyntheticCorpus, BuildIndexErrors) {
  auto images = manifest_->images();
  auto dup = images;
  dup[1].image_id = dup[0].image_id;
  EXPECT_THROW(build_index(dup, {}, config()), InvalidInput);
  EXPECT_THROW(build_index(std::vector<DatasetImage>{}, {}, config()), InvalidInput);
  auto odd = config();
  odd.cnnc_dim = 200;
  EXPECT_THROW(build_index(images, {}, odd), InvalidInput);

  std::vector<std::optional<ActivationVector>> acts(images.size());
  EXPECT_THROW(build_index(images, acts, config()), NotFound);

  auto bad_path = images;
  bad_path[0].path = (dir_->path() / "nope.pgm").string();
  bad_path[0].split = Split::Train;
  EXPECT_THROW(build_index(bad_path, {}, config()), NotFound);
}

TEST_F(SyntheticCorpus, ExternalActivations) {
  const auto images = manifest_->images();
  std::mt19937_64 rng(55);
  std::normal_distribution<double> g;
  std::vector<std::optional<ActivationVector>> acts;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::vector<double> v(20);
    for (auto& x : v) x = g(rng);
    acts.emplace_back(ActivationVector(v));
  }
  const auto index = build_index(images, acts, config());
  EXPECT_EQ(index.config().cnnc_source, ActivationSource::External);
  EXPECT_EQ(index.config().cnnc_dim, 20u);
  const auto i0 = *index.find(images[0].image_id);
  EXPECT_EQ(index.entries()[i0].cnnc, binarize_activations(*acts[0]));

  const auto q = load_grayscale(images[0].path);
  EXPECT_THROW(retrieve(index, q, std::nullopt), InvalidInput);
  const auto r = retrieve(index, q, acts[0]);
  EXPECT_EQ(r.hits[0].image_id, images[0].image_id);
  EXPECT_EQ(r.hits[0].cnnc_distance, 0u);
}

TEST_F(SyntheticCorpus, DuplicateQueryRanksFirst) {
  const auto images = manifest_->images();
  const auto index = build_index(images, {}, config());
  for (const auto& img : images) {
    if (img.split != Split::Train) continue;
    const auto r = retrieve(index, load_grayscale(img.path), std::nullopt, {.query_id = "q", .label = img.irma});
    ASSERT_FALSE(r.hits.empty());
    EXPECT_EQ(r.hits[0].image_id, img.image_id);
    EXPECT_EQ(r.hits[0].rbc_distance, 0u);
    EXPECT_EQ(r.hits[0].cnnc_distance, 0u);
    ASSERT_TRUE(r.first_hit_error);
    EXPECT_EQ(*r.first_hit_error, 0.0);
  }
  EXPECT_THROW(retrieve(index, GrayImage::filled(4, 4, 0.5), ActivationVector(std::vector<double>(256, 1.0))),
               InvalidInput);
}

TEST_F(SyntheticCorpus, FullCoverageMatchesExhaustiveOracle) {
  const auto images = manifest_->images();
  const auto index = build_index(images, {}, config());
  for (const auto& img : images) {
    const auto q = load_grayscale(img.path);
    const auto r = retrieve(index, q, std::nullopt, {.k1 = index.size(), .k2 = 10});
    const auto qc = binarize_activations(fallback_descriptor(q, 16), ActivationSource::Fallback);
    const auto qr = radon_barcode(q, index.config().rbc, Execution::Serial);
    const auto oracle = brute_force(index, qc, qr);
    ASSERT_EQ(r.hits.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(r.hits[i].image_id, oracle[i].id);
  }
}

TEST_F(SyntheticCorpus, LazyModeMatchesPrecomputeUnderConcurrency) {
  const auto images = manifest_->images();
  const auto eager = build_index(images, {}, config());
  const auto lazy = build_index(images, {}, config(RbcMode::Lazy));
  for (const auto& e : lazy.entries()) EXPECT_FALSE(e.rbc);

  std::vector<GrayImage> queries;
  for (const auto& img : images) queries.push_back(load_grayscale(img.path));
  std::vector<RetrievalResult> expected;
  for (const auto& q : queries) expected.push_back(retrieve(eager, q, std::nullopt, {.query_id = "q"}));

  std::vector<std::thread> workers;
  std::vector<int> mismatches(6, 0);
  for (int t = 0; t < 6; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t i = 0; i < queries.size(); ++i) {
        const std::size_t k = (i + t * 5) % queries.size();
        if (retrieve(lazy, queries[k], std::nullopt, {.query_id = "q"}) != expected[k]) ++mismatches[t];
      }
    });
  }
  for (auto& w : workers) w.join();
  EXPECT_EQ(mismatches, std::vector<int>(6, 0));
  for (std::size_t i = 0; i < lazy.size(); ++i) EXPECT_EQ(lazy.rbc(i), *eager.entries()[i].rbc);
}

TEST_F(SyntheticCorpus, DeterministicAcrossThreadCountsAndExecution) {
  const auto images = manifest_->images();
  const int saved = omp_get_max_threads();
  const auto reference = build_index(images, {}, config(), Execution::Serial);
  const auto q = load_grayscale(images.back().path);
  const auto want = retrieve(reference, q, std::nullopt, {.query_id = "q", .exec = Execution::Serial});
  for (int threads : {1, 4, 8}) {
    omp_set_num_threads(threads);
    const auto index = build_index(images, {}, config(), Execution::Parallel);
    EXPECT_TRUE(index == reference);
    EXPECT_EQ(retrieve(index, q, std::nullopt, {.query_id = "q"}), want);
  }
  omp_set_num_threads(saved);
}

TEST(Retrieve, EmptyIndexIsAnError) {
  const RetrievalIndex empty(small_config(16), {});
  EXPECT_THROW(retrieve(empty, GrayImage::filled(8, 8, 0.2), std::nullopt), InvalidInput);
}

TEST(Retrieve, ResultJsonShape) {
  RetrievalResult r{"q7", {{"a", 3, 1, 1}, {"b", 0, 2, 2}}, 0.25};
  const auto j = nlohmann::json::parse(result_to_json(r));
  EXPECT_EQ(j.at("query_id"), "q7");
  ASSERT_EQ(j.at("hits").size(), 2u);
  EXPECT_EQ(j.at("hits")[0].at("image_id"), "a");
  EXPECT_EQ(j.at("hits")[0].at("cnnc_distance"), 3);
  EXPECT_EQ(j.at("hits")[0].at("rbc_distance"), 1);
  EXPECT_EQ(j.at("hits")[1].at("final_rank"), 2);
  EXPECT_DOUBLE_EQ(j.at("first_hit_error").get<double>(), 0.25);
  r.first_hit_error.reset();
  EXPECT_FALSE(nlohmann::json::parse(result_to_json(r)).contains("first_hit_error"));
}
