#include <gtest/gtest.h>
#include <omp.h>

#include <random>

#include "oracles.hpp"
#include "radbar/barcode.hpp"
#include "radbar/kernels.hpp"

using namespace radbar;

namespace {

class ThreadCount : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override {
    saved_ = omp_get_max_threads();
    omp_set_num_threads(GetParam());
  }
  void TearDown() override { omp_set_num_threads(saved_); }

 private:
  int saved_ = 1;
};

}  // namespace

TEST_P(ThreadCount, HammingScanMatchesSerial) {
  std::mt19937_64 rng(11);
  const std::size_t words = 16, rows = 9000;
  std::vector<std::uint64_t> codes(words * rows), query(words);
  for (auto& w : codes) w = rng();
  for (auto& w : query) w = rng();
  std::vector<std::uint32_t> a(rows), b(rows);
  kernels::serial::hamming_scan(codes, words, query, a);
  kernels::parallel::hamming_scan(codes, words, query, b);
  EXPECT_EQ(a, b);
}

TEST_P(ThreadCount, RadonProjectionsMatchSerialBitForBit) {
  std::mt19937_64 rng(12);
  const std::size_t n = 48;
  const auto img = oracle::random_pixels(rng, n * n);
  const auto angles = projection_angles(16);
  std::vector<double> a(n * angles.size()), b(n * angles.size());
  kernels::serial::radon_projections(img, n, angles, a);
  kernels::parallel::radon_projections(img, n, angles, b);
  EXPECT_EQ(a, b);
}

TEST_P(ThreadCount, CorrelateMatchesSerialBitForBit) {
  std::mt19937_64 rng(13);
  const std::size_t tw = 70, th = 53, kw = 9, kh = 12;
  const auto t = oracle::random_pixels(rng, tw * th);
  const auto k = oracle::random_pixels(rng, kw * kh);
  std::vector<double> a((tw - kw + 1) * (th - kh + 1)), b(a.size());
  kernels::serial::correlate(t, tw, th, k, kw, kh, a);
  kernels::parallel::correlate(t, tw, th, k, kw, kh, b);
  EXPECT_EQ(a, b);
}

INSTANTIATE_TEST_SUITE_P(Workers, ThreadCount, ::testing::Values(1, 4, 8));

TEST(Kernels, SerialCorrelateMatchesNestedLoopOracle) {
  std::mt19937_64 rng(14);
  const auto t = oracle::random_pixels(rng, 20 * 15);
  const auto k = oracle::random_pixels(rng, 4 * 3);
  std::vector<double> out(17 * 13);
  kernels::serial::correlate(t, 20, 15, k, 4, 3, out);
  const auto expected = oracle::correlate(t, 20, 15, k, 4, 3);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], expected[i], 1e-12);
}
