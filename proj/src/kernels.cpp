#include "radbar/kernels.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace radbar::kernels {

namespace {

inline double sample_zero_padded(std::span<const double> img, std::size_t side, double px, double py) {
  const double n = static_cast<double>(side);
  if (px <= -1.0 || py <= -1.0 || px >= n || py >= n) return 0.0;
  const double fx0 = std::floor(px);
  const double fy0 = std::floor(py);
  const double fx = px - fx0;
  const double fy = py - fy0;
  const auto x0 = static_cast<std::ptrdiff_t>(fx0);
  const auto y0 = static_cast<std::ptrdiff_t>(fy0);
  const auto s = static_cast<std::ptrdiff_t>(side);
  auto at = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
    return (r < 0 || c < 0 || r >= s || c >= s) ? 0.0 : img[static_cast<std::size_t>(r * s + c)];
  };
  const double top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx;
  const double bottom = at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

inline std::uint32_t hamming_row(const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
  std::uint32_t d = 0;
  for (std::size_t k = 0; k < words; ++k) d += static_cast<std::uint32_t>(std::popcount(a[k] ^ b[k]));
  return d;
}

inline void correlate_row(std::span<const double> target, std::size_t tw, std::span<const double> tmpl,
                          std::size_t kw, std::size_t kh, std::size_t r, std::size_t out_w, double* out_row) {
  for (std::size_t c = 0; c < out_w; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < kh; ++i) {
      const double* t = target.data() + (r + i) * tw + c;
      const double* k = tmpl.data() + i * kw;
      for (std::size_t j = 0; j < kw; ++j) acc += t[j] * k[j];
    }
    out_row[c] = acc;
  }
}

}  // namespace

void radon_projection(std::span<const double> img, std::size_t side, double angle_deg, std::span<double> bins) {
  const std::size_t n = side;
  if (angle_deg == 0.0) {
    for (std::size_t c = 0; c < n; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += img[r * n + c];
      bins[c] = acc;
    }
    return;
  }
  if (angle_deg == 90.0) {
    for (std::size_t r = 0; r < n; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc += img[r * n + c];
      bins[r] = acc;
    }
    return;
  }

  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double center = (static_cast<double>(n) - 1.0) / 2.0;
  constexpr double kOffsets[2] = {-0.25, 0.25};
  for (std::size_t c = 0; c < n; ++c) {
    const double x = static_cast<double>(c) - center;
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      for (double o : kOffsets) {
        const double y = static_cast<double>(r) + o - center;
        acc += sample_zero_padded(img, n, x * cs - y * sn + center, x * sn + y * cs + center);
      }
    }
    bins[c] = acc * 0.5;
  }
}

namespace serial {

void hamming_scan(std::span<const std::uint64_t> codes, std::size_t words_per_code,
                  std::span<const std::uint64_t> query, std::span<std::uint32_t> out) {
  for (std::size_t e = 0; e < out.size(); ++e) {
    out[e] = hamming_row(codes.data() + e * words_per_code, query.data(), words_per_code);
  }
}

void radon_projections(std::span<const double> img, std::size_t side, std::span<const double> angles_deg,
                       std::span<double> out) {
  for (std::size_t a = 0; a < angles_deg.size(); ++a) {
    radon_projection(img, side, angles_deg[a], out.subspan(a * side, side));
  }
}

void correlate(std::span<const double> target, std::size_t tw, std::size_t th, std::span<const double> tmpl,
               std::size_t kw, std::size_t kh, std::span<double> out) {
  const std::size_t out_w = tw - kw + 1;
  const std::size_t out_h = th - kh + 1;
  for (std::size_t r = 0; r < out_h; ++r) correlate_row(target, tw, tmpl, kw, kh, r, out_w, out.data() + r * out_w);
}

}  // namespace serial

namespace parallel {

void hamming_scan(std::span<const std::uint64_t> codes, std::size_t words_per_code,
                  std::span<const std::uint64_t> query, std::span<std::uint32_t> out) {
  const auto count = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static) if (count > 4096)
  for (std::ptrdiff_t e = 0; e < count; ++e) {
    out[static_cast<std::size_t>(e)] =
        hamming_row(codes.data() + static_cast<std::size_t>(e) * words_per_code, query.data(), words_per_code);
  }
}

void radon_projections(std::span<const double> img, std::size_t side, std::span<const double> angles_deg,
                       std::span<double> out) {
  const auto count = static_cast<std::ptrdiff_t>(angles_deg.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t a = 0; a < count; ++a) {
    const auto i = static_cast<std::size_t>(a);
    radon_projection(img, side, angles_deg[i], out.subspan(i * side, side));
  }
}

void correlate(std::span<const double> target, std::size_t tw, std::size_t th, std::span<const double> tmpl,
               std::size_t kw, std::size_t kh, std::span<double> out) {
  const std::size_t out_w = tw - kw + 1;
  const auto out_h = static_cast<std::ptrdiff_t>(th - kh + 1);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < out_h; ++r) {
    const auto row = static_cast<std::size_t>(r);
    correlate_row(target, tw, tmpl, kw, kh, row, out_w, out.data() + row * out_w);
  }
}

}  // namespace parallel

}  // namespace radbar::kernels
