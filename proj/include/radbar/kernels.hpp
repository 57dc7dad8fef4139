#pragma once

// Data-parallel inner loops of the engine. Every kernel exists twice: a
// serial reference and an OpenMP version. Both perform the same arithmetic
// in the same per-element order, so their outputs are bit-identical for any
// thread count.

#include <cstddef>
#include <cstdint>
#include <span>

namespace radbar {

/// Selects the serial reference or the OpenMP implementation of a kernel.
enum class Execution { Serial, Parallel };

}  // namespace radbar

namespace radbar::kernels {

/// Line integrals of a side x side row-major image at one angle (degrees),
/// computed by rotating the image about its center with bilinear sampling
/// (zero outside) and summing each column. Each rotated pixel is the mean of
/// two samples at +-1/4 pixel along the column. 0 and 90 degrees are exact
/// column and row sums. `bins` has `side` elements.
void radon_projection(std::span<const double> img, std::size_t side, double angle_deg,
                      std::span<double> bins);

namespace serial {

void hamming_scan(std::span<const std::uint64_t> codes, std::size_t words_per_code,
                  std::span<const std::uint64_t> query, std::span<std::uint32_t> out);

/// `out` holds angles.size() consecutive projections of `side` bins each.
void radon_projections(std::span<const double> img, std::size_t side,
                       std::span<const double> angles_deg, std::span<double> out);

/// Valid-mode sliding dot product. `out` is (th-kh+1) x (tw-kw+1).
void correlate(std::span<const double> target, std::size_t tw, std::size_t th,
               std::span<const double> tmpl, std::size_t kw, std::size_t kh,
               std::span<double> out);

}  // namespace serial

namespace parallel {

void hamming_scan(std::span<const std::uint64_t> codes, std::size_t words_per_code,
                  std::span<const std::uint64_t> query, std::span<std::uint32_t> out);

void radon_projections(std::span<const double> img, std::size_t side,
                       std::span<const double> angles_deg, std::span<double> out);

void correlate(std::span<const double> target, std::size_t tw, std::size_t th,
               std::span<const double> tmpl, std::size_t kw, std::size_t kh,
               std::span<double> out);

}  // namespace parallel

}  // namespace radbar::kernels
