#include "radbar/barcode.hpp"

#include <algorithm>
#include <cmath>

namespace radbar {

ActivationVector::ActivationVector(std::vector<double> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw InvalidInput("activation " + std::to_string(i) + " is not finite");
    }
  }
}

ProjectionVector radon_projection(const GrayImage& img, double angle_deg) {
  if (img.width() != img.height()) {
    throw InvalidInput("radon projection needs a square image, got " + std::to_string(img.width()) + "x" +
                       std::to_string(img.height()));
  }
  if (!(angle_deg >= 0.0 && angle_deg < 180.0)) {
    throw InvalidInput("projection angle must lie in [0, 180)");
  }
  ProjectionVector p{angle_deg, std::vector<double>(img.width())};
  kernels::radon_projection(img.pixels(), img.width(), angle_deg, p.bins);
  return p;
}

namespace {

// Median of the strictly positive bins; 0 when there are none.
double positive_median(std::span<const double> bins) {
  std::vector<double> positive;
  positive.reserve(bins.size());
  for (double b : bins) {
    if (b > 0.0) positive.push_back(b);
  }
  if (positive.empty()) return 0.0;
  std::sort(positive.begin(), positive.end());
  const std::size_t n = positive.size();
  return n % 2 == 1 ? positive[n / 2] : (positive[n / 2 - 1] + positive[n / 2]) / 2.0;
}

void binarize_into(std::span<const double> bins, std::uint8_t* out) {
  const double threshold = positive_median(bins);
  if (threshold == 0.0) {
    std::fill(out, out + bins.size(), std::uint8_t{0});
    return;
  }
  for (std::size_t i = 0; i < bins.size(); ++i) out[i] = bins[i] >= threshold ? 1 : 0;
}

}  // namespace

std::vector<std::uint8_t> binarize_projection(const ProjectionVector& p) {
  std::vector<std::uint8_t> bits(p.bins.size());
  binarize_into(p.bins, bits.data());
  return bits;
}

std::vector<double> projection_angles(std::size_t angle_count) {
  std::vector<double> angles(angle_count);
  for (std::size_t i = 0; i < angle_count; ++i) {
    angles[i] = static_cast<double>(i) * 180.0 / static_cast<double>(angle_count);
  }
  return angles;
}

BitCode radon_barcode(const GrayImage& img, const RbcConfig& config, Execution exec) {
  if (config.angle_count < 1) throw InvalidInput("radon barcode needs at least one angle");
  if (config.side < 2) throw InvalidInput("radon barcode side must be >= 2");

  const GrayImage square = downsample(img, config.side, config.side);
  const auto angles = projection_angles(config.angle_count);
  std::vector<double> projections(config.code_length());
  if (exec == Execution::Serial) {
    kernels::serial::radon_projections(square.pixels(), config.side, angles, projections);
  } else {
    kernels::parallel::radon_projections(square.pixels(), config.side, angles, projections);
  }

  std::vector<std::uint8_t> bits(config.code_length());
  for (std::size_t a = 0; a < config.angle_count; ++a) {
    binarize_into(std::span<const double>(projections).subspan(a * config.side, config.side),
                  bits.data() + a * config.side);
  }
  CodeConfig meta;
  meta.image_side = config.side;
  meta.angle_count = config.angle_count;
  return BitCode::from_bits(bits, CodeKind::Rbc, meta);
}

BitCode binarize_activations(const ActivationVector& v, ActivationSource source) {
  std::vector<std::uint8_t> bits(v.dimension());
  std::transform(v.values().begin(), v.values().end(), bits.begin(),
                 [](double x) { return static_cast<std::uint8_t>(x > 0.0 ? 1 : 0); });
  CodeConfig meta;
  meta.dimension = v.dimension();
  meta.source = source;
  return BitCode::from_bits(bits, CodeKind::Cnnc, meta);
}

ActivationVector fallback_descriptor(const GrayImage& img, std::size_t dim_side) {
  const PixelGrid centered = mean_subtract(downsample(img, dim_side, dim_side));
  return ActivationVector({centered.values().begin(), centered.values().end()});
}

}  // namespace radbar
