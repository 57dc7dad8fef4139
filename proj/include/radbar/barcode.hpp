#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "radbar/bitcode.hpp"
#include "radbar/image.hpp"
#include "radbar/kernels.hpp"

namespace radbar {

/// Real-valued feature vector behind a CNNC (network activations or the
/// built-in fallback descriptor). All values finite.
class ActivationVector {
 public:
  ActivationVector() = default;
  explicit ActivationVector(std::vector<double> values);

  std::size_t dimension() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

struct ProjectionVector {
  double angle = 0.0;
  std::vector<double> bins;
};

struct RbcConfig {
  std::size_t side = 192;
  std::size_t angle_count = 16;

  std::size_t code_length() const { return side * angle_count; }
  bool operator==(const RbcConfig&) const = default;
};

/// Requires a square image and 0 <= angle < 180.
ProjectionVector radon_projection(const GrayImage& img, double angle_deg);

/// Median of the strictly positive bins is the threshold; bins at or above
/// it map to 1. An all-zero projection gives all zeros.
std::vector<std::uint8_t> binarize_projection(const ProjectionVector& p);

/// i * 180 / angle_count for i in [0, angle_count).
std::vector<double> projection_angles(std::size_t angle_count);

BitCode radon_barcode(const GrayImage& img, const RbcConfig& config = {},
                      Execution exec = Execution::Parallel);

/// Bit i is 1 iff value i is strictly positive.
BitCode binarize_activations(const ActivationVector& v,
                             ActivationSource source = ActivationSource::External);

/// Down-sample to dim_side x dim_side, subtract the global mean, flatten.
ActivationVector fallback_descriptor(const GrayImage& img, std::size_t dim_side = 32);

}  // namespace radbar
