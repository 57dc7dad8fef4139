#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "radbar/image.hpp"
#include "radbar/kernels.hpp"

namespace radbar {

/// Valid-mode correlation surface: (target_w - template_w + 1) x
/// (target_h - template_h + 1).
struct CorrelationMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
};

enum class CorrelationMethod {
  Auto,
  /// Nested-loop sliding dot product (serial or OpenMP per Execution).
  Direct,
  /// Zero-padded FFT product.
  Fft,
};

/// Unnormalized sliding dot product. Inputs are expected to be
/// mean-subtracted by the caller. Throws when the template exceeds the target.
CorrelationMap cross_correlate(const PixelGrid& target, const PixelGrid& tmpl,
                               CorrelationMethod method = CorrelationMethod::Auto,
                               Execution exec = Execution::Parallel);

struct Peak {
  std::size_t x = 0;
  std::size_t y = 0;
  double score = 0.0;

  bool operator==(const Peak&) const = default;
};

/// Global maximum; ties go to the smallest row, then the smallest column.
Peak best_match(const CorrelationMap& map);

struct RoiMatch {
  std::string target_image_id;
  Roi box;
  double score = 0.0;
};

/// One record per target, in input order. `error` is set (and `match`
/// empty) when that target could not be matched.
struct RoiMatchOutcome {
  std::string target_image_id;
  std::optional<RoiMatch> match;
  std::string error;
};

struct RoiTarget {
  std::string image_id;
  GrayImage image;
};

/// Template = crop(mean_subtract(query), roi); each target is mean-subtracted
/// and correlated at native resolution.
std::vector<RoiMatchOutcome> roi_match(const GrayImage& query, const Roi& roi, const std::vector<RoiTarget>& targets);

/// [{target_image_id, x, y, w, h, score}] with {target_image_id, error} for
/// failed targets.
std::string roi_matches_to_json(const std::vector<RoiMatchOutcome>& outcomes, int indent = -1);

}  // namespace radbar
