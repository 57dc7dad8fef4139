#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "radbar/error.hpp"

namespace radbar {

/// Row-major grayscale raster with intensities in [0, 1].
class GrayImage {
 public:
  GrayImage() = default;
  /// Throws InvalidInput on zero dimensions, size mismatch or out-of-range
  /// intensities.
  GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels);

  static GrayImage filled(std::size_t width, std::size_t height, double value);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  double at(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col]; }
  std::span<const double> pixels() const { return pixels_; }

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> pixels_;
};

/// Row-major real-valued raster with no range restriction (mean-subtracted
/// images, correlation inputs).
class PixelGrid {
 public:
  PixelGrid() = default;
  PixelGrid(std::size_t width, std::size_t height, std::vector<double> values);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  double at(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }
  std::span<const double> values() const { return values_; }

  bool operator==(const PixelGrid&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> values_;
};

/// Axis-aligned rectangle, 0-based offsets from the top-left corner.
struct Roi {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t w = 0;
  std::size_t h = 0;

  bool operator==(const Roi&) const = default;
};

/// Throws InvalidInput naming the violated bound when `roi` does not fit a
/// width x height raster.
void validate_roi(const Roi& roi, std::size_t width, std::size_t height);

/// Parses "x,y,w,h".
Roi parse_roi(const std::string& text);

// ---- I/O -------------------------------------------------------------------

/// Loads 8-bit PGM (P5/P2), PPM (P6) or PNG. Values are divided by the
/// format's maximum (255 for 8-bit files); colour channels are averaged.
GrayImage load_grayscale(const std::filesystem::path& path);
GrayImage decode_grayscale(std::span<const std::uint8_t> bytes);

/// Quantizes to 8 bits (round to nearest) and writes binary PGM.
void save_pgm(const GrayImage& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
std::vector<std::uint8_t> encode_png(const GrayImage& img);

/// "image/png", "image/x-portable-graymap", ... sniffed from magic bytes.
std::string sniff_content_type(std::span<const std::uint8_t> bytes);

// ---- operations ------------------------------------------------------------

/// Bilinear resample with pixel-center alignment. Identity when the target
/// dimensions equal the source.
GrayImage downsample(const GrayImage& img, std::size_t target_w, std::size_t target_h);

PixelGrid mean_subtract(const GrayImage& img);

GrayImage crop(const GrayImage& img, const Roi& roi);
PixelGrid crop(const PixelGrid& grid, const Roi& roi);

}  // namespace radbar
