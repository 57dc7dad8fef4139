#include "radbar/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

namespace radbar {

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width_ == 0 || height_ == 0) {
    throw InvalidInput("image has a zero dimension");
  }
  if (pixels_.size() != width_ * height_) {
    throw InvalidInput("pixel count " + std::to_string(pixels_.size()) + " does not match " +
                       std::to_string(width_) + "x" + std::to_string(height_));
  }
  for (double v : pixels_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidInput("intensity outside [0, 1]");
    }
  }
}

GrayImage GrayImage::filled(std::size_t width, std::size_t height, double value) {
  return GrayImage(width, height, std::vector<double>(width * height, value));
}

PixelGrid::PixelGrid(std::size_t width, std::size_t height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (values_.size() != width_ * height_) {
    throw InvalidInput("grid value count does not match its dimensions");
  }
}

void validate_roi(const Roi& roi, std::size_t width, std::size_t height) {
  if (roi.w < 1) throw InvalidInput("roi width must be >= 1");
  if (roi.h < 1) throw InvalidInput("roi height must be >= 1");
  if (roi.x >= width || roi.w > width - roi.x) {
    throw InvalidInput("roi x + w exceeds image width " + std::to_string(width));
  }
  if (roi.y >= height || roi.h > height - roi.y) {
    throw InvalidInput("roi y + h exceeds image height " + std::to_string(height));
  }
}

Roi parse_roi(const std::string& text) {
  std::vector<std::size_t> values;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    if (token.empty() || token.size() > 9 ||
        !std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isdigit(c); })) {
      throw InvalidInput("malformed roi '" + text + "', expected x,y,w,h");
    }
    values.push_back(std::stoull(token));
  }
  if (values.size() != 4 || text.back() == ',') {
    throw InvalidInput("malformed roi '" + text + "', expected x,y,w,h");
  }
  return Roi{values[0], values[1], values[2], values[3]};
}

// ---------------------------------------------------------------------------
// Decoding

namespace {

class PnmReader {
 public:
  explicit PnmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw InvalidInput("malformed PNM header");
    }
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > (1u << 30)) throw InvalidInput("PNM header value too large");
    }
    return value;
  }

  // Exactly one whitespace byte separates the header from binary data.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw InvalidInput("malformed PNM header");
    }
    ++pos_;
  }

  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

GrayImage decode_pnm(std::span<const std::uint8_t> bytes) {
  const char kind = static_cast<char>(bytes[1]);
  PnmReader reader(bytes);
  const std::size_t width = reader.next_int();
  const std::size_t height = reader.next_int();
  const std::size_t maxval = reader.next_int();
  if (width == 0 || height == 0) throw InvalidInput("image has a zero dimension");
  if (maxval == 0 || maxval > 255) throw InvalidInput("unsupported PNM maxval " + std::to_string(maxval));
  const double scale = static_cast<double>(maxval);
  const std::size_t channels = kind == '6' ? 3 : 1;
  const std::size_t count = width * height;

  std::vector<double> px(count);
  if (kind == '2') {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t v = reader.next_int();
      if (v > maxval) throw InvalidInput("PGM sample exceeds maxval");
      px[i] = static_cast<double>(v) / scale;
    }
  } else {
    reader.end_header();
    const auto data = reader.rest();
    if (data.size() < count * channels) throw InvalidInput("truncated PNM pixel data");
    for (std::size_t i = 0; i < count; ++i) {
      unsigned sum = 0;
      for (std::size_t c = 0; c < channels; ++c) {
        const unsigned v = data[i * channels + c];
        if (v > maxval) throw InvalidInput("PNM sample exceeds maxval");
        sum += v;
      }
      px[i] = channels == 1 ? static_cast<double>(sum) / scale
                            : static_cast<double>(sum) / (scale * static_cast<double>(channels));
    }
  }
  return GrayImage(width, height, std::move(px));
}

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw InvalidInput(std::string("cannot decode PNG: ") + image.message);
  }
  const bool colour = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = colour ? 3 : 1;
  const std::size_t width = image.width;
  const std::size_t height = image.height;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw InvalidInput(std::string("cannot decode PNG: ") + image.message);
  }
  if (width == 0 || height == 0) throw InvalidInput("image has a zero dimension");
  std::vector<double> px(width * height);
  for (std::size_t i = 0; i < px.size(); ++i) {
    unsigned sum = 0;
    for (std::size_t c = 0; c < channels; ++c) sum += buffer[i * channels + c];
    px[i] = static_cast<double>(sum) / (255.0 * static_cast<double>(channels));
  }
  return GrayImage(width, height, std::move(px));
}

bool is_png(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin());
}

bool is_pnm(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5' || bytes[1] == '6');
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

GrayImage decode_grayscale(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_pnm(bytes)) return decode_pnm(bytes);
  throw InvalidInput("unsupported image format");
}

GrayImage load_grayscale(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot read image file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_grayscale(bytes);
  } catch (const InvalidInput& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.size());
  for (double v : img.pixels()) out.push_back(quantize(v));
  return out;
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  std::vector<std::uint8_t> gray(img.size());
  std::transform(img.pixels().begin(), img.pixels().end(), gray.begin(), quantize);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, gray.data(), 0, nullptr)) {
    throw Error(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, gray.data(), 0, nullptr)) {
    throw Error(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::string sniff_content_type(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return "image/png";
  if (bytes.size() >= 2 && bytes[0] == 'P') {
    if (bytes[1] == '2' || bytes[1] == '5') return "image/x-portable-graymap";
    if (bytes[1] == '6') return "image/x-portable-pixmap";
  }
  return "application/octet-stream";
}

// ---------------------------------------------------------------------------
// Operations

GrayImage downsample(const GrayImage& img, std::size_t target_w, std::size_t target_h) {
  if (target_w < 1 || target_h < 1) throw InvalidInput("downsample target must be at least 1x1");
  if (target_w == img.width() && target_h == img.height()) return img;

  const std::size_t sw = img.width();
  const std::size_t sh = img.height();
  const double sx_scale = static_cast<double>(sw) / static_cast<double>(target_w);
  const double sy_scale = static_cast<double>(sh) / static_cast<double>(target_h);

  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [](std::size_t n, std::size_t src, double scale) {
    std::vector<Tap> out(n);
    const double last = static_cast<double>(src - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0, last);
      const auto lo = static_cast<std::size_t>(std::floor(s));
      out[i] = {lo, std::min(lo + 1, src - 1), s - static_cast<double>(lo)};
    }
    return out;
  };
  const auto xt = taps(target_w, sw, sx_scale);
  const auto yt = taps(target_h, sh, sy_scale);

  std::vector<double> out(target_w * target_h);
  for (std::size_t r = 0; r < target_h; ++r) {
    const Tap& ty = yt[r];
    for (std::size_t c = 0; c < target_w; ++c) {
      const Tap& tx = xt[c];
      const double top = std::lerp(img.at(ty.lo, tx.lo), img.at(ty.lo, tx.hi), tx.frac);
      const double bottom = std::lerp(img.at(ty.hi, tx.lo), img.at(ty.hi, tx.hi), tx.frac);
      out[r * target_w + c] = std::lerp(top, bottom, ty.frac);
    }
  }
  return GrayImage(target_w, target_h, std::move(out));
}

PixelGrid mean_subtract(const GrayImage& img) {
  const auto px = img.pixels();
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  if (*lo == *hi) return PixelGrid(img.width(), img.height(), std::vector<double>(px.size(), 0.0));
  const long double mean = std::accumulate(px.begin(), px.end(), 0.0L) / static_cast<long double>(px.size());
  std::vector<double> out(px.size());
  std::transform(px.begin(), px.end(), out.begin(), [mean](double v) { return static_cast<double>(v - mean); });
  return PixelGrid(img.width(), img.height(), std::move(out));
}

namespace {

template <typename Raster>
std::vector<double> crop_values(const Raster& src, const Roi& roi) {
  validate_roi(roi, src.width(), src.height());
  std::vector<double> out;
  out.reserve(roi.w * roi.h);
  for (std::size_t r = 0; r < roi.h; ++r) {
    for (std::size_t c = 0; c < roi.w; ++c) out.push_back(src.at(roi.y + r, roi.x + c));
  }
  return out;
}

}  // namespace

GrayImage crop(const GrayImage& img, const Roi& roi) {
  return GrayImage(roi.w, roi.h, crop_values(img, roi));
}

PixelGrid crop(const PixelGrid& grid, const Roi& roi) {
  return PixelGrid(roi.w, roi.h, crop_values(grid, roi));
}

}  // namespace radbar
