#include "radbar/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace radbar::synthetic {

namespace {

const std::array<std::string, kClassCount> kNames = {
    "disk", "twin", "ring", "hstripes", "vstripes", "dstripes", "checker", "cross", "triangle", "gradient"};

const std::array<std::string, kClassCount> kIrma = {
    "1121-110-213-700", "1121-110-214-700", "1121-115-310-700", "1121-120-311-700", "1121-120-400-700",
    "1121-127-413-700", "1121-200-500-700", "1123-211-510-700", "1121-220-700-400", "1121-230-800-500"};

double stripe(double t, double period, double phase) {
  const double x = t / period + phase;
  return (x - std::floor(x)) < 0.5 ? 1.0 : 0.0;
}

}  // namespace

const std::string& class_name(std::size_t cls) { return kNames.at(cls); }
const std::string& class_irma(std::size_t cls) { return kIrma.at(cls); }

GrayImage render(std::size_t cls, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> side(56, 72);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto jitter = [&](double centre, double spread) { return centre + (unit(rng) * 2.0 - 1.0) * spread; };

  const std::size_t w = side(rng);
  const std::size_t h = side(rng);
  const double bg = jitter(0.12, 0.06);
  const double fg = jitter(0.82, 0.1);
  const double cx = jitter(0.5, 0.05);
  const double cy = jitter(0.5, 0.05);
  const double size = jitter(1.0, 0.08);
  const double phase = jitter(0.0, 0.15);
  std::normal_distribution<double> noise(0.0, 0.04);

  std::vector<double> px(w * h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double u = (static_cast<double>(c) + 0.5) / static_cast<double>(w);
      const double v = (static_cast<double>(r) + 0.5) / static_cast<double>(h);
      const double dx = u - cx;
      const double dy = v - cy;
      const double rad = std::hypot(dx, dy);
      double a = 0.0;  // foreground coverage in [0, 1]
      switch (cls) {
        case 0: a = rad < 0.18 * size; break;
        case 1: a = std::hypot(std::abs(dx) - 0.2 * size, dy) < 0.13 * size; break;
        case 2: a = rad > 0.26 * size && rad < 0.36 * size; break;
        case 3: a = stripe(v, 0.125 * size, phase); break;
        case 4: a = stripe(u, 0.125 * size, phase); break;
        case 5: a = stripe((u + v) / std::numbers::sqrt2, 0.125 * size, phase); break;
        case 6: a = (stripe(u, 0.25 * size, phase) + stripe(v, 0.25 * size, phase)) == 1.0; break;
        case 7: a = std::min(std::abs(dx), std::abs(dy)) < 0.08 * size; break;
        case 8: {
          const double top = cy - 0.28 * size;
          const double bottom = cy + 0.22 * size;
          a = v > top && v < bottom && std::abs(dx) < 0.3 * size * (v - top) / (bottom - top);
          break;
        }
        default: a = std::clamp(u + (size - 1.0), 0.0, 1.0); break;
      }
      px[r * w + c] = std::clamp(bg + (fg - bg) * a + noise(rng), 0.0, 1.0);
    }
  }
  return GrayImage(w, h, std::move(px));
}

std::vector<ManifestRecord> write_dataset(const std::filesystem::path& dir, const Options& options) {
  if (options.train_per_class > options.per_class) throw InvalidInput("train_per_class exceeds per_class");
  std::filesystem::create_directories(dir / "images");
  std::mt19937_64 rng(options.seed);
  std::vector<ManifestRecord> records;
  for (std::size_t cls = 0; cls < kClassCount; ++cls) {
    for (std::size_t n = 0; n < options.per_class; ++n) {
      ManifestRecord rec;
      rec.image_id = "c" + std::to_string(cls) + "_" + std::to_string(n);
      rec.path = "images/" + rec.image_id + ".pgm";
      rec.split = n < options.train_per_class ? Split::Train : Split::Test;
      rec.irma_code = IrmaCode::parse(kIrma[cls]);
      save_pgm(render(cls, rng), dir / rec.path);
      records.push_back(std::move(rec));
    }
  }
  write_manifest(dir / "manifest.csv", records);
  return records;
}

std::size_t class_of(const std::string& image_id) {
  const auto underscore = image_id.find('_');
  if (image_id.size() < 2 || image_id[0] != 'c' || underscore == std::string::npos) {
    throw InvalidInput("not a synthetic image id: " + image_id);
  }
  return std::stoul(image_id.substr(1, underscore - 1));
}

}  // namespace radbar::synthetic
