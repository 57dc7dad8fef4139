#include "radbar/roimatch.hpp"

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <memory>
#include <mutex>

#include <json.hpp>

namespace radbar {

namespace {

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
std::unique_ptr<T[], FftwFree> fftw_array(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (!p) throw std::bad_alloc();
  return std::unique_ptr<T[], FftwFree>(p);
}

std::size_t fft_size(std::size_t n) {
  // Smallest 2^a 3^b 5^c >= n keeps FFTW on its fast codelets.
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

CorrelationMap correlate_fft(const PixelGrid& target, const PixelGrid& tmpl, CorrelationMap map) {
  // corr(r, c) = sum target(r+i, c+j) tmpl(i, j) = IFFT(FFT(target) * conj(FFT(tmpl)))(r, c)
  // on a padded grid large enough that valid placements never wrap.
  const std::size_t rows = fft_size(target.height());
  const std::size_t cols = fft_size(target.width());
  const std::size_t half = cols / 2 + 1;

  auto a = fftw_array<double>(rows * cols);
  auto b = fftw_array<double>(rows * cols);
  auto fa = fftw_array<fftw_complex>(rows * half);
  auto fb = fftw_array<fftw_complex>(rows * half);
  std::fill(a.get(), a.get() + rows * cols, 0.0);
  std::fill(b.get(), b.get() + rows * cols, 0.0);
  for (std::size_t r = 0; r < target.height(); ++r) {
    for (std::size_t c = 0; c < target.width(); ++c) a[r * cols + c] = target.at(r, c);
  }
  for (std::size_t r = 0; r < tmpl.height(); ++r) {
    for (std::size_t c = 0; c < tmpl.width(); ++c) b[r * cols + c] = tmpl.at(r, c);
  }

  const int n0 = static_cast<int>(rows);
  const int n1 = static_cast<int>(cols);
  fftw_plan forward_a, forward_b, inverse;
  {
    std::lock_guard lock(fftw_planner_mutex());
    forward_a = fftw_plan_dft_r2c_2d(n0, n1, a.get(), fa.get(), FFTW_ESTIMATE);
    forward_b = fftw_plan_dft_r2c_2d(n0, n1, b.get(), fb.get(), FFTW_ESTIMATE);
    inverse = fftw_plan_dft_c2r_2d(n0, n1, fa.get(), a.get(), FFTW_ESTIMATE);
  }
  fftw_execute(forward_a);
  fftw_execute(forward_b);
  for (std::size_t i = 0; i < rows * half; ++i) {
    const std::complex<double> x(fa[i][0], fa[i][1]);
    const std::complex<double> y(fb[i][0], fb[i][1]);
    const auto z = x * std::conj(y);
    fa[i][0] = z.real();
    fa[i][1] = z.imag();
  }
  fftw_execute(inverse);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_a);
    fftw_destroy_plan(forward_b);
    fftw_destroy_plan(inverse);
  }

  const double scale = 1.0 / static_cast<double>(rows * cols);
  for (std::size_t r = 0; r < map.height; ++r) {
    for (std::size_t c = 0; c < map.width; ++c) map.values[r * map.width + c] = a[r * cols + c] * scale;
  }
  return map;
}

}  // namespace

CorrelationMap cross_correlate(const PixelGrid& target, const PixelGrid& tmpl, CorrelationMethod method,
                               Execution exec) {
  if (tmpl.width() == 0 || tmpl.height() == 0) throw InvalidInput("template is empty");
  if (tmpl.width() > target.width() || tmpl.height() > target.height()) {
    throw InvalidInput("template " + std::to_string(tmpl.width()) + "x" + std::to_string(tmpl.height()) +
                       " is larger than target " + std::to_string(target.width()) + "x" +
                       std::to_string(target.height()));
  }
  CorrelationMap map;
  map.width = target.width() - tmpl.width() + 1;
  map.height = target.height() - tmpl.height() + 1;
  map.values.resize(map.width * map.height);

  if (method == CorrelationMethod::Auto) {
    // Direct cost is map area x template area; FFT is ~ N log N on the target.
    const double direct = static_cast<double>(map.width * map.height) * static_cast<double>(tmpl.size());
    method = direct > 64.0 * static_cast<double>(target.size()) * 16.0 ? CorrelationMethod::Fft
                                                                        : CorrelationMethod::Direct;
  }
  if (method == CorrelationMethod::Fft) return correlate_fft(target, tmpl, std::move(map));

  if (exec == Execution::Serial) {
    kernels::serial::correlate(target.values(), target.width(), target.height(), tmpl.values(), tmpl.width(),
                               tmpl.height(), map.values);
  } else {
    kernels::parallel::correlate(target.values(), target.width(), target.height(), tmpl.values(), tmpl.width(),
                                 tmpl.height(), map.values);
  }
  return map;
}

Peak best_match(const CorrelationMap& map) {
  if (map.values.empty()) throw InvalidInput("correlation map is empty");
  // max_element returns the first maximum in row-major order.
  const auto it = std::max_element(map.values.begin(), map.values.end());
  const auto idx = static_cast<std::size_t>(it - map.values.begin());
  return Peak{idx % map.width, idx / map.width, *it};
}

std::vector<RoiMatchOutcome> roi_match(const GrayImage& query, const Roi& roi, const std::vector<RoiTarget>& targets) {
  validate_roi(roi, query.width(), query.height());
  const PixelGrid tmpl = crop(mean_subtract(query), roi);

  std::vector<RoiMatchOutcome> out(targets.size());
  const auto count = static_cast<std::ptrdiff_t>(targets.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t t = 0; t < count; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const RoiTarget& target = targets[i];
    RoiMatchOutcome& result = out[i];
    result.target_image_id = target.image_id;
    if (target.image.width() < roi.w || target.image.height() < roi.h) {
      result.error = "target " + std::to_string(target.image.width()) + "x" + std::to_string(target.image.height()) +
                     " is smaller than the roi " + std::to_string(roi.w) + "x" + std::to_string(roi.h);
      continue;
    }
    try {
      const auto peak = best_match(cross_correlate(mean_subtract(target.image), tmpl, CorrelationMethod::Auto,
                                                   Execution::Serial));
      result.match = RoiMatch{target.image_id, Roi{peak.x, peak.y, roi.w, roi.h}, peak.score};
    } catch (const std::exception& e) {
      result.error = e.what();
    }
  }
  return out;
}

std::string roi_matches_to_json(const std::vector<RoiMatchOutcome>& outcomes, int indent) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& o : outcomes) {
    if (o.match) {
      const auto& b = o.match->box;
      rows.push_back({{"target_image_id", o.target_image_id},
                      {"x", b.x},
                      {"y", b.y},
                      {"w", b.w},
                      {"h", b.h},
                      {"score", o.match->score}});
    } else {
      rows.push_back({{"target_image_id", o.target_image_id}, {"error", o.error}});
    }
  }
  return rows.dump(indent);
}

}  // namespace radbar
