#include "semsparse/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "semsparse/errors.hpp"

namespace semsparse {

void ScanBudget::validate() const {
  if (!(dwell_per_sampled_pixel > 0.0)) throw std::invalid_argument("ScanBudget: dwell must be > 0");
  if (!(beam_current >= 0.0)) throw std::invalid_argument("ScanBudget: beam current must be >= 0");
  if (!(sampled_fraction > 0.0 && sampled_fraction <= 1.0))
    throw std::invalid_argument("ScanBudget: sampled fraction must be in (0, 1]");
}

double average_dwell(const ScanBudget& budget) { return budget.dwell_per_sampled_pixel * budget.sampled_fraction; }

ScanBudget raster_preset(double beam_current) { return {10.0, 1.0, beam_current, 5.0}; }
ScanBudget low_resolution_preset(double beam_current) { return {40.0, 0.25, beam_current, 10.0}; }
ScanBudget sparse_preset(double beam_current) { return {40.0, 0.25, beam_current, 5.0}; }

void BeamModel::validate() const {
  if (!(sigma_ref >= 0.0)) throw std::invalid_argument("BeamModel: sigma_ref must be >= 0");
  if (!(current_ref > 0.0)) throw std::invalid_argument("BeamModel: current_ref must be > 0");
  if (!std::isfinite(exponent)) throw std::invalid_argument("BeamModel: exponent must be finite");
}

double electrons_per_pixel(double current_na, double dwell_us) {
  if (!(current_na >= 0.0) || !(dwell_us >= 0.0))
    throw std::invalid_argument("electrons_per_pixel: current and dwell must be >= 0");
  return (current_na * 1e-9) * (dwell_us * 1e-6) / kElementaryCharge;
}

double beam_blur_sigma(double current_na, const BeamModel& model) {
  model.validate();
  if (!(current_na > 0.0)) throw std::invalid_argument("beam_blur_sigma: current must be > 0");
  return model.sigma_ref * std::pow(current_na / model.current_ref, model.exponent);
}

Image simulate_frame(const Image& truth, const ScanBudget& budget, const BeamModel& beam, const SeededRng& rng,
                     Exec exec) {
  budget.validate();
  const double n = electrons_per_pixel(budget.beam_current, budget.dwell_per_sampled_pixel);
  if (!(n > 0.0)) throw NumericalError("simulate_frame: zero electrons per pixel (degenerate budget)");
  const Image blurred = gaussian_smooth(truth, beam_blur_sigma(budget.beam_current, beam), exec);
  const auto src = blurred.pixels();
  std::vector<double> out(src.size());
  const std::uint64_t seed = rng.seed();

#pragma omp parallel for schedule(static) if (run_parallel(exec))
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(src.size()); ++i) {
    SeededRng pixel_rng = SeededRng::derive(seed, {static_cast<std::uint64_t>(i)});
    const auto k = pixel_rng.poisson(n * src[static_cast<std::size_t>(i)]);
    out[static_cast<std::size_t>(i)] = std::min(1.0, static_cast<double>(k) / n);
  }
  return Image(truth.width(), truth.height(), std::move(out));
}

Image synthesize_combined_frame(const Image& frame_a, double dwell_a, const Image& frame_b, double dwell_b) {
  if (frame_a.width() != frame_b.width() || frame_a.height() != frame_b.height())
    throw std::invalid_argument("synthesize_combined_frame: dimension mismatch");
  if (!(dwell_a >= 0.0) || !(dwell_b >= 0.0) || !(dwell_a + dwell_b > 0.0))
    throw std::invalid_argument("synthesize_combined_frame: total dwell must be > 0");
  if (dwell_b == 0.0) return frame_a;
  if (dwell_a == 0.0) return frame_b;
  const double total = dwell_a + dwell_b;
  std::vector<double> out(frame_a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (dwell_a * frame_a[i] + dwell_b * frame_b[i]) / total;
  return Image(frame_a.width(), frame_a.height(), std::move(out));
}

Image downscale_by_two(const Image& image) {
  if (image.width() < 2 || image.height() < 2) throw std::invalid_argument("downscale_by_two: image smaller than 2x2");
  const std::size_t w = image.width() / 2;
  const std::size_t h = image.height() / 2;
  std::vector<double> out(w * h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      // Pairwise sum so that constant blocks reproduce the constant exactly.
      const double top = image(2 * x, 2 * y) + image(2 * x + 1, 2 * y);
      const double bottom = image(2 * x, 2 * y + 1) + image(2 * x + 1, 2 * y + 1);
      out[y * w + x] = (top + bottom) * 0.25;
    }
  return Image(w, h, std::move(out));
}

SparseImage sparse_scan(const Image& frame, double fraction, const SeededRng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("sparse_scan: fraction must be in [0, 1]");
  const std::size_t n = frame.size();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), std::size_t{0});
  SeededRng stream(rng.seed());
  // Partial Fisher-Yates: the first `count` slots become the sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.below(n - i));
    std::swap(index[i], index[j]);
  }
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t i = 0; i < count; ++i) mask[index[i]] = 1;
  return SparseImage(frame, std::move(mask));
}

}  // namespace semsparse
