#pragma once

#include <cstdint>

#include "semsparse/image.hpp"
#include "semsparse/parallel.hpp"
#include "semsparse/rng.hpp"

namespace semsparse {

inline constexpr double kElementaryCharge = 1.602176634e-19;  // C

struct ScanBudget {
  double dwell_per_sampled_pixel = 10.0;  // us
  double sampled_fraction = 1.0;          // (0, 1]
  double beam_current = 0.1;              // nA
  double pixel_size = 5.0;                // nm

  void validate() const;
};

// Budget the experiments hold constant: dwell per sampled pixel x sampled fraction.
double average_dwell(const ScanBudget& budget);

// Strategy presets: full raster, half-resolution raster, 25 % sparse scan.
ScanBudget raster_preset(double beam_current = 0.1);
ScanBudget low_resolution_preset(double beam_current = 0.1);
ScanBudget sparse_preset(double beam_current = 0.1);

/// Virtual spot size as a power law in the beam current:
/// sigma(I) = sigma_ref * (I / current_ref)^exponent.
struct BeamModel {
  double sigma_ref = 0.4;    // px
  double current_ref = 0.1;  // nA
  double exponent = 0.5;

  void validate() const;
};

double electrons_per_pixel(double current_na, double dwell_us);
double beam_blur_sigma(double current_na, const BeamModel& model);

// Blur by the beam spot, then draw Poisson(N * intensity) counts per pixel and
// normalize by N. Pixel i uses the substream derive(seed, {i}), so the frame
// does not depend on the execution policy.
Image simulate_frame(const Image& truth, const ScanBudget& budget, const BeamModel& beam, const SeededRng& rng,
                     Exec exec = Exec::parallel);

// Dose-weighted mean of two registered frames of the same spot.
Image synthesize_combined_frame(const Image& frame_a, double dwell_a, const Image& frame_b, double dwell_b);

// Non-overlapping 2x2 block means; an odd trailing row/column is dropped.
Image downscale_by_two(const Image& image);

// Exactly round(fraction * pixels) positions, uniformly without replacement.
SparseImage sparse_scan(const Image& frame, double fraction, const SeededRng& rng);

}  // namespace semsparse
