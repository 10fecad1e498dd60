#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "semsparse/image.hpp"

namespace semsparse {

/// Synthetic SEM-like test scene: closed droplets with a bright rim and a clear
/// interior, smooth membrane curves, and a low-frequency textured background.
struct PhantomSpec {
  std::size_t width = 256;
  std::size_t height = 256;
  double structure_density = 0.5;  // [0, 1]; scales texture strength and droplet size spread
  std::size_t droplets = 10;
  std::size_t curves = 5;
  double contrast_lo = 0.1;
  double contrast_hi = 0.9;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Droplet {
  double cx = 0, cy = 0;  // center (px)
  double a = 0, b = 0;    // semi-axes (px)
  double theta = 0;       // rotation (rad)
  double rim_half_width = 1.25;
  double rim_value = 0, interior_value = 0;

  // Approximate signed distance to the outline (negative inside).
  double signed_distance(double x, double y) const;
};

struct Phantom {
  Image image;
  std::vector<Droplet> droplets;
};

Phantom generate_phantom_layout(const PhantomSpec& spec);
Image generate_phantom(const PhantomSpec& spec);

}  // namespace semsparse
