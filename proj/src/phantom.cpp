#include "semsparse/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "semsparse/rng.hpp"

namespace semsparse {

void PhantomSpec::validate() const {
  if (width < 64 || height < 64) throw std::invalid_argument("phantom: width and height must be >= 64");
  if (!(structure_density >= 0.0 && structure_density <= 1.0))
    throw std::invalid_argument("phantom: structure_density must lie in [0, 1]");
  if (!(contrast_lo >= 0.0 && contrast_hi <= 1.0 && contrast_lo < contrast_hi))
    throw std::invalid_argument("phantom: contrast range must satisfy 0 <= lo < hi <= 1");
}

double Droplet::signed_distance(double x, double y) const {
  const double c = std::cos(theta), s = std::sin(theta);
  const double u = c * (x - cx) + s * (y - cy), v = -s * (x - cx) + c * (y - cy);
  const double rho = std::hypot(u / a, v / b);
  if (rho < 1e-12) return -std::min(a, b);
  const double grad = std::hypot(u / (a * a), v / (b * b)) / rho;
  return (rho - 1.0) / grad;
}

namespace {

constexpr std::uint64_t kTagTexture = 0, kTagCurves = 1, kTagDroplets = 2;

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Lattice value noise in [-1, 1] with smoothstep blending.
class ValueNoise {
 public:
  ValueNoise(std::size_t width, std::size_t height, double cell, SeededRng& rng)
      : cell_(cell),
        cols_(static_cast<std::size_t>(std::ceil(static_cast<double>(width) / cell)) + 2),
        rows_(static_cast<std::size_t>(std::ceil(static_cast<double>(height) / cell)) + 2),
        lattice_(cols_ * rows_) {
    for (double& v : lattice_) v = 2.0 * rng.uniform() - 1.0;
  }
  double operator()(double x, double y) const {
    const double gx = x / cell_, gy = y / cell_;
    const auto ix = static_cast<std::size_t>(gx), iy = static_cast<std::size_t>(gy);
    const double tx = smoothstep(gx - static_cast<double>(ix)), ty = smoothstep(gy - static_cast<double>(iy));
    auto at = [&](std::size_t i, std::size_t j) { return lattice_[j * cols_ + i]; };
    const double top = at(ix, iy) + tx * (at(ix + 1, iy) - at(ix, iy));
    const double bottom = at(ix, iy + 1) + tx * (at(ix + 1, iy + 1) - at(ix, iy + 1));
    return top + ty * (bottom - top);
  }

 private:
  double cell_;
  std::size_t cols_, rows_;
  std::vector<double> lattice_;
};

// Coverage of a line of the given half width by a unit pixel at distance d.
double line_coverage(double d, double half_width) { return std::clamp(half_width + 0.5 - std::fabs(d), 0.0, 1.0); }

struct Curve {
  double ox, oy;     // point on the base line
  double dx, dy;     // unit direction
  double amplitude, omega, phase;
  double half_width;

  double distance(double x, double y) const {
    const double t = (x - ox) * dx + (y - oy) * dy;
    const double n = -(x - ox) * dy + (y - oy) * dx;
    const double f = n - amplitude * std::sin(omega * t + phase);
    const double slope = amplitude * omega * std::cos(omega * t + phase);
    return f / std::sqrt(1.0 + slope * slope);
  }
};

}  // namespace

Phantom generate_phantom_layout(const PhantomSpec& spec) {
  spec.validate();
  const std::size_t W = spec.width, H = spec.height;
  const double lo = spec.contrast_lo, hi = spec.contrast_hi, range = hi - lo;
  const double scale = static_cast<double>(std::min(W, H)) / 256.0;

  auto tex_rng = SeededRng::derive(spec.seed, {kTagTexture});
  const ValueNoise coarse(W, H, 32.0, tex_rng), medium(W, H, 12.0, tex_rng), fine(W, H, 5.0, tex_rng);
  const double base = lo + 0.4 * range, tex_amp = (0.05 + 0.15 * spec.structure_density) * range;

  auto curve_rng = SeededRng::derive(spec.seed, {kTagCurves});
  std::vector<Curve> curves;
  for (std::size_t c = 0; c < spec.curves; ++c) {
    const double angle = std::numbers::pi * curve_rng.uniform();
    Curve cv{};
    cv.ox = static_cast<double>(W) * (0.15 + 0.7 * curve_rng.uniform());
    cv.oy = static_cast<double>(H) * (0.15 + 0.7 * curve_rng.uniform());
    cv.dx = std::cos(angle);
    cv.dy = std::sin(angle);
    cv.amplitude = scale * (6.0 + 14.0 * curve_rng.uniform());
    cv.omega = 2.0 * std::numbers::pi / (scale * (60.0 + 80.0 * curve_rng.uniform()));
    cv.phase = 2.0 * std::numbers::pi * curve_rng.uniform();
    cv.half_width = 0.9 + 0.6 * curve_rng.uniform();
    curves.push_back(cv);
  }

  auto drop_rng = SeededRng::derive(spec.seed, {kTagDroplets});
  std::vector<Droplet> droplets;
  for (std::size_t d = 0; d < spec.droplets; ++d) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      Droplet dr;
      const double r0 = scale * (10.0 + 6.0 * spec.structure_density);
      dr.a = r0 * (0.7 + 0.6 * drop_rng.uniform());
      dr.b = dr.a * (0.65 + 0.35 * drop_rng.uniform());
      dr.theta = std::numbers::pi * drop_rng.uniform();
      const double margin = dr.a + 4.0;
      dr.cx = margin + (static_cast<double>(W) - 2.0 * margin) * drop_rng.uniform();
      dr.cy = margin + (static_cast<double>(H) - 2.0 * margin) * drop_rng.uniform();
      dr.rim_half_width = 1.0 + 0.75 * drop_rng.uniform();
      dr.rim_value = hi - 0.05 * range * drop_rng.uniform();
      dr.interior_value = lo + 0.1 * range * drop_rng.uniform();
      bool clear = true;
      for (const auto& o : droplets)
        if (std::hypot(o.cx - dr.cx, o.cy - dr.cy) < o.a + dr.a + 6.0) clear = false;
      if (clear) {
        droplets.push_back(dr);
        break;
      }
    }
  }

  std::vector<double> px(W * H);
  const double membrane = lo + 0.08 * range;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      double v = base + tex_amp * (0.55 * coarse(fx, fy) + 0.3 * medium(fx, fy) + 0.15 * fine(fx, fy));
      for (const auto& cv : curves) {
        const double cov = line_coverage(cv.distance(fx, fy), cv.half_width);
        v += cov * (membrane - v);
      }
      for (const auto& dr : droplets) {
        const double d = dr.signed_distance(fx, fy);
        const double fill = std::clamp(0.5 - d, 0.0, 1.0);
        v += fill * (dr.interior_value - v);
        v += line_coverage(d, dr.rim_half_width) * (dr.rim_value - v);
      }
      px[y * W + x] = std::clamp(v, 0.0, 1.0);
    }
  return {Image(W, H, std::move(px)), std::move(droplets)};
}

Image generate_phantom(const PhantomSpec& spec) { return generate_phantom_layout(spec).image; }

}  // namespace semsparse
