#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "semsparse/acquisition.hpp"
#include "semsparse/interpolation.hpp"
#include "sibson_oracle.hpp"
#include "test_util.hpp"

using namespace semsparse;

namespace {

constexpr InterpMethod kMethods[] = {InterpMethod::nearest, InterpMethod::bilinear, InterpMethod::bicubic,
                                     InterpMethod::natural_neighbor};

SparseImage masked(const Image& img, double fraction, std::uint64_t seed) {
  return sparse_scan(img, fraction, SeededRng(seed));
}

// Pixels strictly inside the hull, approximated by a margin from the frame edge
// that a 25 % random mask fills with overwhelming probability.
bool interior(std::size_t x, std::size_t y, std::size_t w, std::size_t h, std::size_t m = 6) {
  return x >= m && y >= m && x + m < w && y + m < h;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_interp_method("nn") == InterpMethod::natural_neighbor);
  CHECK(parse_interp_method("natural_neighbor") == InterpMethod::natural_neighbor);
  CHECK(parse_interp_method("bicubic") == InterpMethod::bicubic);
  CHECK_FALSE(parse_interp_method("spline").has_value());
  for (auto m : kMethods) CHECK(parse_interp_method(to_string(m)) == m);
}

TEST_CASE("fully sampled input is returned unchanged") {
  const Image img = testutil::random_image(20, 15, 2);
  const SparseImage full(img, std::vector<std::uint8_t>(img.size(), 1));
  for (auto m : kMethods) CHECK(interpolate(full, m) == img);
}

TEST_CASE("sampled pixels are exact and outputs stay in range") {
  const Image img = testutil::random_image(40, 32, 7);
  const SparseImage sp = masked(img, 0.25, 8);
  double lo = 1, hi = 0;
  for (std::size_t i = 0; i < img.size(); ++i)
    if (sp.sampled(i)) lo = std::min(lo, img[i]), hi = std::max(hi, img[i]);
  for (auto m : kMethods) {
    const Image out = interpolate(sp, m);
    for (std::size_t i = 0; i < img.size(); ++i) {
      if (sp.sampled(i)) CHECK(out[i] == img[i]);
      if (m != InterpMethod::bicubic) {
        CHECK(out[i] >= lo);
        CHECK(out[i] <= hi);
      }
    }
  }
}

TEST_CASE("serial and parallel policies agree bit for bit") {
  const SparseImage sp = masked(testutil::random_image(48, 40, 3), 0.25, 4);
  for (auto m : kMethods) CHECK(interpolate(sp, m, Exec::serial) == interpolate(sp, m, Exec::parallel));
}

TEST_CASE("linear precision") {
  const Image affine = testutil::from_fn(64, 64, [](double x, double y) { return 0.001 * x + 0.002 * y + 0.1; });
  const SparseImage sp = masked(affine, 0.25, 11);
  for (auto m : {InterpMethod::bilinear, InterpMethod::natural_neighbor, InterpMethod::bicubic}) {
    const Image out = interpolate(sp, m);
    double worst = 0;
    for (std::size_t y = 0; y < 64; ++y)
      for (std::size_t x = 0; x < 64; ++x)
        if (interior(x, y, 64, 64)) worst = std::max(worst, std::fabs(out(x, y) - affine(x, y)));
    CAPTURE(to_string(m));
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("nearest ties go to the lowest row-major sample") {
  // Samples at (0,0) and (2,0): pixel (1,0) is equidistant.
  std::vector<std::uint8_t> mask(9, 0);
  mask[0] = mask[2] = 1;
  const SparseImage sp(Image(3, 3, std::vector<double>{0.2, 0, 0.9, 0, 0, 0, 0, 0, 0}), mask);
  const Image out = interpolate(sp, InterpMethod::nearest);
  CHECK(out(1, 0) == 0.2);
  CHECK(out(2, 2) == 0.9);
}

TEST_CASE("natural neighbor agrees with the area-counting oracle") {
  const Image img = testutil::random_image(64, 64, 21);
  const SparseImage sp = masked(img, 0.25, 22);
  const Image out = interpolate(sp, InterpMethod::natural_neighbor);
  std::vector<Point2> sites;
  std::vector<double> values;
  for (std::size_t i = 0; i < img.size(); ++i)
    if (sp.sampled(i)) {
      sites.push_back({double(i % 64), double(i / 64)});
      values.push_back(img[i]);
    }
  SeededRng rng(23);
  int checked = 0;
  while (checked < 12) {
    const std::size_t x = 8 + rng.below(48), y = 8 + rng.below(48);
    if (sp.sampled(x, y)) continue;
    const auto w = testutil::sibson_area_oracle(sites, {double(x), double(y)}, 2048);
    double v = 0;
    for (std::size_t k = 0; k < w.size(); ++k) v += w[k] * values[k];
    CHECK(std::fabs(out(x, y) - v) <= 1e-3);
    ++checked;
  }
}

TEST_CASE("too few samples fall back to nearest") {
  std::vector<std::uint8_t> mask(16, 0);
  mask[5] = 1;
  const SparseImage sp(Image(4, 4, 0.4), mask);
  for (auto m : kMethods) {
    const Image out = interpolate(sp, m);
    for (double v : out.pixels()) CHECK(v == 0.4);
  }
}
