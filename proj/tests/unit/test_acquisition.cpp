#include <doctest.h>

#include <cmath>

#include "semsparse/acquisition.hpp"
#include "semsparse/errors.hpp"
#include "test_util.hpp"

using namespace semsparse;

TEST_CASE("electrons per pixel") {
  const double e = 1.602176634e-19;
  CHECK(electrons_per_pixel(0.1, 10.0) == doctest::Approx(1e-15 / e).epsilon(1e-14));
  CHECK(electrons_per_pixel(0.1, 10.0) == doctest::Approx(6241.5).epsilon(0.1 / 6241.5));
  CHECK(electrons_per_pixel(0.8, 10.0) == doctest::Approx(8e-15 / e).epsilon(1e-14));
  CHECK(electrons_per_pixel(0.0, 37.0) == 0.0);
  CHECK_THROWS(electrons_per_pixel(-1.0, 1.0));
}

TEST_CASE("beam blur power law") {
  const BeamModel m;
  CHECK(beam_blur_sigma(m.current_ref, m) == doctest::Approx(m.sigma_ref));
  CHECK(beam_blur_sigma(4 * m.current_ref, m) == doctest::Approx(2 * m.sigma_ref).epsilon(1e-14));
  CHECK_THROWS(beam_blur_sigma(0.0, m));
  CHECK_THROWS(beam_blur_sigma(-0.1, m));
  double prev = 0;
  for (double i : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
    const double s = beam_blur_sigma(i, m);
    CHECK(s > prev);
    prev = s;
  }
}

TEST_CASE("strategy presets hold the average dwell at 10 us") {
  CHECK(average_dwell(raster_preset()) == 10.0);
  CHECK(average_dwell(low_resolution_preset()) == 10.0);
  CHECK(average_dwell(sparse_preset()) == 10.0);
  CHECK(low_resolution_preset().pixel_size == 2 * raster_preset().pixel_size);
}

TEST_CASE("simulate_frame") {
  const Image truth = testutil::random_image(32, 24, 4);
  const BeamModel beam;
  SUBCASE("same seed gives identical frames under both policies") {
    const ScanBudget b = raster_preset();
    const Image f1 = simulate_frame(truth, b, beam, SeededRng(5), Exec::serial);
    const Image f2 = simulate_frame(truth, b, beam, SeededRng(5), Exec::parallel);
    CHECK(f1 == f2);
    CHECK(f1 != simulate_frame(truth, b, beam, SeededRng(6)));
  }
  SUBCASE("huge dose converges to the blurred truth") {
    ScanBudget b = raster_preset();
    b.dwell_per_sampled_pixel = 2e6;  // ~1.2e9 electrons
    REQUIRE(electrons_per_pixel(b.beam_current, b.dwell_per_sampled_pixel) >= 1e9);
    const Image f = simulate_frame(truth, b, beam, SeededRng(8));
    const Image blurred = gaussian_smooth(truth, beam_blur_sigma(b.beam_current, beam));
    CHECK(testutil::max_abs_diff(f, blurred) <= 1e-3);
  }
  SUBCASE("zero current is a numerical error") {
    ScanBudget b = raster_preset();
    b.beam_current = 0.0;
    CHECK_THROWS_AS(simulate_frame(truth, b, beam, SeededRng(1)), NumericalError);
  }
}

TEST_CASE("shot-noise mean and variance on a constant scene") {
  const std::size_t side = 400;  // 1.6e5 pixels
  const Image truth(side, side, 0.5);
  const ScanBudget b = raster_preset();
  const double n = electrons_per_pixel(b.beam_current, b.dwell_per_sampled_pixel);
  const Image f = simulate_frame(truth, b, BeamModel{}, SeededRng(77));
  double s = 0, s2 = 0;
  for (double v : f.pixels()) {
    s += v;
    s2 += v * v;
  }
  const double count = static_cast<double>(f.size());
  const double mean = s / count, var = (s2 - count * mean * mean) / (count - 1);
  const double expect_var = 0.5 / n;
  CHECK(std::fabs(mean - 0.5) <= 3.0 * std::sqrt(expect_var / count));
  // Sample variance has relative SE sqrt(2/(count-1)) ~ 0.35 %.
  CHECK(std::fabs(var / expect_var - 1.0) <= 3.0 * std::sqrt(2.0 / (count - 1)));
}

TEST_CASE("combined frame is dose weighted") {
  const Image a(2, 1, 0.2), b(2, 1, 0.6);
  CHECK(synthesize_combined_frame(a, 10, b, 30)[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(synthesize_combined_frame(a, 10, a, 30) == a);
  CHECK(synthesize_combined_frame(a, 10, b, 0) == a);
  CHECK_THROWS(synthesize_combined_frame(a, 10, Image(3, 1), 30));
}

TEST_CASE("downscale by two") {
  CHECK(downscale_by_two(Image(2, 2, std::vector<double>{0, 1, 1, 0}))[0] == 0.5);
  const Image c = downscale_by_two(Image(6, 4, 0.37));
  CHECK(c.width() == 3);
  CHECK(c.height() == 2);
  for (double v : c.pixels()) CHECK(v == 0.37);
  const Image img = testutil::random_image(5, 5, 3);
  const Image d = downscale_by_two(img);
  REQUIRE(d.width() == 2);
  REQUIRE(d.height() == 2);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 2; ++x) {
      const double want = (img(2 * x, 2 * y) + img(2 * x + 1, 2 * y) + img(2 * x, 2 * y + 1) + img(2 * x + 1, 2 * y + 1)) / 4;
      CHECK(d(x, y) == doctest::Approx(want).epsilon(1e-15));
    }
}

TEST_CASE("sparse scan cardinality is exact") {
  CHECK(sparse_scan(Image(480, 424), 0.25, SeededRng(1)).sampled_count() == 50880);
  CHECK(sparse_scan(Image(10, 10), 1.0, SeededRng(1)).sampled_count() == 100);
  CHECK(sparse_scan(Image(10, 10), 0.0, SeededRng(1)).sampled_count() == 0);
  const Image f(37, 29);
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    CHECK(sparse_scan(f, 0.3, SeededRng(seed)).sampled_count() == static_cast<std::size_t>(std::llround(0.3 * 37 * 29)));
  const auto m1 = sparse_scan(f, 0.3, SeededRng(4)), m2 = sparse_scan(f, 0.3, SeededRng(4));
  CHECK(std::equal(m1.mask().begin(), m1.mask().end(), m2.mask().begin()));
  CHECK_THROWS(sparse_scan(f, 1.5, SeededRng(1)));
}
