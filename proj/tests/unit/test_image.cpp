#include <doctest.h>

#include <cmath>
#include <fstream>

#include "semsparse/errors.hpp"
#include "semsparse/image.hpp"
#include "semsparse/reference.hpp"
#include "test_util.hpp"

using namespace semsparse;
using testutil::tmp_dir;

namespace {

void write_bytes(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Raw samples after the 4-token header.
std::vector<unsigned> pgm_samples(const std::filesystem::path& p) {
  const std::string s = read_bytes(p);
  std::size_t pos = 0;
  int fields = 0;
  while (fields < 4) {
    while (std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    while (!std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    ++fields;
  }
  ++pos;
  const bool wide = s.find("65535") != std::string::npos;
  std::vector<unsigned> out;
  for (; pos < s.size(); pos += wide ? 2 : 1)
    out.push_back(wide ? (static_cast<unsigned char>(s[pos]) << 8) | static_cast<unsigned char>(s[pos + 1])
                       : static_cast<unsigned char>(s[pos]));
  return out;
}

}  // namespace

TEST_CASE("image construction clamps and rejects non-finite values") {
  const Image img(2, 1, std::vector<double>{-0.5, 1.5});
  CHECK(img[0] == 0.0);
  CHECK(img[1] == 1.0);
  CHECK_THROWS_AS(Image(2, 2, std::vector<double>{0, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(Image(1, 1, std::vector<double>{NAN}), std::invalid_argument);
  CHECK_THROWS_AS(Image(0, 3), std::invalid_argument);
}

TEST_CASE("8-bit P5 decode normalizes by maxval") {
  const auto p = tmp_dir("image") / "tiny.pgm";
  write_bytes(p, std::string("P5\n2 2\n255\n") + std::string{'\0', '\x80', '\xff', '\x40'});
  const Image img = load_image(p);
  REQUIRE(img.width() == 2);
  REQUIRE(img.height() == 2);
  CHECK(img[0] == 0.0);
  CHECK(img[1] == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
  CHECK(img[1] == doctest::Approx(0.50196).epsilon(1e-5));
  CHECK(img[2] == 1.0);
  CHECK(img[3] == doctest::Approx(0.25098).epsilon(1e-4));
}

TEST_CASE("PGM header comments are skipped") {
  const auto p = tmp_dir("image") / "comment.pgm";
  write_bytes(p, std::string("P5\n# made by hand\n1 1\n255\n") + std::string{'\xff'});
  CHECK(load_image(p)[0] == 1.0);
}

TEST_CASE("codec rejects wrong magic, truncated data and bad maxval") {
  const auto dir = tmp_dir("image");
  write_bytes(dir / "p6.pgm", "P6\n1 1\n255\n\x01\x02\x03");
  CHECK_THROWS_AS(load_image(dir / "p6.pgm"), CodecError);
  write_bytes(dir / "short.pgm", "P5\n4 4\n255\n\x01\x02");
  CHECK_THROWS_AS(load_image(dir / "short.pgm"), CodecError);
  write_bytes(dir / "maxval.pgm", "P5\n1 1\n100\n\x01");
  CHECK_THROWS_AS(load_image(dir / "maxval.pgm"), CodecError);
  CHECK_THROWS_AS(load_image(dir / "missing.pgm"), CodecError);
}

TEST_CASE("save quantizes with round(v * maxval)") {
  const auto dir = tmp_dir("image");
  save_image(Image(3, 2, 0.5), dir / "half16.pgm", 16);
  for (unsigned s : pgm_samples(dir / "half16.pgm")) CHECK(s == 32768u);
  save_image(Image(3, 2, 0.0), dir / "zero16.pgm", 16);
  for (unsigned s : pgm_samples(dir / "zero16.pgm")) CHECK(s == 0u);
  save_image(Image(3, 2, 1.0), dir / "one8.pgm", 8);
  for (unsigned s : pgm_samples(dir / "one8.pgm")) CHECK(s == 255u);
  CHECK_THROWS_AS(save_image(Image(1, 1), dir / "x.pgm", 12), std::invalid_argument);
}

TEST_CASE("16-bit round trip is within one quantization step") {
  const Image img = testutil::random_image(17, 9, 3);
  const auto p = tmp_dir("image") / "rt.pgm";
  save_image(img, p, 16);
  const Image back = load_image(p);
  CHECK(testutil::max_abs_diff(img, back) <= 0.5 / 65535.0 + 1e-15);
}

TEST_CASE("sparse codec writes 0/255 masks and rejects other mask values") {
  const auto dir = tmp_dir("image");
  const Image img = testutil::random_image(4, 3, 5);
  const SparseImage full(img, std::vector<std::uint8_t>(12, 1));
  save_sparse(full, dir / "v.pgm", dir / "m.pgm");
  for (unsigned s : pgm_samples(dir / "m.pgm")) CHECK(s == 255u);

  std::vector<std::uint8_t> mask(12, 0);
  mask[1] = mask[7] = 1;
  save_sparse(SparseImage(img, mask), dir / "v2.pgm", dir / "m2.pgm");
  const SparseImage back = load_sparse(dir / "v2.pgm", dir / "m2.pgm");
  CHECK(back.sampled_count() == 2);
  CHECK(back.sampled(1));
  CHECK(back.sampled(7));
  CHECK(back.image()[0] == 0.0);  // unsampled written as 0
  CHECK(std::fabs(back.image()[7] - img[7]) <= 0.5 / 65535.0 + 1e-15);

  write_bytes(dir / "bad_mask.pgm", std::string("P5\n4 3\n255\n") + std::string(11, '\xff') + std::string(1, '\x07'));
  CHECK_THROWS_AS(load_sparse(dir / "v.pgm", dir / "bad_mask.pgm"), CodecError);
}

TEST_CASE("gaussian smoothing") {
  const Image img = testutil::random_image(23, 19, 11);
  SUBCASE("sigma 0 is the identity") { CHECK(gaussian_smooth(img, 0.0) == img); }
  SUBCASE("constant stays constant") {
    const Image c = gaussian_smooth(Image(12, 9, 0.3), 2.0);
    for (double v : c.pixels()) CHECK(v == doctest::Approx(0.3).epsilon(1e-14));
  }
  SUBCASE("impulse center at sigma 0.5") {
    std::vector<double> v(25, 0.0);
    v[12] = 1.0;
    const Image out = gaussian_smooth(Image(5, 5, v), 0.5);
    const double w0 = 1.0 / (1.0 + 2.0 * std::exp(-2.0) + 2.0 * std::exp(-8.0));
    CHECK(out(2, 2) == doctest::Approx(w0 * w0).epsilon(1e-12));
    CHECK(out(2, 2) == doctest::Approx(0.61876).epsilon(1e-4));
  }
  SUBCASE("matches the direct 2-D convolution, both policies") {
    for (double sigma : {0.5, 1.0, 2.7}) {
      const Image want = ref::gaussian_smooth_direct(img, sigma);
      CHECK(testutil::max_abs_diff(gaussian_smooth(img, sigma, Exec::serial), want) <= 1e-12);
      CHECK(gaussian_smooth(img, sigma, Exec::serial) == gaussian_smooth(img, sigma, Exec::parallel));
    }
  }
  CHECK_THROWS(gaussian_smooth(img, -1.0));
}

TEST_CASE("mirror index reflects with edge repetition") {
  CHECK(mirror_index(-1, 4) == 0);
  CHECK(mirror_index(-2, 4) == 1);
  CHECK(mirror_index(4, 4) == 3);
  CHECK(mirror_index(5, 4) == 2);
  CHECK(mirror_index(9, 4) == 1);
  CHECK(mirror_index(3, 1) == 0);
}

TEST_CASE("patch extraction grid") {
  CHECK(extract_patches(Image(8, 8), 8, 8).count() == 1);
  CHECK(extract_patches(Image(16, 16), 8, 4).count() == 9);
  CHECK_THROWS(extract_patches(Image(8, 8), 16, 1));
  // A final flush offset covers the trailing edge.
  CHECK(grid_offsets(10, 4, 4) == std::vector<std::size_t>{0, 4, 6});

  const Image img = testutil::random_image(12, 10, 2);
  const PatchSet ps = extract_patches(img, 4, 3);
  for (std::size_t i = 0; i < ps.count(); ++i) {
    const auto [px, py] = ps.positions[i];
    for (std::size_t k = 0; k < 16; ++k) CHECK(ps.patch(i)[k] == img(px + k % 4, py + k / 4));
  }
}

TEST_CASE("sparse extraction carries masks") {
  std::vector<std::uint8_t> mask(64, 0);
  mask[9] = 1;
  const SparseImage sp(Image(8, 8, 0.5), mask);
  const PatchSet ps = extract_patches(sp, 4, 4);
  REQUIRE(ps.has_masks());
  CHECK(ps.known_mask(0)[5] == 1);
  CHECK(ps.known_mask(0)[0] == 0);
}

TEST_CASE("patch assembly") {
  const Image img = testutil::random_image(16, 8, 9);
  SUBCASE("exact tiling is bit exact") { CHECK(assemble_patches(extract_patches(img, 8, 8), 16, 8) == img); }
  SUBCASE("overlap of 0 and 1 averages to 0.5") {
    PatchSet ps;
    ps.patch_size = 2;
    ps.positions = {{0, 0}, {1, 0}};
    ps.values = {0, 0, 0, 0, 1, 1, 1, 1};
    const Image out = assemble_patches(ps, 3, 2);
    CHECK(out(0, 0) == 0.0);
    CHECK(out(1, 0) == 0.5);
    CHECK(out(1, 1) == 0.5);
    CHECK(out(2, 1) == 1.0);
  }
  SUBCASE("uncovered pixels are an error") {
    PatchSet ps;
    ps.patch_size = 2;
    ps.positions = {{0, 0}};
    ps.values = {0, 0, 0, 0};
    CHECK_THROWS(assemble_patches(ps, 2, 3));
  }
}

TEST_CASE("crop") {
  const Image img = testutil::random_image(7, 5, 1);
  CHECK(crop(img, {0, 0, 7, 5}) == img);
  const Image px = crop(img, {3, 2, 1, 1});
  CHECK(px.size() == 1);
  CHECK(px[0] == img(3, 2));
  CHECK_THROWS_AS(crop(img, {5, 0, 3, 1}), std::out_of_range);
}
