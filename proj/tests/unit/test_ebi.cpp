#include <doctest.h>

#include "ebi_fixture.hpp"
#include "semsparse/acquisition.hpp"
#include "semsparse/ebi.hpp"
#include "semsparse/reference.hpp"
#include "test_util.hpp"

using namespace semsparse;

TEST_CASE("best match") {
  SUBCASE("single atom returns its masked squared distance") {
    const PatchDictionary d(2, {0.1, 0.2, 0.3, 0.4});
    const std::vector<double> t{0.0, 0.0, 0.3, 1.0};
    const std::vector<std::uint8_t> k{1, 0, 1, 1};
    const Match m = best_match(d, t, k);
    CHECK(m.index == 0);
    CHECK(m.cost == doctest::Approx(0.01 + 0.0 + 0.36));
  }
  SUBCASE("exact match has zero cost") {
    const PatchDictionary d(2, {0.9, 0.9, 0.9, 0.9, 0.1, 0.2, 0.3, 0.4, 0.5, 0.5, 0.5, 0.5});
    const Match m = best_match(d, std::vector<double>{0.1, 0.0, 0.0, 0.4}, std::vector<std::uint8_t>{1, 0, 0, 1});
    CHECK(m.index == 1);
    CHECK(m.cost == 0.0);
  }
  SUBCASE("ties go to the lower index") {
    const PatchDictionary d(1, {0.4, 0.6, 0.4});
    CHECK(best_match(d, std::vector<double>{0.5}, std::vector<std::uint8_t>{1}).index == 0);
  }
  SUBCASE("agrees with the direct scan") {
    const auto d = build_dictionary({testutil::random_image(64, 64, 1)}, 8, 2, 1000, SeededRng(2));
    SeededRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> t(64);
      std::vector<std::uint8_t> k(64);
      for (std::size_t i = 0; i < 64; ++i) t[i] = rng.uniform(), k[i] = rng.bernoulli(0.3);
      k[0] = 1;
      const std::size_t want = ref::best_match_direct(d.data(), 64, t, k);
      CHECK(best_match(d, t, k, Exec::serial).index == want);
      CHECK(best_match(d, t, k, Exec::parallel).index == want);
    }
  }
  SUBCASE("errors") {
    const PatchDictionary d(1, {0.5});
    CHECK_THROWS(best_match(d, std::vector<double>{0.5}, std::vector<std::uint8_t>{0}));
    CHECK_THROWS(best_match(PatchDictionary{}, std::vector<double>{0.5}, std::vector<std::uint8_t>{1}));
  }
}

TEST_CASE("exact recovery in the unique-atom construction") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto c = testutil::ebi_exact_case(seed);
    CHECK(c.sparse.sampled_count() == 128);
    EbiParams p;
    EbiReport rep;
    const Image out = ebi_inpaint(c.sparse, c.dict, p, &rep);
    CHECK(out == c.truth);
    CHECK(rep.iterations == 4);
    CHECK_FALSE(rep.warned);
  }
}

TEST_CASE("ebi contracts") {
  const Image img = testutil::random_image(40, 40, 8);
  const auto dict = build_dictionary({testutil::random_image(40, 40, 9)}, 8, 4, 500, SeededRng(1));
  SUBCASE("fully observed is the identity") {
    const SparseImage full(img, std::vector<std::uint8_t>(img.size(), 1));
    CHECK(ebi_inpaint(full, dict, EbiParams{}) == img);
  }
  SUBCASE("observed pixels are bit-preserved, policies agree") {
    for (double f : {0.1, 0.25, 0.6}) {
      const SparseImage sp = sparse_scan(img, f, SeededRng(10));
      const Image out = ebi_inpaint(sp, dict, EbiParams{}, nullptr, Exec::serial);
      for (std::size_t i = 0; i < out.size(); ++i)
        if (sp.sampled(i)) CHECK(out[i] == img[i]);
      CHECK(out == ebi_inpaint(sp, dict, EbiParams{}, nullptr, Exec::parallel));
    }
  }
  SUBCASE("sparse regions fall back with a warning") {
    const SparseImage sp = sparse_scan(img, 0.05, SeededRng(11));
    EbiParams p;
    p.min_known = 10;
    EbiReport rep;
    const Image out = ebi_inpaint(sp, dict, p, &rep);
    CHECK(rep.warned);
    CHECK(rep.fallback_pixels > 0);
    for (std::size_t i = 0; i < out.size(); ++i)
      if (sp.sampled(i)) CHECK(out[i] == img[i]);
  }
  SUBCASE("errors") {
    const SparseImage sp = sparse_scan(img, 0.25, SeededRng(12));
    CHECK_THROWS(ebi_inpaint(sp, PatchDictionary{}, EbiParams{}));
    EbiParams p;
    p.patch_size = 4;
    CHECK_THROWS(ebi_inpaint(sp, dict, p));
    CHECK_THROWS(ebi_inpaint(SparseImage(img, std::vector<std::uint8_t>(img.size(), 0)), dict, EbiParams{}));
  }
}
