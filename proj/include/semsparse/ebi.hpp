#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "semsparse/dictionary.hpp"
#include "semsparse/image.hpp"
#include "semsparse/parallel.hpp"

namespace semsparse {

struct EbiParams {
  std::size_t patch_size = 8;
  std::size_t min_known = 4;  // observed pixels a region needs before it may be matched
  std::size_t max_iterations = 10'000'000;

  void validate() const;
};

struct Match {
  std::size_t index = 0;
  double cost = 0.0;
};

// argmin over atoms of sum over known pixels of (atom - target)^2; ties go to
// the lowest index. Throws if no pixel is known or the dictionary is empty.
Match best_match(const PatchDictionary& dict, std::span<const double> target, std::span<const std::uint8_t> known,
                 Exec exec = Exec::parallel);

struct EbiReport {
  std::size_t iterations = 0;
  std::size_t fallback_pixels = 0;  // filled by natural-neighbor interpolation
  bool warned = false;
};

// Patch-aligned candidate regions on a stride (patch_size / 2) grid, visited
// in order of originally observed pixel count; each region's missing pixels
// are copied from the best-matching atom. Observed pixels are never changed.
Image ebi_inpaint(const SparseImage& sparse, const PatchDictionary& dict, const EbiParams& params,
                  EbiReport* report = nullptr, Exec exec = Exec::parallel);

}  // namespace semsparse
