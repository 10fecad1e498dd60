#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semsparse/image.hpp"
#include "semsparse/rng.hpp"

namespace semsparse {

/// A set of square example patches ("atoms"), values in [0, 1].
class PatchDictionary {
 public:
  PatchDictionary() = default;
  PatchDictionary(std::size_t patch_size, std::vector<double> atoms, std::string provenance = {});

  std::size_t patch_size() const { return patch_size_; }
  std::size_t dim() const { return patch_size_ * patch_size_; }
  std::size_t size() const { return dim() == 0 ? 0 : atoms_.size() / dim(); }
  std::span<const double> atom(std::size_t i) const { return {atoms_.data() + i * dim(), dim()}; }
  std::span<const double> data() const { return atoms_; }
  const std::string& provenance() const { return provenance_; }

 private:
  std::size_t patch_size_ = 0;
  std::vector<double> atoms_;
  std::string provenance_;
};

// Every grid patch of every image; a seeded uniform subsample of max_atoms
// patches (kept in extraction order) when there are more candidates.
PatchDictionary build_dictionary(const std::vector<Image>& images, std::size_t patch_size, std::size_t stride,
                                 std::size_t max_atoms, const SeededRng& rng);

// "PDC1" file: text header (magic, optional '#' provenance line, patch size and
// atom count) followed by row-major little-endian float32 atoms.
void save_dictionary(const PatchDictionary& dict, const std::filesystem::path& path);
PatchDictionary load_dictionary(const std::filesystem::path& path);

}  // namespace semsparse
