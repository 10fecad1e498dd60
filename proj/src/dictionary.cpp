#include "semsparse/dictionary.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "semsparse/errors.hpp"

namespace semsparse {

PatchDictionary::PatchDictionary(std::size_t patch_size, std::vector<double> atoms, std::string provenance)
    : patch_size_(patch_size), atoms_(std::move(atoms)), provenance_(std::move(provenance)) {
  if (patch_size_ == 0) throw std::invalid_argument("PatchDictionary: patch size must be >= 1");
  if (atoms_.empty()) throw std::invalid_argument("PatchDictionary: needs at least one atom");
  if (atoms_.size() % dim() != 0) throw std::invalid_argument("PatchDictionary: data length is not a multiple of patch_size^2");
  for (double v : atoms_)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("PatchDictionary: atom values must lie in [0, 1]");
  if (provenance_.find('\n') != std::string::npos) throw std::invalid_argument("PatchDictionary: provenance must be one line");
}

PatchDictionary build_dictionary(const std::vector<Image>& images, std::size_t patch_size, std::size_t stride,
                                 std::size_t max_atoms, const SeededRng& rng) {
  if (images.empty()) throw std::invalid_argument("build_dictionary: no images");
  if (max_atoms < 1) throw std::invalid_argument("build_dictionary: max_atoms must be >= 1");
  std::vector<double> all;
  for (const auto& img : images) {
    const PatchSet ps = extract_patches(img, patch_size, stride);
    all.insert(all.end(), ps.values.begin(), ps.values.end());
  }
  const std::size_t dim = patch_size * patch_size;
  const std::size_t count = all.size() / dim;
  std::string prov = "grid patches of " + std::to_string(images.size()) + " image(s), stride " + std::to_string(stride);
  if (count <= max_atoms) return PatchDictionary(patch_size, std::move(all), prov);

  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  SeededRng r = rng;
  for (std::size_t i = 0; i < max_atoms; ++i) std::swap(idx[i], idx[i + r.below(count - i)]);
  idx.resize(max_atoms);
  std::sort(idx.begin(), idx.end());
  std::vector<double> kept;
  kept.reserve(max_atoms * dim);
  for (std::size_t j : idx) kept.insert(kept.end(), all.begin() + j * dim, all.begin() + (j + 1) * dim);
  prov += ", subsampled " + std::to_string(max_atoms) + " of " + std::to_string(count) + " (seed " +
          std::to_string(rng.seed()) + ")";
  return PatchDictionary(patch_size, std::move(kept), prov);
}

void save_dictionary(const PatchDictionary& dict, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CodecError("cannot open for writing: " + path.string());
  out << "PDC1\n";
  if (!dict.provenance().empty()) out << "# " << dict.provenance() << "\n";
  out << dict.patch_size() << " " << dict.size() << "\n";
  for (double v : dict.data()) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    unsigned char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    out.write(reinterpret_cast<const char*>(b), 4);
  }
  if (!out) throw CodecError("write failed: " + path.string());
}

PatchDictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CodecError("cannot open dictionary: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "PDC1") throw CodecError("not a PDC1 dictionary: " + path.string());
  std::string provenance;
  if (in.peek() == '#') {
    std::getline(in, line);
    provenance = line.size() >= 2 ? line.substr(2) : std::string{};
  }
  if (!std::getline(in, line)) throw CodecError("truncated dictionary header: " + path.string());
  std::istringstream hdr(line);
  long long patch = 0, count = 0;
  if (!(hdr >> patch >> count) || patch < 1 || count < 1) throw CodecError("bad dictionary header: " + path.string());
  const auto n = static_cast<std::size_t>(patch * patch * count);
  std::vector<unsigned char> raw(n * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw CodecError("truncated dictionary data: " + path.string());
  std::vector<double> atoms(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(raw[i * 4 + k]) << (8 * k);
    atoms[i] = std::bit_cast<float>(bits);
    if (!(atoms[i] >= 0.0 && atoms[i] <= 1.0)) throw CodecError("dictionary value outside [0, 1]: " + path.string());
  }
  return PatchDictionary(static_cast<std::size_t>(patch), std::move(atoms), provenance);
}

}  // namespace semsparse
