#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "semsparse/parallel.hpp"

namespace semsparse {

/// Dense grayscale raster with intensities in [0, 1], row-major.
///
/// Values are clamped to [0, 1] on construction; non-finite values are
/// rejected. An Image never changes after construction; algorithms build a
/// std::vector<double> and wrap it at the end.
class Image {
 public:
  Image() = default;
  Image(std::size_t width, std::size_t height, double fill = 0.0);
  Image(std::size_t width, std::size_t height, std::vector<double> data);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double operator()(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }
  double operator[](std::size_t i) const { return data_[i]; }
  std::span<const double> pixels() const { return data_; }
  std::vector<double> to_vector() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

/// An image plus a sampling mask (1 = scanned). Intensities at unsampled
/// positions are carried along but must be ignored by every consumer.
class SparseImage {
 public:
  SparseImage() = default;
  SparseImage(Image image, std::vector<std::uint8_t> mask);

  const Image& image() const { return image_; }
  std::span<const std::uint8_t> mask() const { return mask_; }
  std::size_t width() const { return image_.width(); }
  std::size_t height() const { return image_.height(); }
  bool sampled(std::size_t i) const { return mask_[i] != 0; }
  bool sampled(std::size_t x, std::size_t y) const { return mask_[y * image_.width() + x] != 0; }
  std::size_t sampled_count() const;
  double sampled_fraction() const;

 private:
  Image image_;
  std::vector<std::uint8_t> mask_;
};

struct Rect {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t w = 1;
  std::size_t h = 1;

  bool operator==(const Rect&) const = default;
};

bool fits(const Rect& roi, std::size_t width, std::size_t height);

struct PatchPos {
  std::size_t x = 0;
  std::size_t y = 0;

  bool operator==(const PatchPos&) const = default;
};

/// Square patches stored contiguously (patch_size^2 values each).
struct PatchSet {
  std::size_t patch_size = 0;
  std::vector<PatchPos> positions;
  std::vector<double> values;
  std::vector<std::uint8_t> known;  // empty, or one flag per value

  std::size_t count() const { return positions.size(); }
  std::size_t dim() const { return patch_size * patch_size; }
  bool has_masks() const { return !known.empty(); }
  std::span<const double> patch(std::size_t i) const { return {values.data() + i * dim(), dim()}; }
  std::span<double> patch(std::size_t i) { return {values.data() + i * dim(), dim()}; }
  std::span<const std::uint8_t> known_mask(std::size_t i) const { return {known.data() + i * dim(), dim()}; }
};

// PGM "P5" codec. 8-bit or 16-bit (big-endian) samples.
Image load_image(const std::filesystem::path& path);
void save_image(const Image& image, const std::filesystem::path& path, int depth = 16);

// Value PGM (unsampled written as 0) plus mask PGM with 255 = sampled, 0 = not.
void save_sparse(const SparseImage& sparse, const std::filesystem::path& value_path,
                 const std::filesystem::path& mask_path, int depth = 16);
SparseImage load_sparse(const std::filesystem::path& value_path, const std::filesystem::path& mask_path);

// Separable Gaussian, radius ceil(3 sigma), mirrored borders (d c b a | a b c d).
Image gaussian_smooth(const Image& image, double sigma, Exec exec = Exec::parallel);

// Normalized 1-D kernel used by gaussian_smooth; index r is the center.
std::vector<double> gaussian_kernel(double sigma);

// Mirror index for positions outside [0, n).
std::size_t mirror_index(std::ptrdiff_t i, std::size_t n);

// Grid offsets 0, stride, 2*stride, ... plus a final offset flush with the edge.
std::vector<std::size_t> grid_offsets(std::size_t extent, std::size_t patch, std::size_t stride);

PatchSet extract_patches(const Image& source, std::size_t patch_size, std::size_t stride);
PatchSet extract_patches(const SparseImage& source, std::size_t patch_size, std::size_t stride);

// Per-pixel mean of all patch values covering the pixel.
Image assemble_patches(const PatchSet& patches, std::size_t width, std::size_t height);

Image crop(const Image& image, const Rect& roi);

}  // namespace semsparse
