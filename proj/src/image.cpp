#include "semsparse/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>

#include "semsparse/errors.hpp"

namespace semsparse {

Image::Image(std::size_t width, std::size_t height, double fill)
    : Image(width, height, std::vector<double>(width * height, fill)) {}

Image::Image(std::size_t width, std::size_t height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width == 0 || height == 0) throw std::invalid_argument("Image: width and height must be >= 1");
  if (data_.size() != width * height) throw std::invalid_argument("Image: data length != width * height");
  for (double& v : data_) {
    if (!std::isfinite(v)) throw std::invalid_argument("Image: non-finite intensity");
    v = std::clamp(v, 0.0, 1.0);
  }
}

SparseImage::SparseImage(Image image, std::vector<std::uint8_t> mask)
    : image_(std::move(image)), mask_(std::move(mask)) {
  if (mask_.size() != image_.size()) throw std::invalid_argument("SparseImage: mask size != image size");
  for (auto& m : mask_) m = m ? 1 : 0;
}

std::size_t SparseImage::sampled_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

double SparseImage::sampled_fraction() const {
  return mask_.empty() ? 0.0 : static_cast<double>(sampled_count()) / static_cast<double>(mask_.size());
}

bool fits(const Rect& roi, std::size_t width, std::size_t height) {
  return roi.w >= 1 && roi.h >= 1 && roi.x + roi.w <= width && roi.y + roi.h <= height;
}

// ---------------------------------------------------------------------------
// PGM codec

namespace {

struct PgmRaster {
  std::size_t width = 0;
  std::size_t height = 0;
  unsigned maxval = 0;
  std::vector<unsigned> samples;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CodecError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reads one header token, skipping whitespace and '#' comments.
std::string header_token(const std::string& bytes, std::size_t& pos, const std::filesystem::path& path) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw CodecError(path.string() + ": truncated PGM header");
  return bytes.substr(start, pos - start);
}

std::size_t parse_positive(const std::string& token, const std::filesystem::path& path) {
  if (token.empty() || !std::all_of(token.begin(), token.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    throw CodecError(path.string() + ": bad PGM header field '" + token + "'");
  const auto v = std::stoull(token);
  if (v == 0) throw CodecError(path.string() + ": zero PGM dimension");
  return static_cast<std::size_t>(v);
}

PgmRaster read_pgm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw CodecError(path.string() + ": not a binary PGM (expected magic P5)");
  std::size_t pos = 2;
  PgmRaster r;
  r.width = parse_positive(header_token(bytes, pos, path), path);
  r.height = parse_positive(header_token(bytes, pos, path), path);
  const auto maxval = parse_positive(header_token(bytes, pos, path), path);
  if (maxval != 255 && maxval != 65535)
    throw CodecError(path.string() + ": unsupported maxval " + std::to_string(maxval) + " (need 255 or 65535)");
  r.maxval = static_cast<unsigned>(maxval);
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw CodecError(path.string() + ": truncated PGM header");
  ++pos;

  const std::size_t n = r.width * r.height;
  const std::size_t bytes_per_sample = r.maxval == 255 ? 1 : 2;
  if (bytes.size() - pos < n * bytes_per_sample) throw CodecError(path.string() + ": truncated pixel data");
  r.samples.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < n; ++i) {
    r.samples[i] = bytes_per_sample == 1 ? p[i] : (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1];
  }
  return r;
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height, unsigned maxval,
               const std::vector<unsigned>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CodecError("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << '\n' << maxval << '\n';
  std::string body;
  body.reserve(samples.size() * (maxval == 255 ? 1 : 2));
  for (unsigned s : samples) {
    if (maxval == 255) {
      body.push_back(static_cast<char>(s));
    } else {
      body.push_back(static_cast<char>(s >> 8));
      body.push_back(static_cast<char>(s & 0xFF));
    }
  }
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw CodecError("write failed: " + path.string());
}

unsigned maxval_for_depth(int depth) {
  if (depth == 8) return 255;
  if (depth == 16) return 65535;
  throw std::invalid_argument("save_image: depth must be 8 or 16");
}

std::vector<unsigned> quantize(std::span<const double> values, unsigned maxval) {
  std::vector<unsigned> q(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    q[i] = static_cast<unsigned>(std::lround(values[i] * maxval));
  return q;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const PgmRaster r = read_pgm(path);
  std::vector<double> data(r.samples.size());
  const double scale = 1.0 / r.maxval;
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = r.samples[i] * scale;
  return Image(r.width, r.height, std::move(data));
}

void save_image(const Image& image, const std::filesystem::path& path, int depth) {
  const unsigned maxval = maxval_for_depth(depth);
  write_pgm(path, image.width(), image.height(), maxval, quantize(image.pixels(), maxval));
}

void save_sparse(const SparseImage& sparse, const std::filesystem::path& value_path,
                 const std::filesystem::path& mask_path, int depth) {
  const unsigned maxval = maxval_for_depth(depth);
  std::vector<unsigned> values = quantize(sparse.image().pixels(), maxval);
  std::vector<unsigned> mask(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (sparse.sampled(i)) {
      mask[i] = 255;
    } else {
      values[i] = 0;
    }
  }
  write_pgm(value_path, sparse.width(), sparse.height(), maxval, values);
  write_pgm(mask_path, sparse.width(), sparse.height(), 255, mask);
}

SparseImage load_sparse(const std::filesystem::path& value_path, const std::filesystem::path& mask_path) {
  Image values = load_image(value_path);
  const PgmRaster m = read_pgm(mask_path);
  if (m.width != values.width() || m.height != values.height())
    throw CodecError("sparse image: value and mask dimensions differ");
  std::vector<std::uint8_t> mask(m.samples.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const unsigned s = m.samples[i];
    if (m.maxval != 255 || (s != 0 && s != 255))
      throw CodecError(mask_path.string() + ": mask samples must be 0 or 255");
    mask[i] = s == 255 ? 1 : 0;
  }
  return SparseImage(std::move(values), std::move(mask));
}

// ---------------------------------------------------------------------------
// Smoothing

std::size_t mirror_index(std::ptrdiff_t i, std::size_t n) {
  const auto len = static_cast<std::ptrdiff_t>(n);
  if (len == 1) return 0;
  const std::ptrdiff_t period = 2 * len;
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < len ? i : period - 1 - i);
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const auto r = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (std::ptrdiff_t d = -r; d <= r; ++d) {
    const double v = std::exp(-static_cast<double>(d * d) / (2.0 * sigma * sigma));
    w[static_cast<std::size_t>(d + r)] = v;
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

Image gaussian_smooth(const Image& image, double sigma, Exec exec) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian_smooth: sigma must be >= 0");
  if (sigma == 0.0) return image;
  const std::vector<double> w = gaussian_kernel(sigma);
  const auto r = static_cast<std::ptrdiff_t>(w.size() / 2);
  const std::size_t width = image.width();
  const std::size_t height = image.height();
  const auto src = image.pixels();
  std::vector<double> tmp(src.size());
  std::vector<double> out(src.size());

#pragma omp parallel for schedule(static) if (run_parallel(exec))
  for (std::ptrdiff_t y = 0; y < static_cast<std::ptrdiff_t>(height); ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * width;
    for (std::size_t x = 0; x < width; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -r; d <= r; ++d)
        acc += w[static_cast<std::size_t>(d + r)] * row[mirror_index(static_cast<std::ptrdiff_t>(x) + d, width)];
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }

#pragma omp parallel for schedule(static) if (run_parallel(exec))
  for (std::ptrdiff_t y = 0; y < static_cast<std::ptrdiff_t>(height); ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -r; d <= r; ++d)
        acc += w[static_cast<std::size_t>(d + r)] * tmp[mirror_index(y + d, height) * width + x];
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  return Image(width, height, std::move(out));
}

// ---------------------------------------------------------------------------
// Patches

std::vector<std::size_t> grid_offsets(std::size_t extent, std::size_t patch, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("grid_offsets: stride must be >= 1");
  if (patch == 0 || patch > extent) throw std::invalid_argument("grid_offsets: patch larger than image");
  std::vector<std::size_t> offsets;
  for (std::size_t p = 0; p + patch <= extent; p += stride) offsets.push_back(p);
  if (offsets.back() + patch < extent) offsets.push_back(extent - patch);
  return offsets;
}

namespace {

PatchSet extract_impl(const Image& image, const std::uint8_t* mask, std::size_t patch_size, std::size_t stride) {
  if (patch_size == 0 || patch_size > std::min(image.width(), image.height()))
    throw std::invalid_argument("extract_patches: patch larger than image");
  const auto xs = grid_offsets(image.width(), patch_size, stride);
  const auto ys = grid_offsets(image.height(), patch_size, stride);
  PatchSet set;
  set.patch_size = patch_size;
  const std::size_t dim = patch_size * patch_size;
  set.positions.reserve(xs.size() * ys.size());
  for (std::size_t y : ys)
    for (std::size_t x : xs) set.positions.push_back({x, y});
  set.values.resize(set.positions.size() * dim);
  if (mask) set.known.resize(set.values.size());
  for (std::size_t i = 0; i < set.positions.size(); ++i) {
    const auto [px, py] = set.positions[i];
    for (std::size_t dy = 0; dy < patch_size; ++dy) {
      for (std::size_t dx = 0; dx < patch_size; ++dx) {
        const std::size_t src = (py + dy) * image.width() + px + dx;
        set.values[i * dim + dy * patch_size + dx] = image[src];
        if (mask) set.known[i * dim + dy * patch_size + dx] = mask[src];
      }
    }
  }
  return set;
}

}  // namespace

PatchSet extract_patches(const Image& source, std::size_t patch_size, std::size_t stride) {
  return extract_impl(source, nullptr, patch_size, stride);
}

PatchSet extract_patches(const SparseImage& source, std::size_t patch_size, std::size_t stride) {
  return extract_impl(source.image(), source.mask().data(), patch_size, stride);
}

Image assemble_patches(const PatchSet& patches, std::size_t width, std::size_t height) {
  std::vector<double> sum(width * height, 0.0);
  std::vector<std::uint32_t> count(width * height, 0);
  const std::size_t p = patches.patch_size;
  for (std::size_t i = 0; i < patches.count(); ++i) {
    const auto [px, py] = patches.positions[i];
    if (px + p > width || py + p > height) throw std::invalid_argument("assemble_patches: patch outside target");
    const auto v = patches.patch(i);
    for (std::size_t dy = 0; dy < p; ++dy)
      for (std::size_t dx = 0; dx < p; ++dx) {
        const std::size_t dst = (py + dy) * width + px + dx;
        sum[dst] += v[dy * p + dx];
        ++count[dst];
      }
  }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (count[i] == 0)
      throw std::invalid_argument("assemble_patches: pixel (" + std::to_string(i % width) + ", " +
                                  std::to_string(i / width) + ") not covered by any patch");
    sum[i] = count[i] == 1 ? sum[i] : sum[i] / count[i];
  }
  return Image(width, height, std::move(sum));
}

Image crop(const Image& image, const Rect& roi) {
  if (!fits(roi, image.width(), image.height())) throw std::out_of_range("crop: roi outside image");
  std::vector<double> out(roi.w * roi.h);
  for (std::size_t y = 0; y < roi.h; ++y)
    for (std::size_t x = 0; x < roi.w; ++x) out[y * roi.w + x] = image(roi.x + x, roi.y + y);
  return Image(roi.w, roi.h, std::move(out));
}

}  // namespace semsparse
