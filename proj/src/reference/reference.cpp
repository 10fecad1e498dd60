#include "semsparse/reference.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace semsparse::ref {

Image gaussian_smooth_direct(const Image& image, double sigma) {
  if (sigma == 0.0) return image;
  const auto r = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> w;
  double total = 0.0;
  for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
    for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
      const double v = std::exp(-static_cast<double>(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      w.push_back(v);
      total += v;
    }
  const std::size_t W = image.width(), H = image.height();
  std::vector<double> out(W * H);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      double s = 0.0;
      std::size_t k = 0;
      for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx, ++k) {
          const std::size_t sx = mirror_index(static_cast<std::ptrdiff_t>(x) + dx, W);
          const std::size_t sy = mirror_index(static_cast<std::ptrdiff_t>(y) + dy, H);
          s += w[k] * image(sx, sy);
        }
      out[y * W + x] = s / total;
    }
  return Image(W, H, std::move(out));
}

double ssim_direct(const Image& a, const Image& b, const SsimParams& p) {
  const std::size_t n = p.window, W = a.width(), H = a.height();
  if (W < n || H < n || b.width() != W || b.height() != H) throw std::invalid_argument("ssim_direct: bad sizes");
  std::vector<double> w(n * n);
  double total = 0.0;
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double dx = static_cast<double>(x) - c, dy = static_cast<double>(y) - c;
      w[y * n + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * p.sigma * p.sigma));
      total += w[y * n + x];
    }
  for (double& v : w) v /= total;
  const double c1 = std::pow(p.k1 * p.dynamic_range, 2), c2 = std::pow(p.k2 * p.dynamic_range, 2);
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + n <= H; ++y0)
    for (std::size_t x0 = 0; x0 + n <= W; ++x0) {
      double ma = 0, mb = 0;
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
          ma += w[y * n + x] * a(x0 + x, y0 + y);
          mb += w[y * n + x] * b(x0 + x, y0 + y);
        }
      double va = 0, vb = 0, cov = 0;
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
          const double da = a(x0 + x, y0 + y) - ma, db = b(x0 + x, y0 + y) - mb;
          va += w[y * n + x] * da * da;
          vb += w[y * n + x] * db * db;
          cov += w[y * n + x] * da * db;
        }
      acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return acc / static_cast<double>(count);
}

std::array<double, 64> dct8x8_direct(std::span<const double, 64> block) {
  std::array<double, 64> out{};
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          s += block[y * 8 + x] * std::cos((2 * y + 1) * u * std::numbers::pi / 16) *
               std::cos((2 * x + 1) * v * std::numbers::pi / 16);
      const double cu = u == 0 ? std::sqrt(0.125) : 0.5, cv = v == 0 ? std::sqrt(0.125) : 0.5;
      out[u * 8 + v] = cu * cv * s;
    }
  return out;
}

double psnr_direct(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = s / static_cast<double>(a.size());
  return mse < 1e-10 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::size_t best_match_direct(std::span<const double> atoms, std::size_t dim, std::span<const double> target,
                              std::span<const std::uint8_t> known) {
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k * dim < atoms.size(); ++k) {
    double c = 0.0;
    for (std::size_t p = 0; p < dim; ++p)
      if (known[p]) c += (atoms[k * dim + p] - target[p]) * (atoms[k * dim + p] - target[p]);
    if (c < best_cost) {
      best_cost = c;
      best = k;
    }
  }
  return best;
}

}  // namespace semsparse::ref
