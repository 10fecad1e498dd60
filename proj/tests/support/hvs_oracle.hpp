#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "semsparse/hvs_tables.hpp"

namespace testutil {

using Block = std::array<double, 64>;

// Orthonormal 2-D DCT-II straight from the definition.
inline Block dct_definition(const Block& in) {
  Block out{};
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(0.125) : 0.5, cv = v == 0 ? std::sqrt(0.125) : 0.5;
      double s = 0;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          s += in[y * 8 + x] * std::cos((2 * x + 1) * u * std::numbers::pi / 16) *
               std::cos((2 * y + 1) * v * std::numbers::pi / 16);
      out[v * 8 + u] = cu * cv * s;
    }
  return out;
}

inline Block idct_definition(const Block& coef) {
  Block out{};
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double s = 0;
      for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) {
          const double cu = u == 0 ? std::sqrt(0.125) : 0.5, cv = v == 0 ? std::sqrt(0.125) : 0.5;
          s += cu * cv * coef[v * 8 + u] * std::cos((2 * x + 1) * u * std::numbers::pi / 16) *
               std::cos((2 * y + 1) * v * std::numbers::pi / 16);
        }
      out[y * 8 + x] = s;
    }
  return out;
}

// Sum of squared deviations over a sub-rectangle (variance times count).
inline double scatter(const Block& b, int x0, int y0, int w, int h) {
  double m = 0;
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) m += b[y * 8 + x];
  m /= w * h;
  double s = 0;
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) s += (b[y * 8 + x] - m) * (b[y * 8 + x] - m);
  // Unbiased variance times the sample count.
  return s / (w * h - 1) * (w * h);
}

inline double masking(const Block& b) {
  const Block d = dct_definition(b);
  double e = 0;
  for (int i = 1; i < 64; ++i) e += d[i] * d[i] * semsparse::hvs::kMaskCof[i];
  const double whole = scatter(b, 0, 0, 8, 8);
  double ratio = 0;
  if (whole != 0)
    ratio = (scatter(b, 0, 0, 4, 4) + scatter(b, 4, 0, 4, 4) + scatter(b, 0, 4, 4, 4) + scatter(b, 4, 4, 4, 4)) / whole;
  return std::sqrt(e * ratio) / 32.0;
}

// Weighted masked error of one block pair.
inline double hvs_block_oracle(const Block& a, const Block& b) {
  const Block da = dct_definition(a), db = dct_definition(b);
  const double m = std::max(masking(a), masking(b));
  double s = 0;
  for (int i = 0; i < 64; ++i) {
    double diff = std::fabs(da[i] - db[i]);
    if (i > 0) {
      const double threshold = m / semsparse::hvs::kMaskCof[i];
      diff = diff < threshold ? 0.0 : diff - threshold;
    }
    s += diff * diff * semsparse::hvs::kCsf[i] * semsparse::hvs::kCsf[i];
  }
  return s / 64.0;
}

// Ten hand-built block pairs covering flat, edge, texture and single-coefficient cases.
inline std::vector<std::pair<Block, Block>> hvs_block_pairs() {
  std::vector<std::pair<Block, Block>> pairs;
  auto fill = [](auto f) {
    Block b{};
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) b[y * 8 + x] = f(x, y);
    return b;
  };
  auto plus_coef = [](const Block& base, int index, double delta) {
    Block c{};
    c[index] = delta;
    const Block p = idct_definition(c);
    Block out = base;
    for (int i = 0; i < 64; ++i) out[i] += p[i];
    return out;
  };
  const Block flat = fill([](int, int) { return 0.5; });
  const Block ramp = fill([](int x, int y) { return 0.1 + 0.05 * x + 0.03 * y; });
  const Block edge = fill([](int x, int) { return x < 4 ? 0.2 : 0.8; });
  const Block checker = fill([](int x, int y) { return (x + y) % 2 ? 0.7 : 0.3; });
  const Block texture = fill([](int x, int y) { return 0.5 + 0.2 * std::sin(1.3 * x + 0.4 * y) * std::cos(0.7 * y); });
  pairs.push_back({flat, plus_coef(flat, 0, 0.08)});        // DC only, unmasked
  pairs.push_back({flat, plus_coef(flat, 1, 0.05)});
  pairs.push_back({flat, plus_coef(flat, 63, 0.05)});
  pairs.push_back({ramp, plus_coef(ramp, 9, 0.04)});
  pairs.push_back({edge, plus_coef(edge, 3, 0.03)});       // masked by the edge
  pairs.push_back({edge, fill([](int x, int) { return x < 5 ? 0.2 : 0.8; })});
  pairs.push_back({checker, fill([](int x, int y) { return (x + y) % 2 ? 0.65 : 0.32; })});
  pairs.push_back({texture, plus_coef(texture, 18, -0.06)});
  pairs.push_back({texture, ramp});
  pairs.push_back({fill([](int x, int y) { return ((x * 7 + y * 13) % 11) / 11.0; }),
                   fill([](int x, int y) { return ((x * 5 + y * 3) % 9) / 9.0; })});
  return pairs;
}

}  // namespace testutil
