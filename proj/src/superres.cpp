#include "semsparse/superres.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "semsparse/acquisition.hpp"
#include "semsparse/errors.hpp"

namespace semsparse {

namespace {

double keys(double t) {
  constexpr double a = -0.5;
  t = std::fabs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

struct Shift {
  std::ptrdiff_t dx, dy;
  double weight;
};

std::vector<Shift> shifts(const SrParams& p) {
  std::vector<Shift> out;
  const auto P = static_cast<std::ptrdiff_t>(p.window);
  for (std::ptrdiff_t m = -P; m <= P; ++m)
    for (std::ptrdiff_t l = -P; l <= P; ++l) {
      if (l == 0 && m == 0) continue;
      out.push_back({l, m, std::pow(p.alpha, static_cast<double>(std::abs(l) + std::abs(m)))});
    }
  return out;
}

void check_pair(const Image& high, const Image& low) {
  if (high.width() != 2 * low.width() || high.height() != 2 * low.height())
    throw std::invalid_argument("sr_objective: high-res dimensions must be twice the low-res ones");
}

struct Terms {
  double data, prior;
};

// Row sums first, then a serial total, so threading never changes the value.
Terms evaluate(const std::vector<double>& x, std::size_t W, std::size_t H, const Image& low,
               const std::vector<Shift>& sh, const SrParams& p, Exec exec) {
  const std::size_t w = low.width(), h = low.height();
  std::vector<double> data_rows(h, 0.0), prior_rows(H, 0.0);
#pragma omp parallel for schedule(static) if (run_parallel(exec))
  for (std::ptrdiff_t yy = 0; yy < static_cast<std::ptrdiff_t>(h); ++yy) {
    const auto y = static_cast<std::size_t>(yy);
    double s = 0.0;
    for (std::size_t xl = 0; xl < w; ++xl) {
      const std::size_t a = 2 * y * W + 2 * xl;
      const double d = 0.25 * ((x[a] + x[a + 1]) + (x[a + W] + x[a + W + 1]));
      s += std::fabs(d - low(xl, y));
    }
    data_rows[y] = s;
  }
#pragma omp parallel for schedule(static) if (run_parallel(exec))
  for (std::ptrdiff_t yy = 0; yy < static_cast<std::ptrdiff_t>(H); ++yy) {
    double s = 0.0;
    for (const auto& t : sh) {
      const std::ptrdiff_t y2 = yy + t.dy;
      if (y2 < 0 || y2 >= static_cast<std::ptrdiff_t>(H)) continue;
      double r = 0.0;
      const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -t.dx);
      const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W), static_cast<std::ptrdiff_t>(W) - t.dx);
      const double* row = x.data() + static_cast<std::size_t>(yy) * W;
      const double* row2 = x.data() + static_cast<std::size_t>(y2) * W;
      for (std::ptrdiff_t xx = x0; xx < x1; ++xx) r += std::fabs(row[xx] - row2[xx + t.dx]);
      s += t.weight * r;
    }
    prior_rows[static_cast<std::size_t>(yy)] = s;
  }
  double data = 0.0, prior = 0.0;
  for (double v : data_rows) data += v;
  for (double v : prior_rows) prior += v;
  return {data, p.lambda * prior};
}

}  // namespace

void SrParams::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("SrParams: lambda must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("SrParams: alpha must lie in (0, 1)");
  if (window < 1) throw std::invalid_argument("SrParams: window must be >= 1");
  if (!(step > 0.0)) throw std::invalid_argument("SrParams: step must be > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("SrParams: epsilon must be > 0");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("SrParams: tolerance must be >= 0");
}

Image degrade(const Image& high) {
  if (high.width() % 2 != 0 || high.height() % 2 != 0)
    throw std::invalid_argument("degrade: dimensions must be even");
  return downscale_by_two(high);
}

Image bicubic_upsample(const Image& low) {
  const std::size_t w = low.width(), h = low.height(), W = 2 * w, H = 2 * h;
  // Output pixel centers sit at low-res coordinate X / 2 - 0.25.
  double wt[2][4];
  for (int phase = 0; phase < 2; ++phase) {
    const double u = phase == 0 ? 0.75 : 0.25;  // distance past floor(X / 2 - 0.25)
    for (int k = 0; k < 4; ++k) wt[phase][k] = keys(u - static_cast<double>(k - 1));
  }
  std::vector<double> out(W * H);
  for (std::size_t Y = 0; Y < H; ++Y) {
    const auto by = static_cast<std::ptrdiff_t>(std::floor(static_cast<double>(Y) / 2.0 - 0.25));
    const int py = Y % 2 == 0 ? 0 : 1;
    for (std::size_t X = 0; X < W; ++X) {
      const auto bx = static_cast<std::ptrdiff_t>(std::floor(static_cast<double>(X) / 2.0 - 0.25));
      const int px = X % 2 == 0 ? 0 : 1;
      const double center = low(X / 2, Y / 2);
      double v = center;
      for (int j = 0; j < 4; ++j) {
        const std::size_t sy = mirror_index(by + j - 1, h);
        for (int i = 0; i < 4; ++i) {
          const std::size_t sx = mirror_index(bx + i - 1, w);
          v += wt[py][j] * wt[px][i] * (low(sx, sy) - center);
        }
      }
      out[Y * W + X] = v;
    }
  }
  return Image(W, H, std::move(out));
}

SrTerms sr_objective_terms(const Image& high, const Image& low, const SrParams& params) {
  check_pair(high, low);
  const auto t = evaluate(high.to_vector(), high.width(), high.height(), low, shifts(params), params, Exec::serial);
  return {t.data, t.prior};
}

double sr_objective(const Image& high, const Image& low, const SrParams& params) {
  return sr_objective_terms(high, low, params).total();
}

Image btv_superresolve(const Image& low, const SrParams& params, SrTrace* trace, Exec exec) {
  params.validate();
  for (double v : low.pixels())
    if (!std::isfinite(v)) throw NumericalError("btv_superresolve: non-finite input");
  const std::size_t w = low.width(), h = low.height(), W = 2 * w, H = 2 * h;
  const auto sh = shifts(params);
  std::vector<double> x = bicubic_upsample(low).to_vector();
  std::vector<double> g(W * H), cand(W * H), resid_sign(w * h);
  auto psi = [eps = params.epsilon](double t) { return t / std::sqrt(t * t + eps * eps); };

  Terms cur = evaluate(x, W, H, low, sh, params, exec);
  double f = cur.data + cur.prior;
  if (trace) trace->objective.assign(1, f);
  double step = params.step;
  for (std::size_t it = 0; it < params.max_iters && f > 0.0; ++it) {
#pragma omp parallel for schedule(static) if (run_parallel(exec))
    for (std::ptrdiff_t yy = 0; yy < static_cast<std::ptrdiff_t>(h); ++yy) {
      const auto y = static_cast<std::size_t>(yy);
      for (std::size_t xl = 0; xl < w; ++xl) {
        const std::size_t a = 2 * y * W + 2 * xl;
        const double d = 0.25 * ((x[a] + x[a + 1]) + (x[a + W] + x[a + W + 1]));
        resid_sign[y * w + xl] = 0.25 * psi(d - low(xl, y));
      }
    }
#pragma omp parallel for schedule(static) if (run_parallel(exec))
    for (std::ptrdiff_t yy = 0; yy < static_cast<std::ptrdiff_t>(H); ++yy) {
      for (std::ptrdiff_t xx = 0; xx < static_cast<std::ptrdiff_t>(W); ++xx) {
        const std::size_t j = static_cast<std::size_t>(yy) * W + static_cast<std::size_t>(xx);
        double prior = 0.0;
        for (const auto& t : sh) {
          const std::ptrdiff_t fx = xx + t.dx, fy = yy + t.dy;  // pair (p, p + s)
          if (fx >= 0 && fy >= 0 && fx < static_cast<std::ptrdiff_t>(W) && fy < static_cast<std::ptrdiff_t>(H))
            prior += t.weight * psi(x[j] - x[static_cast<std::size_t>(fy) * W + static_cast<std::size_t>(fx)]);
          const std::ptrdiff_t bx = xx - t.dx, by = yy - t.dy;  // pair (p - s, p)
          if (bx >= 0 && by >= 0 && bx < static_cast<std::ptrdiff_t>(W) && by < static_cast<std::ptrdiff_t>(H))
            prior -= t.weight * psi(x[static_cast<std::size_t>(by) * W + static_cast<std::size_t>(bx)] - x[j]);
        }
        g[j] = resid_sign[static_cast<std::size_t>(yy / 2) * w + static_cast<std::size_t>(xx / 2)] +
               params.lambda * prior;
      }
    }
    bool accepted = false;
    Terms next{};
    for (int tries = 0; tries < 40; ++tries) {
      for (std::size_t j = 0; j < x.size(); ++j) cand[j] = std::clamp(x[j] - step * g[j], 0.0, 1.0);
      next = evaluate(cand, W, H, low, sh, params, exec);
      if (next.data + next.prior <= f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double fn = next.data + next.prior;
    const double gain = f - fn;
    x.swap(cand);
    f = fn;
    if (trace) trace->objective.push_back(f);
    if (gain < params.tolerance) break;
    step = std::min(params.step, step * 2.0);
  }
  return Image(W, H, std::move(x));
}

}  // namespace semsparse
