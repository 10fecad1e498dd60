#include "semsparse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "semsparse/hvs_tables.hpp"

namespace semsparse {

namespace {

void check_same_size(const Image& a, const Image& b, const char* who) {
  if (a.width() != b.width() || a.height() != b.height())
    throw std::invalid_argument(std::string(who) + ": image dimensions differ");
}

// Valid-region separable correlation of a W x H field with a square kernel
// given by its 1-D factors; output (W - n + 1) x (H - n + 1).
template <typename T, typename K>
std::vector<T> correlate_valid(const std::vector<T>& in, std::size_t W, std::size_t H, const std::vector<K>& kx,
                               const std::vector<K>& ky) {
  const std::size_t nx = kx.size(), ny = ky.size(), ow = W - nx + 1, oh = H - ny + 1;
  std::vector<T> tmp(ow * H);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      T s{};
      for (std::size_t i = 0; i < nx; ++i) s += kx[i] * in[y * W + x + i];
      tmp[y * ow + x] = s;
    }
  std::vector<T> out(ow * oh);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      T s{};
      for (std::size_t j = 0; j < ny; ++j) s += ky[j] * tmp[(y + j) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

std::vector<double> gaussian_1d(std::size_t n, double sigma) {
  std::vector<double> g(n);
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    s += g[i];
  }
  for (double& v : g) v /= s;
  return g;
}

double gabor_sigma(std::size_t scale) { return 0.56 / (0.25 / std::ldexp(1.0, static_cast<int>(scale))); }
std::size_t gabor_radius(std::size_t scale) { return static_cast<std::size_t>(std::ceil(3.0 * gabor_sigma(scale))); }

double vari(const double* z, std::size_t stride, std::size_t w, std::size_t h) {
  // Sample variance times the sample count.
  const double n = static_cast<double>(w * h);
  double mean = 0.0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) mean += z[y * stride + x];
  mean /= n;
  double ss = 0.0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) ss += (z[y * stride + x] - mean) * (z[y * stride + x] - mean);
  return ss / (n - 1.0) * n;
}

double mask_energy(std::span<const double, 64> block, const std::array<double, 64>& dct) {
  double m = 0.0;
  for (std::size_t i = 1; i < 64; ++i) m += dct[i] * dct[i] * hvs::kMaskCof[i];
  double pop = vari(block.data(), 8, 8, 8);
  if (pop != 0.0) {
    const double* z = block.data();
    pop = (vari(z, 8, 4, 4) + vari(z + 4, 8, 4, 4) + vari(z + 36, 8, 4, 4) + vari(z + 32, 8, 4, 4)) / pop;
  }
  return std::sqrt(m * pop) / 32.0;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  check_same_size(a, b, "psnr");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = s / static_cast<double>(a.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::vector<double> ssim_window(const SsimParams& p) {
  const auto g = gaussian_1d(p.window, p.sigma);
  std::vector<double> w(p.window * p.window);
  for (std::size_t y = 0; y < p.window; ++y)
    for (std::size_t x = 0; x < p.window; ++x) w[y * p.window + x] = g[y] * g[x];
  return w;
}

double ssim(const Image& a, const Image& b, const SsimParams& p) {
  check_same_size(a, b, "ssim");
  if (!(p.k1 > 0.0 && p.k2 > 0.0)) throw std::invalid_argument("ssim: K1 and K2 must be > 0");
  if (p.window < 1 || a.width() < p.window || a.height() < p.window)
    throw std::invalid_argument("ssim: image smaller than the window");
  const std::size_t W = a.width(), H = a.height();
  const auto g = gaussian_1d(p.window, p.sigma);
  std::vector<double> va = a.to_vector(), vb = b.to_vector(), aa(W * H), bb(W * H), ab(W * H);
  for (std::size_t i = 0; i < W * H; ++i) {
    aa[i] = va[i] * va[i];
    bb[i] = vb[i] * vb[i];
    ab[i] = va[i] * vb[i];
  }
  const auto mu_a = correlate_valid(va, W, H, g, g);
  const auto mu_b = correlate_valid(vb, W, H, g, g);
  const auto s_aa = correlate_valid(aa, W, H, g, g);
  const auto s_bb = correlate_valid(bb, W, H, g, g);
  const auto s_ab = correlate_valid(ab, W, H, g, g);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double var_a = s_aa[i] - ma * ma, var_b = s_bb[i] - mb * mb, cov = s_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

std::size_t cw_ssim_min_size(const CwSsimParams& p) {
  return 2 * gabor_radius(p.scales == 0 ? 0 : p.scales - 1) + p.window;
}

double cw_ssim(const Image& a, const Image& b, const CwSsimParams& p) {
  check_same_size(a, b, "cw_ssim");
  if (!(p.k > 0.0)) throw std::invalid_argument("cw_ssim: K must be > 0");
  if (p.scales < 1 || p.orientations < 1 || p.window < 1) throw std::invalid_argument("cw_ssim: empty filter bank");
  const std::size_t need = cw_ssim_min_size(p);
  if (a.width() < need || a.height() < need)
    throw std::invalid_argument("cw_ssim: image smaller than " + std::to_string(need) + " pixels per side");
  using C = std::complex<double>;
  const std::size_t W = a.width(), H = a.height();
  const std::vector<double> va = a.to_vector(), vb = b.to_vector();
  const std::vector<double> box(p.window, 1.0);

  double total = 0.0;
  std::size_t bands = 0;
  for (std::size_t s = 0; s < p.scales; ++s) {
    const double sigma = gabor_sigma(s), f = 0.25 / std::ldexp(1.0, static_cast<int>(s));
    const std::size_t R = gabor_radius(s), n = 2 * R + 1;
    const auto g = gaussian_1d(n, sigma);
    for (std::size_t o = 0; o < p.orientations; ++o) {
      const double theta = std::numbers::pi * static_cast<double>(o) / static_cast<double>(p.orientations);
      const double wx = 2.0 * std::numbers::pi * f * std::cos(theta), wy = 2.0 * std::numbers::pi * f * std::sin(theta);
      std::vector<C> kx(n), ky(n);
      C sx{}, sy{};
      for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(i) - static_cast<double>(R);
        kx[i] = g[i] * std::polar(1.0, wx * d);
        ky[i] = g[i] * std::polar(1.0, wy * d);
        sx += kx[i];
        sy += ky[i];
      }
      // Carrier response minus its DC leak: k = g (e - c), c = sum(g e) / sum(g).
      const C dc = sx * sy;
      auto respond = [&](const std::vector<double>& img) {
        std::vector<C> src(img.begin(), img.end());
        auto carrier = correlate_valid(src, W, H, kx, ky);
        const auto smooth = correlate_valid(img, W, H, g, g);
        for (std::size_t i = 0; i < carrier.size(); ++i) carrier[i] -= dc * smooth[i];
        return carrier;
      };
      const auto ca = respond(va), cb = respond(vb);
      const std::size_t cw = W - n + 1, ch = H - n + 1;
      std::vector<C> cross(ca.size());
      std::vector<double> ea(ca.size()), eb(ca.size());
      for (std::size_t i = 0; i < ca.size(); ++i) {
        cross[i] = ca[i] * std::conj(cb[i]);
        ea[i] = std::norm(ca[i]);
        eb[i] = std::norm(cb[i]);
      }
      const auto sc = correlate_valid(cross, cw, ch, box, box);
      const auto sa = correlate_valid(ea, cw, ch, box, box);
      const auto sb = correlate_valid(eb, cw, ch, box, box);
      double band = 0.0;
      for (std::size_t i = 0; i < sc.size(); ++i) band += (2.0 * std::abs(sc[i]) + p.k) / (sa[i] + sb[i] + p.k);
      total += band / static_cast<double>(sc.size());
      ++bands;
    }
  }
  return total / static_cast<double>(bands);
}

std::array<double, 64> dct8x8(std::span<const double, 64> block) {
  static const auto basis = [] {
    std::array<double, 64> c{};
    for (int u = 0; u < 8; ++u)
      for (int x = 0; x < 8; ++x)
        c[u * 8 + x] = (u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0)) *
                       std::cos((2.0 * x + 1.0) * u * std::numbers::pi / 16.0);
    return c;
  }();
  std::array<double, 64> tmp{}, out{};
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) s += basis[u * 8 + y] * block[y * 8 + x];
      tmp[u * 8 + x] = s;
    }
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) s += tmp[u * 8 + x] * basis[v * 8 + x];
      out[u * 8 + v] = s;
    }
  return out;
}

double hvs_block_error(std::span<const double, 64> a, std::span<const double, 64> b) {
  const auto da = dct8x8(a), db = dct8x8(b);
  const double mask = std::max(mask_energy(a, da), mask_energy(b, db));
  double s = 0.0;
  for (std::size_t i = 0; i < 64; ++i) {
    double u = std::fabs(da[i] - db[i]);
    if (i != 0) u = std::max(0.0, u - mask / hvs::kMaskCof[i]);
    s += (u * hvs::kCsf[i]) * (u * hvs::kCsf[i]);
  }
  return s / 64.0;
}

double psnr_hvs_m(const Image& a, const Image& b) {
  check_same_size(a, b, "psnr_hvs_m");
  const std::size_t W = a.width(), H = a.height();
  const std::size_t bw = (W + 7) / 8, bh = (H + 7) / 8;
  std::array<double, 64> ba{}, bb{};
  double total = 0.0;
  for (std::size_t by = 0; by < bh; ++by)
    for (std::size_t bx = 0; bx < bw; ++bx) {
      for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) {
          const std::size_t sx = mirror_index(static_cast<std::ptrdiff_t>(bx * 8 + x), W);
          const std::size_t sy = mirror_index(static_cast<std::ptrdiff_t>(by * 8 + y), H);
          ba[y * 8 + x] = a(sx, sy);
          bb[y * 8 + x] = b(sx, sy);
        }
      total += hvs_block_error(ba, bb);
    }
  const double mse = total / static_cast<double>(bw * bh);
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::string to_string(Metric m) {
  switch (m) {
    case Metric::psnr: return "psnr";
    case Metric::psnr_hvs_m: return "psnr_hvs_m";
    case Metric::ssim: return "ssim";
    case Metric::cw_ssim: return "cw_ssim";
  }
  return "unknown";
}

double MetricValues::get(Metric m) const {
  switch (m) {
    case Metric::psnr: return psnr;
    case Metric::psnr_hvs_m: return psnr_hvs_m;
    case Metric::ssim: return ssim;
    case Metric::cw_ssim: return cw_ssim;
  }
  return 0.0;
}

MetricStat mean_sigma(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_sigma: no values");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

MetricReport evaluate_rois(const Image& gt, const Image& recon, const std::vector<Rect>& rois, Exec exec) {
  check_same_size(gt, recon, "evaluate_rois");
  if (rois.empty()) throw std::invalid_argument("evaluate_rois: empty ROI list");
  for (const auto& r : rois)
    if (!fits(r, gt.width(), gt.height())) throw std::out_of_range("evaluate_rois: ROI outside the image");
  MetricReport rep;
  rep.rois = rois;
  rep.per_roi.resize(rois.size());
#pragma omp parallel for schedule(dynamic, 1) if (run_parallel(exec))
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(rois.size()); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const Image a = crop(gt, rois[i]), b = crop(recon, rois[i]);
    rep.per_roi[i] = {psnr(a, b), psnr_hvs_m(a, b), ssim(a, b), cw_ssim(a, b)};
  }
  for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
    std::vector<double> v;
    for (const auto& r : rep.per_roi) v.push_back(r.get(kAllMetrics[m]));
    rep.stats[m] = mean_sigma(v);
  }
  return rep;
}

std::vector<bool> winner_flags(std::span<const MetricStat> stats) {
  std::vector<bool> flags(stats.size(), false);
  if (stats.empty()) return flags;
  std::size_t top = 0;
  for (std::size_t i = 1; i < stats.size(); ++i)
    if (stats[i].mean > stats[top].mean) top = i;
  for (std::size_t i = 0; i < stats.size(); ++i)
    flags[i] = stats[i].mean >= stats[top].mean - stats[top].sigma;
  return flags;
}

void write_report_csv(std::ostream& out, const std::vector<NamedReport>& reports) {
  out << "method,metric,mean,sigma,winner_flag\n";
  std::array<std::vector<bool>, 4> flags;
  for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
    std::vector<MetricStat> stats;
    std::vector<std::size_t> owner;
    for (std::size_t r = 0; r < reports.size(); ++r)
      if (!reports[r].failed) {
        stats.push_back(reports[r].report.stats[m]);
        owner.push_back(r);
      }
    const auto f = winner_flags(stats);
    flags[m].assign(reports.size(), false);
    for (std::size_t i = 0; i < owner.size(); ++i) flags[m][owner[i]] = f[i];
  }
  char buf[256];
  for (std::size_t r = 0; r < reports.size(); ++r)
    for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
      const auto name = to_string(kAllMetrics[m]);
      if (reports[r].failed) {
        out << reports[r].method << "," << name << ",nan,nan,error\n";
        continue;
      }
      const auto& st = reports[r].report.stats[m];
      std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%d\n", reports[r].method.c_str(), name.c_str(), st.mean,
                    st.sigma, flags[m][r] ? 1 : 0);
      out << buf;
    }
}

}  // namespace semsparse
