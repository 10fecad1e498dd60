// Acceptance checks, one per criterion. Prints "criterion N: PASS|FAIL <detail>"
// and exits non-zero when any selected criterion fails.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ebi_fixture.hpp"
#include "hvs_oracle.hpp"
#include "semsparse/acquisition.hpp"
#include "semsparse/analysis_operator.hpp"
#include "semsparse/bpfa.hpp"
#include "semsparse/delaunay.hpp"
#include "semsparse/ebi.hpp"
#include "semsparse/harness.hpp"
#include "semsparse/interpolation.hpp"
#include "semsparse/metrics.hpp"
#include "semsparse/phantom.hpp"
#include "semsparse/superres.hpp"
#include "sibson_oracle.hpp"
#include "test_util.hpp"

using namespace semsparse;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SEMSPARSE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Image shifted_right(const Image& a) {
  return testutil::from_fn(a.width(), a.height(),
                           [&](double x, double y) { return a(x == 0 ? 0 : std::size_t(x) - 1, std::size_t(y)); });
}

// Per-window SSIM with an 11x11 Gaussian (sigma 1.5) over valid windows.
double ssim_oracle(const Image& a, const Image& b) {
  constexpr int n = 11;
  double w[n][n], total = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) total += w[y][x] = std::exp(-((x - 5.0) * (x - 5.0) + (y - 5.0) * (y - 5.0)) / 4.5);
  const double c1 = 1e-4, c2 = 9e-4;
  double acc = 0;
  int count = 0;
  for (std::size_t y0 = 0; y0 + n <= a.height(); ++y0)
    for (std::size_t x0 = 0; x0 + n <= a.width(); ++x0) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const double k = w[y][x] / total, va = a(x0 + x, y0 + y), vb = b(x0 + x, y0 + y);
          ma += k * va, mb += k * vb, saa += k * va * va, sbb += k * vb * vb, sab += k * va * vb;
        }
      const double vara = saa - ma * ma, varb = sbb - mb * mb, cov = sab - ma * mb;
      acc += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (vara + varb + c2));
      ++count;
    }
  return acc / count;
}

Image add_noise(const Image& img, double sigma, std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<double> v = img.to_vector();
  for (double& x : v) x += sigma * rng.normal();
  return {img.width(), img.height(), std::move(v)};
}

// ---------------------------------------------------------------------------

void criterion1(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Image a(64, 64, 0.2), b1(64, 64, 0.3), b2(64, 64, 0.45);
  const double p1 = psnr(a, b1), p2 = psnr(a, b2);
  const double s = ssim(Image(64, 64, 0.25), Image(64, 64, 0.75));
  o.detail << "psnr(0.1)=" << p1 << " psnr(0.25)=" << p2 << " ssim=" << s << " ";
  o.require(std::fabs(p1 - 20.0) <= 1e-9, "psnr 0.1");
  o.require(std::fabs(p2 - 12.0412) <= 1e-4, "psnr 0.25");
  o.require(std::fabs(s - 0.6001) <= 1e-3, "ssim constants");
  const Image r = testutil::random_image(64, 64, 1);
  o.require(psnr(r, r) == kPsnrCap, "psnr cap");
  o.require(psnr_hvs_m(r, r) == kPsnrCap, "psnr-hvs-m cap");
  o.require(ssim(r, r) == 1.0, "ssim identical");
  const double t = seconds_since(t0);
  o.detail << "time=" << t << "s";
  o.require(t < 1.0, "runtime");
}

void criterion2(Outcome& o) {
  double worst = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Image a = testutil::random_image(32, 32, 1000 + s), b = testutil::random_image(32, 32, 2000 + s);
    worst = std::max(worst, std::fabs(ssim(a, b) - ssim_oracle(a, b)));
  }
  o.detail << "max|delta|=" << worst;
  o.require(worst <= 1e-9, "oracle agreement");
}

void criterion3(Outcome& o) {
  double worst = 0;
  const auto pairs = testutil::hvs_block_pairs();
  for (const auto& [a, b] : pairs) worst = std::max(worst, std::fabs(hvs_block_error(a, b) - testutil::hvs_block_oracle(a, b)));
  o.detail << pairs.size() << " pairs max|delta|=" << worst << " ";
  o.require(pairs.size() == 10 && worst <= 1e-9, "block oracle");
  const Image base(64, 64, 0.5);
  const Image low = testutil::from_fn(64, 64, [](double x, double) { return 0.5 + 0.05 * std::cos(std::numbers::pi * (2 * x + 1) / 16); });
  const Image high = testutil::from_fn(64, 64, [](double x, double y) { return 0.5 + 0.05 * std::sqrt(0.5) * ((int(x) + int(y)) % 2 ? 1 : -1); });
  const double ml = testutil::mse(base, low), mh = testutil::mse(base, high);
  const double hl = psnr_hvs_m(base, low), hh = psnr_hvs_m(base, high);
  o.detail << "low-freq=" << hl << "dB high-freq=" << hh << "dB";
  o.require(std::fabs(ml - mh) <= 1e-12 * ml, "equal MSE");
  o.require(hl < hh, "CSF ordering");
}

void criterion4(Outcome& o) {
  const Image a = generate_phantom(PhantomSpec{});
  const Image s = shifted_right(a);
  const double cw = cw_ssim(a, s), ss = ssim(a, s), self = cw_ssim(a, a);
  o.detail << "cw=" << cw << " ssim=" << ss << " self=" << self;
  o.require(a.width() == 256 && a.height() == 256, "phantom size");
  o.require(cw > ss, "shift robustness");
  o.require(std::fabs(self - 1.0) <= 1e-9, "self similarity");
}

void criterion5(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  // Linear precision on an affine field from 200 random sites.
  SeededRng rng(55);
  std::vector<std::uint8_t> mask(64 * 64, 0);
  for (std::size_t placed = 0; placed < 200;) {
    const std::size_t i = rng.below(64 * 64);
    if (!mask[i]) mask[i] = 1, ++placed;
  }
  const Image field = testutil::from_fn(64, 64, [](double x, double y) { return 0.2 + 0.004 * x + 0.007 * y; });
  const Image out = interpolate(SparseImage(field, mask), InterpMethod::natural_neighbor);
  // Pixels outside the sites' convex hull are extrapolated; compare inside only.
  std::vector<Point2> sites;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) sites.push_back({double(i % 64), double(i / 64)});
  const Delaunay dt(sites);
  double worst = 0;
  std::size_t inside = 0;
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      std::vector<NaturalWeight> w;
      std::uint32_t hint = Delaunay::kNone;
      if (dt.natural_coordinates({double(x), double(y)}, w, hint) == Delaunay::QueryKind::outside) continue;
      ++inside;
      worst = std::max(worst, std::fabs(out(x, y) - field(x, y)));
    }
  o.detail << "linear max err=" << worst << " over " << inside << " px; ";
  o.require(worst <= 1e-6 && inside > 3000, "linear precision");

  // Weights against the area-counting oracle.
  std::size_t configs = 0;
  double werr = 0;
  for (std::uint64_t seed = 1; configs < 10 && seed < 200; ++seed) {
    SeededRng r(seed * 7919);
    const std::size_t n = 5 + r.below(5);
    std::vector<Point2> pts(n);
    for (auto& p : pts) p = {10 * r.uniform(), 10 * r.uniform()};
    double cx = 0, cy = 0;
    for (const auto& p : pts) cx += p.x, cy += p.y;
    const Point2 q{cx / double(n) + r.uniform() - 0.5, cy / double(n) + r.uniform() - 0.5};
    const Delaunay d(pts);
    std::vector<NaturalWeight> w;
    std::uint32_t hint = Delaunay::kNone;
    if (d.natural_coordinates(q, w, hint) != Delaunay::QueryKind::interior) continue;
    const auto oracle = testutil::sibson_area_oracle(pts, q, 2048);
    if (oracle.empty()) continue;
    std::vector<double> got(n, 0.0);
    for (const auto& nw : w) got[nw.site] = nw.weight;
    for (std::size_t i = 0; i < n; ++i) werr = std::max(werr, std::fabs(got[i] - oracle[i]));
    ++configs;
  }
  o.detail << configs << " configs max weight err=" << werr << " ";
  o.require(configs == 10, "ten configurations");
  o.require(werr <= 0.01, "area oracle");
  const double t = seconds_since(t0);
  o.detail << "time=" << t << "s";
  o.require(t < 120.0, "runtime");
}

void criterion6(Outcome& o) {
  const double n = electrons_per_pixel(0.1, 10.0);
  o.detail << "N=" << n << " ";
  o.require(std::fabs(n - 6241.5) <= 0.1, "electrons per pixel");
  const double mu = 0.5;
  const Image frame = simulate_frame(Image(1000, 1000, mu), raster_preset(0.1), BeamModel{}, SeededRng(66));
  double sum = 0, sum2 = 0;
  for (double v : frame.pixels()) sum += v, sum2 += v * v;
  const double count = 1e6, mean = sum / count, var = (sum2 - count * mean * mean) / (count - 1);
  const double expect_var = mu / n, se = std::sqrt(expect_var / count);
  o.detail << "mean=" << mean << " (" << (mean - mu) / se << " SE) var ratio=" << var / expect_var;
  o.require(std::fabs(mean - mu) <= 3 * se, "mean within 3 SE");
  o.require(std::fabs(var / expect_var - 1.0) <= 0.05, "variance within 5%");
}

void criterion7(Outcome& o) {
  const double r = average_dwell(raster_preset()), l = average_dwell(low_resolution_preset()),
               s = average_dwell(sparse_preset());
  o.detail << "dwell " << r << "/" << l << "/" << s << " us ";
  o.require(r == 10.0 && l == 10.0 && s == 10.0, "presets at 10 us");
  const auto dir = testutil::tmp_dir("acceptance_c7");
  {
    std::ofstream f(dir / "bad.json");
    f << R"({"budget": {"sparse": {"fraction": 0.5}}, "methods": ["original_raster"]})";
  }
  const int code = run_cli("bench --config \"" + (dir / "bad.json").string() + "\" --out \"" + (dir / "out").string() + "\"");
  o.detail << "mismatch exit=" << code;
  o.require(code == 2, "exit code 2 on mismatch");
}

void criterion8(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Image truth = testutil::four_tile_mosaic();
  const SparseImage sp = sparse_scan(truth, 0.25, SeededRng(3));
  const BpfaParams p;
  const Image a = bpfa_inpaint(sp, p, SeededRng(11));
  const double mosaic = psnr(truth, a);
  o.detail << "mosaic=" << mosaic << "dB (nn " << psnr(truth, interpolate(sp, InterpMethod::natural_neighbor)) << ") ";
  o.require(mosaic >= 30.0, "mosaic >= 30 dB");
  const Image b = bpfa_inpaint(sp, p, SeededRng(11));
  o.require(a == b, "determinism");
  // Fully observed: observed pixels pass through verbatim, so score the
  // model's own patch reconstruction from the final state instead.
  const SparseImage full(truth, std::vector<std::uint8_t>(truth.size(), 1));
  BpfaState st;
  bpfa_inpaint(full, p, SeededRng(12), nullptr, &st);
  const PatchSet grid = extract_patches(truth, p.patch_size, p.stride);
  double mean = 0;
  for (double v : truth.pixels()) mean += v;
  mean /= double(truth.size());
  std::vector<double> sum(truth.size(), 0.0), cover(truth.size(), 0.0), rec(grid.dim());
  for (std::size_t i = 0; i < grid.count(); ++i) {
    st.reconstruct_patch_mean(i, rec);
    for (std::size_t dy = 0; dy < p.patch_size; ++dy)
      for (std::size_t dx = 0; dx < p.patch_size; ++dx) {
        const std::size_t j = (grid.positions[i].y + dy) * truth.width() + grid.positions[i].x + dx;
        sum[j] += mean + rec[dy * p.patch_size + dx];
        cover[j] += 1.0;
      }
  }
  for (std::size_t j = 0; j < sum.size(); ++j) sum[j] /= cover[j];
  const double self = psnr(truth, Image(truth.width(), truth.height(), std::move(sum)));
  o.detail << "self=" << self << "dB ";
  o.require(self >= 40.0, "self reconstruction >= 40 dB");
  const double t = seconds_since(t0);
  o.detail << "time=" << t << "s";
  o.require(t <= 300.0, "runtime");
}

void criterion9(Outcome& o) {
  bool exact = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto c = testutil::ebi_exact_case(seed);
    exact = exact && ebi_inpaint(c.sparse, c.dict, EbiParams{}) == c.truth;
  }
  o.require(exact, "exact recovery");

  BenchConfig config;
  const Image truth = build_ground_truth(config);
  const Acquisition acq = acquire(truth, config, 0);
  const PatchDictionary ideal = ideal_dictionary(truth, config.ebi.patch_size, 4096, SeededRng(91));
  const PatchDictionary rnd = random_dictionary(config.ebi.patch_size, 16, SeededRng(92));
  bool preserved = true;
  for (const PatchDictionary* d : {&ideal, &rnd}) {
    const Image out = ebi_inpaint(acq.sparse, *d, config.ebi);
    for (std::size_t i = 0; i < out.size(); ++i)
      if (acq.sparse.sampled(i) && out.pixels()[i] != acq.sparse.image().pixels()[i]) preserved = false;
  }
  o.require(preserved, "observed pixels preserved");

  const auto study = dictionary_study(config, {ideal, rnd}, {"ideal", "random16"});
  const double pi = study.rows[0].report.stat(Metric::psnr).mean, pr = study.rows[1].report.stat(Metric::psnr).mean;
  o.detail << "exact=" << exact << " ideal=" << pi << "dB random16=" << pr << "dB";
  o.require(pi > pr, "ideal beats random16");
}

void criterion10(Outcome& o) {
  const auto fd = finite_difference_operator(8);
  const Image clean = testutil::from_fn(48, 48, [](double x, double y) {
    if (x < 20 && y < 28) return 0.25;
    if (x >= 20 && y < 14) return 0.7;
    if (y >= 28 && x < 33) return 0.5;
    return 0.85;
  });
  const Image noisy = add_noise(clean, 0.05, 13);
  GoalParams params;
  GoalParams p0 = params;
  p0.lambda = 0.0;
  o.require(operator_denoise(noisy, fd, p0) == noisy, "lambda 0 identity");

  // Learned operator from clean training patches of an unrelated phantom.
  PhantomSpec ps;
  ps.width = ps.height = 128;
  ps.seed = 101;
  params.learn_iters = 80;
  const AnalysisOperator op =
      learn_operator(extract_patches(generate_phantom(ps), 8, 4), 128, params, SeededRng(102));
  double row_err = 0;
  for (std::size_t j = 0; j < op.rows(); ++j) {
    double nn = 0;
    for (double v : op.row(j)) nn += v * v;
    row_err = std::max(row_err, std::fabs(std::sqrt(nn) - 1.0));
  }
  o.detail << "row norm err=" << row_err << " ";
  o.require(row_err <= 1e-9, "unit rows");

  // Gradient of the patch objective against central differences.
  double worst = 0;
  SeededRng rng(104);
  for (int point = 0; point < 10; ++point) {
    std::vector<double> x(64), y(64), g(64);
    for (auto& v : x) v = rng.uniform();
    for (auto& v : y) v = rng.uniform();
    patch_objective(op, x, y, 1.0, 0.05, 1e-4, g);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < 64; ++i) {
      const double h = 1e-6;
      auto xp = x, xm = x;
      xp[i] += h, xm[i] -= h;
      const double f = (patch_objective(op, xp, y, 1.0, 0.05, 1e-4, {}) - patch_objective(op, xm, y, 1.0, 0.05, 1e-4, {})) / (2 * h);
      num += (g[i] - f) * (g[i] - f);
      den += f * f;
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  o.detail << "grad rel err=" << worst << " ";
  o.require(worst <= 1e-5, "gradient check");

  const double before = testutil::mse(noisy, clean);
  const double after_fd = testutil::mse(operator_denoise(noisy, fd, params), clean);
  const double after_learned = testutil::mse(operator_denoise(noisy, op, params), clean);
  o.detail << "mse noisy=" << before << " fd=" << after_fd << " learned=" << after_learned;
  o.require(after_fd < before, "denoising reduces MSE (finite differences)");
  o.require(after_learned < before, "denoising reduces MSE (learned)");
}

void criterion11(Outcome& o) {
  o.require(btv_superresolve(Image(12, 10, 0.37), SrParams{}) == Image(24, 20, 0.37), "constant exact");
  const Image truth = testutil::from_fn(64, 64, [](double x, double y) {
    return 0.5 + 0.2 * std::sin(0.21 * x + 0.4) * std::cos(0.17 * y) + 0.1 * std::cos(0.09 * x - 0.13 * y);
  });
  const Image low = degrade(truth);
  SrTrace trace;
  const Image out = btv_superresolve(low, SrParams{}, &trace);
  bool monotone = trace.objective.size() >= 2;
  for (std::size_t i = 1; i < trace.objective.size(); ++i) monotone = monotone && trace.objective[i] <= trace.objective[i - 1];
  const double rmse = std::sqrt(testutil::mse(degrade(out), low));
  o.detail << "steps=" << trace.objective.size() << " rmse=" << rmse;
  o.require(monotone, "objective non-increasing");
  o.require(rmse <= 1e-2, "degrade rmse");
}

void criterion12(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  BenchConfig config;
  config.methods = {Method::original_raster};
  config.currents = {0.1, 0.2, 0.4, 0.8};
  const BenchReport rep = beam_current_sweep(config);
  double prev = std::numeric_limits<double>::infinity();
  bool decreasing = true;
  o.detail << "PSNR-HVS-M";
  for (double c : config.currents) {
    const double v = rep.at(Method::original_raster, c).result.report.stat(Metric::psnr_hvs_m).mean;
    o.detail << " " << c << "nA:" << v;
    decreasing = decreasing && v < prev;
    prev = v;
  }
  o.require(decreasing, "strictly decreasing");
  const double t = seconds_since(t0);
  o.detail << " time=" << t << "s";
  o.require(t <= 600.0, "runtime");
}

void criterion13(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = testutil::tmp_dir("acceptance_c13");
  const fs::path out1 = dir / "run1", out2 = dir / "run2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  const int c1 = run_cli("bench --out \"" + out1.string() + "\"");
  const int c2 = run_cli("bench --out \"" + out2.string() + "\"");
  o.detail << "exit " << c1 << "/" << c2 << " ";
  o.require(c1 == 0 && c2 == 0, "bench runs");
  const std::string t1 = slurp(out1 / "table1.csv"), t2 = slurp(out2 / "table1.csv");
  o.require(!t1.empty() && t1 == t2, "table1 byte-identical");
  o.require(slurp(out1 / "metrics_0.1nA.csv") == slurp(out2 / "metrics_0.1nA.csv"), "metrics byte-identical");

  std::istringstream in(t1);
  std::string line;
  std::getline(in, line);
  o.require(line == "method,PSNR,PSNR-HVS-M,SSIM,CW-SSIM", "header");
  std::size_t rows = 0;
  bool shaped = true;
  while (std::getline(in, line)) {
    ++rows;
    std::size_t cells = 0, pm = 0;
    for (std::size_t pos = 0; (pos = line.find(',', pos)) != std::string::npos; ++pos) ++cells;
    for (std::size_t pos = 0; (pos = line.find("±", pos)) != std::string::npos; ++pos) ++pm;
    shaped = shaped && cells == 4 && pm == 4;
  }
  o.require(rows == 7 && shaped, "7 rows x 4 metrics, mean ± sigma");

  const auto report = nlohmann::json::parse(slurp(out1 / "report.json"), nullptr, false);
  double bpfa = NAN, nn = NAN;
  std::istringstream metrics(slurp(out1 / "metrics_0.1nA.csv"));
  std::getline(metrics, line);
  while (std::getline(metrics, line)) {
    std::istringstream ls(line);
    std::string method, metric, mean;
    std::getline(ls, method, ',');
    std::getline(ls, metric, ',');
    std::getline(ls, mean, ',');
    if (metric != "psnr") continue;
    if (method == "bpfa") bpfa = std::stod(mean);
    if (method == "nn_interpolation") nn = std::stod(mean);
  }
  o.detail << "bpfa=" << bpfa << "dB nn=" << nn << "dB rois=" << (report.is_discarded() ? 0 : report["rois"].size()) << " ";
  o.require(bpfa >= nn, "bpfa >= nn psnr");
  o.require(!report.is_discarded() && report["rois"].size() == 30, "30 auto ROIs");
  const double t = seconds_since(t0);
  o.detail << "time=" << t << "s for two runs";
  o.require(t <= 2 * 1800.0, "runtime");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<void(Outcome&)>> criteria{criterion1, criterion2,  criterion3,  criterion4, criterion5,
                                                            criterion6, criterion7,  criterion8,  criterion9, criterion10,
                                                            criterion11, criterion12, criterion13};
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      const int n = std::atoi(argv[++i]);
      if (n < 1 || n > int(criteria.size())) {
        std::cerr << "unknown criterion " << n << "\n";
        return 2;
      }
      selected.push_back(std::size_t(n));
    } else {
      std::cerr << "usage: acceptance [--criterion N]...\n";
      return 2;
    }
  }
  if (selected.empty())
    for (std::size_t n = 1; n <= criteria.size(); ++n) selected.push_back(n);
  bool all = true;
  for (std::size_t n : selected) {
    Outcome o;
    try {
      criteria[n - 1](o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.detail.str() << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
