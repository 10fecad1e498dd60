#pragma once

#include <array>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "semsparse/image.hpp"
#include "semsparse/parallel.hpp"

namespace semsparse {

inline constexpr double kPsnrCap = 100.0;

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

struct CwSsimParams {
  std::size_t scales = 2;
  std::size_t orientations = 4;
  std::size_t window = 7;
  double k = 0.01;
};

// 10 log10(1 / MSE), capped at kPsnrCap when MSE < 1e-10.
double psnr(const Image& a, const Image& b);

// Mean SSIM over all fully contained Gaussian windows.
double ssim(const Image& a, const Image& b, const SsimParams& p = {});

// Normalized 2-D Gaussian window (row-major, window x window).
std::vector<double> ssim_window(const SsimParams& p);

// Complex Gabor bank, DC removed; mean of the windowed CW-SSIM map over the
// valid region of every subband.
double cw_ssim(const Image& a, const Image& b, const CwSsimParams& p = {});

// Smallest side length cw_ssim accepts for these parameters.
std::size_t cw_ssim_min_size(const CwSsimParams& p = {});

// Weighted masked DCT error of one 8x8 block pair (sum over the 64
// coefficients of (u * CSF)^2, divided by 64).
double hvs_block_error(std::span<const double, 64> a, std::span<const double, 64> b);

// Orthonormal 8x8 DCT-II, row-major in and out.
std::array<double, 64> dct8x8(std::span<const double, 64> block);

// PSNR-HVS-M over non-overlapping 8x8 blocks; sides that are not multiples of
// 8 are mirror-padded. Capped at kPsnrCap.
double psnr_hvs_m(const Image& a, const Image& b);

enum class Metric { psnr, psnr_hvs_m, ssim, cw_ssim };
inline constexpr std::array<Metric, 4> kAllMetrics = {Metric::psnr, Metric::psnr_hvs_m, Metric::ssim, Metric::cw_ssim};
std::string to_string(Metric m);

struct MetricValues {
  double psnr = 0.0;
  double psnr_hvs_m = 0.0;
  double ssim = 0.0;
  double cw_ssim = 0.0;
  double get(Metric m) const;
};

struct MetricStat {
  double mean = 0.0;
  double sigma = 0.0;  // population standard deviation
};

MetricStat mean_sigma(std::span<const double> values);

struct MetricReport {
  std::vector<Rect> rois;
  std::vector<MetricValues> per_roi;
  std::array<MetricStat, 4> stats{};  // indexed like kAllMetrics
  const MetricStat& stat(Metric m) const { return stats[static_cast<std::size_t>(m)]; }
};

MetricReport evaluate_rois(const Image& gt, const Image& recon, const std::vector<Rect>& rois,
                           Exec exec = Exec::parallel);

// Best mean plus every entry whose mean is within the best entry's sigma.
std::vector<bool> winner_flags(std::span<const MetricStat> stats);

struct NamedReport {
  std::string method;
  MetricReport report;
  bool failed = false;
  std::string error;
};

// Long-format CSV: method,metric,mean,sigma,winner_flag (failed methods get
// "error" rows). Winner flags are computed across the given reports.
void write_report_csv(std::ostream& out, const std::vector<NamedReport>& reports);

}  // namespace semsparse
