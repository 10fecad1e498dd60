#pragma once

#include <array>
#include <span>

#include "semsparse/image.hpp"
#include "semsparse/metrics.hpp"

// Direct, single-threaded versions of the optimized kernels. They share no
// code with the library implementations and exist to cross-check them.
namespace semsparse::ref {

// Full 2-D convolution with the same kernel and mirrored borders.
Image gaussian_smooth_direct(const Image& image, double sigma);

// Per-window weighted sums, no separable filtering.
double ssim_direct(const Image& a, const Image& b, const SsimParams& params = {});

// Textbook O(N^4) 8x8 DCT-II with orthonormal scaling.
std::array<double, 64> dct8x8_direct(std::span<const double, 64> block);

double psnr_direct(const Image& a, const Image& b);

// Sum of squared differences over known pixels for every atom, then argmin.
std::size_t best_match_direct(std::span<const double> atoms, std::size_t dim, std::span<const double> target,
                              std::span<const std::uint8_t> known);

}  // namespace semsparse::ref
