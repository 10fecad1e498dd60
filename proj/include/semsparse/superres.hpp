#pragma once

#include <cstddef>
#include <vector>

#include "semsparse/image.hpp"
#include "semsparse/parallel.hpp"

namespace semsparse {

struct SrParams {
  double lambda = 0.05;
  double alpha = 0.6;
  std::size_t window = 2;  // P: shifts |l|, |m| <= P
  double step = 0.2;
  std::size_t max_iters = 200;
  double tolerance = 1e-6;
  double epsilon = 1e-6;  // smoothing of |t| in the gradient only

  void validate() const;
};

// Forward model: 2x2 block mean, even dimensions required.
Image degrade(const Image& high);

// Keys cubic (a = -0.5) interpolation to twice the size, mirrored borders.
Image bicubic_upsample(const Image& low);

struct SrTerms {
  double data = 0.0;   // |degrade(X) - Y|_1
  double prior = 0.0;  // lambda * sum alpha^(|l|+|m|) |X - shift(X, l, m)|_1
  double total() const { return data + prior; }
};

SrTerms sr_objective_terms(const Image& high, const Image& low, const SrParams& params);
double sr_objective(const Image& high, const Image& low, const SrParams& params);

struct SrTrace {
  std::vector<double> objective;  // initial value, then each accepted step
};

// Descends the bilateral-TV objective from the bicubic upsample of `low`.
Image btv_superresolve(const Image& low, const SrParams& params, SrTrace* trace = nullptr,
                       Exec exec = Exec::parallel);

}  // namespace semsparse
