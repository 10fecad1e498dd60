#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "semsparse/dictionary.hpp"
#include "semsparse/image.hpp"
#include "semsparse/parallel.hpp"
#include "semsparse/rng.hpp"

namespace semsparse {

struct BpfaParams {
  std::size_t atoms = 128;  // K
  std::size_t patch_size = 8;
  std::size_t stride = 2;
  std::size_t burn_in = 40;
  std::size_t collect = 40;
  double a0 = 1.0, b0 = 1.0;      // beta process
  double c0 = 1e-6, d0 = 1e-6;    // noise precision
  double e0 = 1e-6, f0 = 1e-6;    // weight precision

  void validate() const;
};

/// Sampler state for beta-process factor analysis of N patches of dimension P:
/// patch_i ~ D (z_i .* s_i) + noise, observed only where the patch mask is set.
struct BpfaState {
  std::size_t dim = 0;      // P
  std::size_t atoms = 0;    // K
  std::size_t patches = 0;  // N
  std::vector<double> dictionary;  // P x K, column k at [k * P]
  std::vector<std::uint8_t> z;     // N x K, row i at [i * K]
  std::vector<double> s;           // N x K
  std::vector<double> pi;          // K
  double gamma_noise = 1.0;
  double gamma_weight = 1.0;
  std::uint64_t sweep = 0;  // completed sweeps; keys the per-sweep substreams
  // Conditional means recorded while sampling the last sweep (empty before the
  // first sweep); used for the Rao-Blackwellized output.
  std::vector<double> dictionary_mean;  // P x K
  std::vector<double> s_mean;           // N x K, 0 where z = 0

  std::span<const double> column(std::size_t k) const { return {dictionary.data() + k * dim, dim}; }
  // D (z_i .* s_i) for patch i.
  void reconstruct_patch(std::size_t i, std::span<double> out) const;
  // E[D] (z_i .* E[s_i]) from the recorded conditional means.
  void reconstruct_patch_mean(std::size_t i, std::span<double> out) const;
  void check_invariants() const;
};

// Dictionary columns start from `initial_dictionary` (P x K, column-major) when
// given, followed by one draw of (z, s) against it; otherwise from N(0, 1/P)
// draws with every z = 0.
BpfaState bpfa_initial_state(const PatchSet& observations, const BpfaParams& params, const SeededRng& rng,
                             std::span<const double> initial_dictionary = {});

// One Gibbs sweep: dictionary columns, then (z, s) per patch, then pi,
// gamma_weight and gamma_noise. Unobserved pixels never enter a conditional.
BpfaState gibbs_sweep(const BpfaState& state, const PatchSet& observations, const BpfaParams& params,
                      const SeededRng& rng, Exec exec = Exec::parallel);

// Sum of squared residuals over observed patch pixels.
double observed_residual_energy(const BpfaState& state, const PatchSet& observations);

struct BpfaTrace {
  std::vector<double> residual_energy;  // after each sweep
};

Image bpfa_inpaint(const SparseImage& sparse, const BpfaParams& params, const SeededRng& rng,
                   BpfaTrace* trace = nullptr, BpfaState* final_state = nullptr, Exec exec = Exec::parallel);

// Dictionary columns as atoms, each mapped affinely into [0, 1] (0.5 = zero).
PatchDictionary bpfa_dictionary(const BpfaState& state);

}  // namespace semsparse
