#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "semsparse/image.hpp"
#include "semsparse/parallel.hpp"
#include "semsparse/rng.hpp"

namespace semsparse {

/// Overcomplete analysis operator: k x n, row-major, unit-norm rows, k > n.
class AnalysisOperator {
 public:
  AnalysisOperator() = default;
  // Throws std::invalid_argument unless k > n, entries are finite and every
  // row has unit norm within 1e-9.
  AnalysisOperator(std::size_t k, std::size_t n, std::vector<double> rows);
  // Same, but rescales each row to unit norm first (zero rows are rejected).
  static AnalysisOperator normalized(std::size_t k, std::size_t n, std::vector<double> rows);

  std::size_t rows() const { return k_; }
  std::size_t cols() const { return n_; }
  std::span<const double> row(std::size_t j) const { return {data_.data() + j * n_, n_}; }
  std::span<const double> data() const { return data_; }

  // out = Omega x (size k); out = Omega^T c (size n).
  void apply(std::span<const double> x, std::span<double> out) const;
  void apply_transpose(std::span<const double> c, std::span<double> out) const;

 private:
  std::size_t k_ = 0;
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct GoalParams {
  double lambda = 0.02;
  double epsilon = 1e-4;
  std::size_t max_iters = 100;  // CG iterations per patch
  double tolerance = 1e-7;      // stop when the largest gradient entry is below this
  std::size_t patch_size = 8;
  std::size_t stride = 4;
  // Learning only.
  std::size_t learn_iters = 150;
  double logdet_weight = 1.0;
  std::size_t max_training_patches = 4000;

  void validate() const;
};

// rho(t) = sqrt(t^2 + eps^2) - eps and its derivative.
double sparsity_penalty(double t, double epsilon);
double sparsity_penalty_derivative(double t, double epsilon);

// Horizontal and vertical neighbour differences within a p x p patch,
// each row scaled to unit norm: 2 p (p - 1) rows.
AnalysisOperator finite_difference_operator(std::size_t patch_size);

// Seeded Gaussian rows normalized to unit norm.
AnalysisOperator random_operator(std::size_t k, std::size_t n, const SeededRng& rng);

// Per-patch objective 0.5 |x - y|^2 * fidelity + lambda * sum_j rho(<omega_j, x - mean(x)>).
// fidelity = 0 gives the inpainting penalty. Writes the gradient when grad is non-empty.
double patch_objective(const AnalysisOperator& op, std::span<const double> x, std::span<const double> y,
                       double fidelity, double lambda, double epsilon, std::span<double> grad);

// Learning objective for a row-major k x n matrix over (mean-subtracted) training
// patches: mean_i sum_j rho(<omega_j, x_i>) - w / (n log n) * log det(Omega^T Omega / k).
// Returns +inf when Omega^T Omega is not positive definite.
double learning_objective(std::span<const double> omega, std::size_t k, std::size_t n, const PatchSet& training,
                          const GoalParams& params, std::span<double> grad);

// Mean sparsity sum_j rho(<omega_j, x_i - mean>) / k over the patches.
double mean_sparsity(const AnalysisOperator& op, const PatchSet& patches, double epsilon);

struct LearnTrace {
  std::vector<double> objective;  // accepted iterates
};

AnalysisOperator learn_operator(const PatchSet& training, std::size_t k, const GoalParams& params,
                                const SeededRng& rng, LearnTrace* trace = nullptr);

struct SolveTrace {
  std::vector<double> objective;  // accepted CG iterates for the traced patch
};

Image operator_denoise(const Image& image, const AnalysisOperator& op, const GoalParams& params,
                       Exec exec = Exec::parallel);
Image operator_inpaint(const SparseImage& sparse, const AnalysisOperator& op, const GoalParams& params,
                       Exec exec = Exec::parallel);

// Minimizes patch_objective from x (in place) by Polak-Ribiere nonlinear CG with
// Armijo backtracking. Entries with fixed[i] != 0 never move (fixed may be empty).
void solve_patch(const AnalysisOperator& op, std::span<double> x, std::span<const double> y,
                 std::span<const std::uint8_t> fixed, double fidelity, const GoalParams& params,
                 SolveTrace* trace = nullptr);

// "AOP1" file: text header "AOP1\n<k> <n>\n" then row-major little-endian float64.
void save_operator(const AnalysisOperator& op, const std::filesystem::path& path);
AnalysisOperator load_operator(const std::filesystem::path& path);

}  // namespace semsparse
