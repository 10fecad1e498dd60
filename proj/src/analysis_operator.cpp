#include "semsparse/analysis_operator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "semsparse/errors.hpp"
#include "semsparse/interpolation.hpp"

namespace semsparse {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double row_norm(const double* r, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += r[i] * r[i];
  return std::sqrt(s);
}

void center(std::span<double> v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) x -= m;
}

}  // namespace

AnalysisOperator::AnalysisOperator(std::size_t k, std::size_t n, std::vector<double> rows)
    : k_(k), n_(n), data_(std::move(rows)) {
  if (n_ == 0 || k_ <= n_) throw std::invalid_argument("AnalysisOperator: need k > n >= 1");
  if (data_.size() != k_ * n_) throw std::invalid_argument("AnalysisOperator: data length != k * n");
  for (double v : data_)
    if (!std::isfinite(v)) throw std::invalid_argument("AnalysisOperator: non-finite entry");
  for (std::size_t j = 0; j < k_; ++j)
    if (std::fabs(row_norm(data_.data() + j * n_, n_) - 1.0) > 1e-9)
      throw std::invalid_argument("AnalysisOperator: row " + std::to_string(j) + " is not unit norm");
}

AnalysisOperator AnalysisOperator::normalized(std::size_t k, std::size_t n, std::vector<double> rows) {
  if (rows.size() != k * n) throw std::invalid_argument("AnalysisOperator: data length != k * n");
  for (std::size_t j = 0; j < k; ++j) {
    double* r = rows.data() + j * n;
    const double norm = row_norm(r, n);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument("AnalysisOperator: zero or non-finite row");
    for (std::size_t i = 0; i < n; ++i) r[i] /= norm;
  }
  return AnalysisOperator(k, n, std::move(rows));
}

void AnalysisOperator::apply(std::span<const double> x, std::span<double> out) const {
  for (std::size_t j = 0; j < k_; ++j) {
    const double* r = data_.data() + j * n_;
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += r[i] * x[i];
    out[j] = s;
  }
}

void AnalysisOperator::apply_transpose(std::span<const double> c, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < k_; ++j) {
    if (c[j] == 0.0) continue;
    const double* r = data_.data() + j * n_;
    for (std::size_t i = 0; i < n_; ++i) out[i] += c[j] * r[i];
  }
}

void GoalParams::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("GoalParams: lambda must be >= 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("GoalParams: epsilon must be > 0");
  if (max_iters < 1 || learn_iters < 1) throw std::invalid_argument("GoalParams: iteration counts must be >= 1");
  if (patch_size < 1 || stride < 1) throw std::invalid_argument("GoalParams: patch size and stride must be >= 1");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("GoalParams: tolerance must be >= 0");
  if (!(logdet_weight >= 0.0)) throw std::invalid_argument("GoalParams: logdet_weight must be >= 0");
}

double sparsity_penalty(double t, double epsilon) { return std::sqrt(t * t + epsilon * epsilon) - epsilon; }

double sparsity_penalty_derivative(double t, double epsilon) { return t / std::sqrt(t * t + epsilon * epsilon); }

AnalysisOperator finite_difference_operator(std::size_t patch_size) {
  if (patch_size < 2) throw std::invalid_argument("finite_difference_operator: patch size must be >= 2");
  const std::size_t p = patch_size, n = p * p;
  const double w = 1.0 / std::sqrt(2.0);
  std::vector<double> rows;
  rows.reserve(2 * p * (p - 1) * n);
  auto add = [&](std::size_t a, std::size_t b) {
    std::vector<double> r(n, 0.0);
    r[a] = -w;
    r[b] = w;
    rows.insert(rows.end(), r.begin(), r.end());
  };
  for (std::size_t y = 0; y < p; ++y)
    for (std::size_t x = 0; x + 1 < p; ++x) add(y * p + x, y * p + x + 1);
  for (std::size_t y = 0; y + 1 < p; ++y)
    for (std::size_t x = 0; x < p; ++x) add(y * p + x, (y + 1) * p + x);
  return AnalysisOperator(2 * p * (p - 1), n, std::move(rows));
}

AnalysisOperator random_operator(std::size_t k, std::size_t n, const SeededRng& rng) {
  SeededRng r = rng;
  std::vector<double> rows(k * n);
  for (double& v : rows) v = r.normal();
  return AnalysisOperator::normalized(k, n, std::move(rows));
}

double patch_objective(const AnalysisOperator& op, std::span<const double> x, std::span<const double> y,
                       double fidelity, double lambda, double epsilon, std::span<double> grad) {
  const std::size_t n = op.cols(), k = op.rows();
  if (x.size() != n) throw std::invalid_argument("patch_objective: patch length != operator columns");
  double zc[256], coef[512];
  std::vector<double> zbuf, cbuf;
  double* z = zc;
  double* c = coef;
  if (n > 256) {
    zbuf.resize(n);
    z = zbuf.data();
  }
  if (k > 512) {
    cbuf.resize(k);
    c = cbuf.data();
  }
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = x[i] - mean;
  op.apply({z, n}, {c, k});
  double f = 0.0;
  if (fidelity != 0.0)
    for (std::size_t i = 0; i < n; ++i) f += 0.5 * fidelity * (x[i] - y[i]) * (x[i] - y[i]);
  double pen = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    pen += sparsity_penalty(c[j], epsilon);
    c[j] = lambda * sparsity_penalty_derivative(c[j], epsilon);
  }
  f += lambda * pen;
  if (!grad.empty()) {
    op.apply_transpose({c, k}, grad);
    center(grad);
    if (fidelity != 0.0)
      for (std::size_t i = 0; i < n; ++i) grad[i] += fidelity * (x[i] - y[i]);
  }
  return f;
}

double learning_objective(std::span<const double> omega, std::size_t k, std::size_t n, const PatchSet& training,
                          const GoalParams& params, std::span<double> grad) {
  if (omega.size() != k * n || training.dim() != n) throw std::invalid_argument("learning_objective: shape mismatch");
  const auto m = static_cast<Eigen::Index>(training.count());
  Eigen::Map<const RowMatrix> W(omega.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
  Eigen::Map<const Eigen::MatrixXd> X(training.values.data(), static_cast<Eigen::Index>(n), m);

  const Eigen::MatrixXd gram = W.transpose() * W;
  Eigen::LLT<Eigen::MatrixXd> llt(gram / static_cast<double>(k));
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd L = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    if (!(L(i, i) > 0.0)) return std::numeric_limits<double>::infinity();
    logdet += 2.0 * std::log(L(i, i));
  }
  const double nd = static_cast<double>(n);
  const double wl = n > 1 ? params.logdet_weight / (nd * std::log(nd)) : params.logdet_weight;

  Eigen::MatrixXd A = W * X;  // k x m
  double sparse = 0.0;
  for (Eigen::Index c = 0; c < A.cols(); ++c)
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
      sparse += sparsity_penalty(A(r, c), params.epsilon);
      A(r, c) = sparsity_penalty_derivative(A(r, c), params.epsilon);
    }
  const double md = static_cast<double>(std::max<Eigen::Index>(m, 1));
  const double f = sparse / md - wl * logdet;
  if (!grad.empty()) {
    Eigen::Map<RowMatrix> G(grad.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(L.rows(), L.cols())) / static_cast<double>(k);
    G = A * X.transpose() / md - 2.0 * wl * (W * inv);
  }
  return f;
}

double mean_sparsity(const AnalysisOperator& op, const PatchSet& patches, double epsilon) {
  if (patches.dim() != op.cols()) throw std::invalid_argument("mean_sparsity: patch length != operator columns");
  if (patches.count() == 0) throw std::invalid_argument("mean_sparsity: no patches");
  std::vector<double> z(op.cols()), c(op.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < patches.count(); ++i) {
    const auto p = patches.patch(i);
    std::copy(p.begin(), p.end(), z.begin());
    center(z);
    op.apply(z, c);
    for (double v : c) total += sparsity_penalty(v, epsilon);
  }
  return total / (static_cast<double>(patches.count()) * static_cast<double>(op.rows()));
}

AnalysisOperator learn_operator(const PatchSet& training, std::size_t k, const GoalParams& params,
                                const SeededRng& rng, LearnTrace* trace) {
  params.validate();
  const std::size_t n = training.dim();
  if (n == 0 || k <= n) throw std::invalid_argument("learn_operator: need k > patch dimension");
  if (training.count() < k) throw std::invalid_argument("learn_operator: fewer training patches than filters");

  // Seeded subsample (kept in order), each patch mean-subtracted.
  PatchSet work;
  work.patch_size = training.patch_size;
  std::vector<std::size_t> idx(training.count());
  std::iota(idx.begin(), idx.end(), 0);
  SeededRng pick = SeededRng::derive(rng.seed(), {1});
  if (idx.size() > params.max_training_patches && params.max_training_patches >= k) {
    for (std::size_t i = 0; i < params.max_training_patches; ++i)
      std::swap(idx[i], idx[i + pick.below(idx.size() - i)]);
    idx.resize(params.max_training_patches);
    std::sort(idx.begin(), idx.end());
  }
  for (std::size_t i : idx) {
    work.positions.push_back(training.positions[i]);
    const auto p = training.patch(i);
    const std::size_t at = work.values.size();
    work.values.insert(work.values.end(), p.begin(), p.end());
    center({work.values.data() + at, n});
  }

  const AnalysisOperator start = random_operator(k, n, SeededRng::derive(rng.seed(), {2}));
  std::vector<double> omega(start.data().begin(), start.data().end());
  std::vector<double> grad(k * n), cand(k * n), cand_grad(k * n);
  double f = learning_objective(omega, k, n, work, params, grad);
  if (!std::isfinite(f)) throw NumericalError("learn_operator: singular initial operator");
  if (trace) trace->objective.assign(1, f);
  double step = 1.0;
  for (std::size_t it = 0; it < params.learn_iters; ++it) {
    // Tangent direction: drop each row's radial component.
    double gnorm = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double* g = grad.data() + j * n;
      const double* w = omega.data() + j * n;
      double radial = 0.0;
      for (std::size_t i = 0; i < n; ++i) radial += g[i] * w[i];
      for (std::size_t i = 0; i < n; ++i) {
        g[i] -= radial * w[i];
        gnorm = std::max(gnorm, std::fabs(g[i]));
      }
    }
    if (gnorm <= params.tolerance) break;
    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      for (std::size_t j = 0; j < k; ++j) {
        double* c = cand.data() + j * n;
        for (std::size_t i = 0; i < n; ++i) c[i] = omega[j * n + i] - step * grad[j * n + i];
        const double norm = row_norm(c, n);
        for (std::size_t i = 0; i < n; ++i) c[i] /= norm;
      }
      const double fc = learning_objective(cand, k, n, work, params, cand_grad);
      if (std::isfinite(fc) && fc < f) {
        omega.swap(cand);
        grad.swap(cand_grad);
        f = fc;
        accepted = true;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted) break;
    if (trace) trace->objective.push_back(f);
  }
  return AnalysisOperator::normalized(k, n, std::move(omega));
}

void solve_patch(const AnalysisOperator& op, std::span<double> x, std::span<const double> y,
                 std::span<const std::uint8_t> fixed, double fidelity, const GoalParams& params,
                 SolveTrace* trace) {
  const std::size_t n = x.size();
  const double lambda = fidelity == 0.0 ? 1.0 : params.lambda;
  std::vector<double> g(n), d(n), xn(n), gn(n);
  auto project = [&](std::span<double> v) {
    if (!fixed.empty())
      for (std::size_t i = 0; i < n; ++i)
        if (fixed[i]) v[i] = 0.0;
  };
  double f = patch_objective(op, x, y, fidelity, lambda, params.epsilon, g);
  project(g);
  for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
  if (trace) trace->objective.assign(1, f);
  double step = 1.0;
  for (std::size_t it = 0; it < params.max_iters; ++it) {
    double gmax = 0.0, gd = 0.0, gg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      gmax = std::max(gmax, std::fabs(g[i]));
      gd += g[i] * d[i];
      gg += g[i] * g[i];
    }
    if (gmax <= params.tolerance) break;
    if (gd >= 0.0) {
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      gd = -gg;
    }
    bool accepted = false;
    double fn = f;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + step * d[i];
      fn = patch_objective(op, xn, y, fidelity, lambda, params.epsilon, gn);
      if (fn <= f + 1e-4 * step * gd && fn <= f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    project(gn);
    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i) num += gn[i] * (gn[i] - g[i]);
    const double beta = std::max(0.0, num / gg);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = xn[i];
      d[i] = -gn[i] + beta * d[i];
    }
    g.swap(gn);
    f = fn;
    step = std::min(1.0, step * 2.0);
    if (trace) trace->objective.push_back(f);
  }
}

Image operator_denoise(const Image& image, const AnalysisOperator& op, const GoalParams& params, Exec exec) {
  params.validate();
  if (op.cols() != params.patch_size * params.patch_size)
    throw std::invalid_argument("operator_denoise: operator size does not match the patch size");
  if (params.lambda == 0.0) return image;
  PatchSet ps = extract_patches(image, params.patch_size, params.stride);
#pragma omp parallel for schedule(dynamic, 8) if (run_parallel(exec))
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(ps.count()); ++ii) {
    auto x = ps.patch(static_cast<std::size_t>(ii));
    const std::vector<double> y(x.begin(), x.end());
    solve_patch(op, x, y, {}, 1.0, params);
  }
  return assemble_patches(ps, image.width(), image.height());
}

Image operator_inpaint(const SparseImage& sparse, const AnalysisOperator& op, const GoalParams& params, Exec exec) {
  params.validate();
  if (op.cols() != params.patch_size * params.patch_size)
    throw std::invalid_argument("operator_inpaint: operator size does not match the patch size");
  const std::size_t observed = sparse.sampled_count();
  if (observed == 0) throw std::invalid_argument("operator_inpaint: empty sampling mask");
  if (observed == sparse.image().size()) return sparse.image();

  // Start from a natural-neighbor fill; the constrained problem is convex, the
  // start only shortens the solve.
  Image start;
  try {
    start = interpolate(sparse, InterpMethod::natural_neighbor, exec);
  } catch (const std::invalid_argument&) {
    start = interpolate(sparse, InterpMethod::nearest, exec);
  }
  PatchSet ps = extract_patches(SparseImage(start, std::vector<std::uint8_t>(sparse.mask().begin(), sparse.mask().end())),
                                params.patch_size, params.stride);
  const double per_patch = static_cast<double>(observed) * static_cast<double>(ps.dim()) /
                           static_cast<double>(sparse.image().size());
  if (per_patch < 1.0)
    std::clog << "warning: operator_inpaint: fewer than one observed pixel per patch on average\n";
#pragma omp parallel for schedule(dynamic, 8) if (run_parallel(exec))
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(ps.count()); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    solve_patch(op, ps.patch(i), {}, ps.known_mask(i), 0.0, params);
  }
  const Image merged = assemble_patches(ps, sparse.width(), sparse.height());
  std::vector<double> out = merged.to_vector();
  const auto src = sparse.image().pixels();
  for (std::size_t j = 0; j < out.size(); ++j)
    if (sparse.sampled(j)) out[j] = src[j];
  return Image(sparse.width(), sparse.height(), std::move(out));
}

void save_operator(const AnalysisOperator& op, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CodecError("cannot open for writing: " + path.string());
  out << "AOP1\n" << op.rows() << " " << op.cols() << "\n";
  for (double v : op.data()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!out) throw CodecError("write failed: " + path.string());
}

AnalysisOperator load_operator(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CodecError("cannot open operator: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "AOP1") throw CodecError("not an AOP1 operator: " + path.string());
  if (!std::getline(in, line)) throw CodecError("truncated operator header: " + path.string());
  std::istringstream hdr(line);
  long long k = 0, n = 0;
  if (!(hdr >> k >> n) || k < 1 || n < 1) throw CodecError("bad operator header: " + path.string());
  const auto count = static_cast<std::size_t>(k * n);
  std::vector<unsigned char> raw(count * 8);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw CodecError("truncated operator data: " + path.string());
  std::vector<double> rows(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(raw[i * 8 + b]) << (8 * b);
    rows[i] = std::bit_cast<double>(bits);
  }
  try {
    return AnalysisOperator(static_cast<std::size_t>(k), static_cast<std::size_t>(n), std::move(rows));
  } catch (const std::invalid_argument& e) {
    throw CodecError(std::string("invalid operator file: ") + e.what());
  }
}

}  // namespace semsparse
