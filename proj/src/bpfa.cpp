#include "semsparse/bpfa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "semsparse/errors.hpp"
#include "semsparse/interpolation.hpp"

namespace semsparse {

namespace {

// Substream tags within one sweep.
constexpr std::uint64_t kTagInit = 0;
constexpr std::uint64_t kTagDictionary = 1;
constexpr std::uint64_t kTagWeights = 2;
constexpr std::uint64_t kTagGlobals = 3;

void check_shapes(const BpfaState& state, const PatchSet& obs) {
  if (!obs.has_masks()) throw std::invalid_argument("bpfa: observations need per-pixel masks");
  if (state.dim != obs.dim() || state.patches != obs.count() || state.dictionary.size() != state.dim * state.atoms ||
      state.z.size() != state.patches * state.atoms || state.s.size() != state.z.size() ||
      state.pi.size() != state.atoms)
    throw std::invalid_argument("bpfa: state dimensions do not match the observations");
}

// Observed residual x - D (z .* s), zero where the pixel is not observed.
std::vector<double> observed_residual(const BpfaState& st, const PatchSet& obs) {
  const std::size_t P = st.dim;
  std::vector<double> e(st.patches * P);
  std::vector<double> rec(P);
  for (std::size_t i = 0; i < st.patches; ++i) {
    st.reconstruct_patch(i, rec);
    const auto x = obs.patch(i);
    const auto m = obs.known_mask(i);
    for (std::size_t p = 0; p < P; ++p) e[i * P + p] = m[p] ? x[p] - rec[p] : 0.0;
  }
  return e;
}

// Unit-norm atoms cut at seeded grid positions from a natural-neighbor fill of
// the scan, centered like the observations. Speeds up mixing considerably
// compared with a random start.
std::vector<double> warm_start_dictionary(const SparseImage& sparse, double offset, const BpfaParams& params,
                                          const SeededRng& rng) {
  Image fill;
  try {
    fill = interpolate(sparse, InterpMethod::natural_neighbor);
  } catch (const std::invalid_argument&) {
    fill = interpolate(sparse, InterpMethod::nearest);
  }
  const std::size_t ps = params.patch_size, P = ps * ps, K = params.atoms;
  const auto xs = grid_offsets(fill.width(), ps, 1), ys = grid_offsets(fill.height(), ps, 1);
  SeededRng pick = SeededRng::derive(rng.seed(), {kTagInit, 1});
  std::vector<double> dict(P * K);
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t x0 = xs[pick.below(xs.size())], y0 = ys[pick.below(ys.size())];
    double* d = dict.data() + k * P;
    double norm = 0.0;
    for (std::size_t dy = 0; dy < ps; ++dy)
      for (std::size_t dx = 0; dx < ps; ++dx) {
        d[dy * ps + dx] = fill(x0 + dx, y0 + dy) - offset;
        norm += d[dy * ps + dx] * d[dy * ps + dx];
      }
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      for (std::size_t p = 0; p < P; ++p) d[p] = pick.normal() / std::sqrt(static_cast<double>(P));
    } else {
      for (std::size_t p = 0; p < P; ++p) d[p] /= norm;
    }
  }
  return dict;
}

// Samples every (z_ik, s_ik) given the dictionary and updates the observed
// residual e in place. rng_for(i) supplies patch i's substream.
template <typename RngFor>
void sample_weights(BpfaState& st, const PatchSet& observations, std::vector<double>& e, RngFor&& rng_for,
                    Exec exec) {
  const std::size_t P = st.dim, K = st.atoms, N = st.patches;
  const auto& mask = observations.known;
  st.s_mean.resize(N * K, 0.0);
  const double gs = st.gamma_weight, ge = st.gamma_noise;
    std::vector<double> log_prior_odds(K);
    for (std::size_t k = 0; k < K; ++k) {
      const double p = st.pi[k];
      log_prior_odds[k] = p <= 0.0 ? -std::numeric_limits<double>::infinity()
                          : p >= 1.0 ? std::numeric_limits<double>::infinity()
                                     : std::log(p) - std::log1p(-p);
    }
#pragma omp parallel for schedule(dynamic, 16) if (run_parallel(exec))
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(N); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      SeededRng patch_rng = rng_for(i);
      const std::uint8_t* m = mask.data() + i * P;
      double* ei = e.data() + i * P;
      for (std::size_t k = 0; k < K; ++k) {
        const double* d = st.dictionary.data() + k * P;
        double dd = 0.0, dr = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
          if (!m[p]) continue;
          dd += d[p] * d[p];
          dr += d[p] * ei[p];
        }
        const std::uint8_t z_old = st.z[i * K + k];
        const double s_old = st.s[i * K + k];
        if (z_old) dr += s_old * dd;
        const double a = gs + ge * dd;
        const double b = ge * dr;
        const double log_odds = log_prior_odds[k] + 0.5 * std::log(gs / a) + b * b / (2.0 * a);
        const double u = patch_rng.uniform();
        const bool z_new = u < 1.0 / (1.0 + std::exp(-log_odds));
        const double g = patch_rng.normal();
        const double s_new = z_new ? b / a + g / std::sqrt(a) : g / std::sqrt(gs);
        const double delta = (z_new ? s_new : 0.0) - (z_old ? s_old : 0.0);
        if (delta != 0.0)
          for (std::size_t p = 0; p < P; ++p)
            if (m[p]) ei[p] -= d[p] * delta;
        st.z[i * K + k] = z_new ? 1 : 0;
        st.s[i * K + k] = s_new;
        st.s_mean[i * K + k] = z_new ? b / a : 0.0;
      }
    }
}

}  // namespace

void BpfaParams::validate() const {
  if (atoms < 1) throw std::invalid_argument("BpfaParams: atoms must be >= 1");
  if (patch_size < 1 || stride < 1) throw std::invalid_argument("BpfaParams: patch size and stride must be >= 1");
  if (burn_in < 1 || collect < 1) throw std::invalid_argument("BpfaParams: burn_in and collect must be >= 1");
  for (double h : {a0, b0, c0, d0, e0, f0})
    if (!(h > 0.0)) throw std::invalid_argument("BpfaParams: prior hyperparameters must be > 0");
}

void BpfaState::reconstruct_patch(std::size_t i, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < atoms; ++k) {
    if (!z[i * atoms + k]) continue;
    const double w = s[i * atoms + k];
    const double* d = dictionary.data() + k * dim;
    for (std::size_t p = 0; p < dim; ++p) out[p] += w * d[p];
  }
}

void BpfaState::reconstruct_patch_mean(std::size_t i, std::span<double> out) const {
  if (dictionary_mean.size() != dictionary.size() || s_mean.size() != s.size()) {
    reconstruct_patch(i, out);
    return;
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < atoms; ++k) {
    if (!z[i * atoms + k]) continue;
    const double w = s_mean[i * atoms + k];
    const double* d = dictionary_mean.data() + k * dim;
    for (std::size_t p = 0; p < dim; ++p) out[p] += w * d[p];
  }
}

void BpfaState::check_invariants() const {
  for (auto v : z)
    if (v > 1) throw NumericalError("bpfa: non-binary indicator");
  for (double p : pi)
    if (!(p >= 0.0 && p <= 1.0)) throw NumericalError("bpfa: pi outside [0, 1]");
  if (!(gamma_noise > 0.0) || !std::isfinite(gamma_noise)) throw NumericalError("bpfa: noise precision not positive");
  if (!(gamma_weight > 0.0) || !std::isfinite(gamma_weight)) throw NumericalError("bpfa: weight precision not positive");
  for (double v : dictionary)
    if (!std::isfinite(v)) throw NumericalError("bpfa: non-finite dictionary entry");
  for (double v : s)
    if (!std::isfinite(v)) throw NumericalError("bpfa: non-finite weight");
}

BpfaState bpfa_initial_state(const PatchSet& observations, const BpfaParams& params, const SeededRng& rng,
                             std::span<const double> initial_dictionary) {
  params.validate();
  if (params.patch_size != observations.patch_size)
    throw std::invalid_argument("bpfa: patch size differs from the observations");
  BpfaState st;
  st.dim = observations.dim();
  st.atoms = params.atoms;
  st.patches = observations.count();
  st.dictionary.resize(st.dim * st.atoms);
  SeededRng init = SeededRng::derive(rng.seed(), {kTagInit});
  const double sd = 1.0 / std::sqrt(static_cast<double>(st.dim));
  if (initial_dictionary.empty()) {
    for (double& v : st.dictionary) v = init.normal() * sd;
  } else {
    if (initial_dictionary.size() != st.dictionary.size())
      throw std::invalid_argument("bpfa: initial dictionary must be P x K");
    std::copy(initial_dictionary.begin(), initial_dictionary.end(), st.dictionary.begin());
  }
  st.z.assign(st.patches * st.atoms, 0);
  st.s.assign(st.patches * st.atoms, 0.0);
  const double kd = static_cast<double>(st.atoms);
  st.pi.assign(st.atoms, params.a0 / (params.a0 + params.b0 * (kd - 1.0)));  // prior mean
  st.gamma_weight = 1.0;
  st.gamma_noise = 100.0;
  st.sweep = 0;
  check_shapes(st, observations);
  if (!initial_dictionary.empty()) {
    // A given dictionary would be discarded by the first column update while no
    // patch uses it, so draw the weights against it once.
    std::vector<double> e = observed_residual(st, observations);
    sample_weights(st, observations, e, [&](std::size_t i) { return SeededRng::derive(rng.seed(), {kTagInit, 2, i}); },
                   Exec::parallel);
    st.s_mean.clear();
  }
  return st;
}

BpfaState gibbs_sweep(const BpfaState& state, const PatchSet& observations, const BpfaParams& params,
                      const SeededRng& rng, Exec exec) {
  check_shapes(state, observations);
  BpfaState st = state;
  const std::size_t P = st.dim, K = st.atoms, N = st.patches;
  const std::uint64_t seed = rng.seed();
  const std::uint64_t sweep = st.sweep;
  std::vector<double> e = observed_residual(st, observations);
  const auto& mask = observations.known;

  st.dictionary_mean.assign(P * K, 0.0);
  st.s_mean.assign(N * K, 0.0);

  // Dictionary columns, one at a time.
  {
    std::vector<double> prec(P), num(P), fresh(P);
    std::vector<std::size_t> active;
    for (std::size_t k = 0; k < K; ++k) {
      active.clear();
      for (std::size_t i = 0; i < N; ++i)
        if (st.z[i * K + k]) active.push_back(i);
      double* d = st.dictionary.data() + k * P;
      std::fill(prec.begin(), prec.end(), static_cast<double>(P));
      std::fill(num.begin(), num.end(), 0.0);
      for (std::size_t i : active) {
        const double w = st.s[i * K + k];
        const std::uint8_t* m = mask.data() + i * P;
        const double* ei = e.data() + i * P;
        for (std::size_t p = 0; p < P; ++p) {
          if (!m[p]) continue;
          prec[p] += st.gamma_noise * w * w;
          num[p] += st.gamma_noise * w * (ei[p] + d[p] * w);
        }
      }
      SeededRng col_rng = SeededRng::derive(seed, {sweep, kTagDictionary, k});
      double* dm = st.dictionary_mean.data() + k * P;
      for (std::size_t p = 0; p < P; ++p) {
        dm[p] = num[p] / prec[p];
        fresh[p] = dm[p] + col_rng.normal() / std::sqrt(prec[p]);
      }
      for (std::size_t i : active) {
        const double w = st.s[i * K + k];
        const std::uint8_t* m = mask.data() + i * P;
        double* ei = e.data() + i * P;
        for (std::size_t p = 0; p < P; ++p)
          if (m[p]) ei[p] += w * (d[p] - fresh[p]);
      }
      std::copy(fresh.begin(), fresh.end(), d);
    }
  }

  // Indicators and weights; patches are independent given the dictionary.
  sample_weights(st, observations, e, [&](std::size_t i) { return SeededRng::derive(seed, {sweep, kTagWeights, i}); },
                 exec);

  // Usage probabilities and precisions.
  SeededRng globals = SeededRng::derive(seed, {sweep, kTagGlobals});
  const auto Kd = static_cast<double>(K), Nd = static_cast<double>(N);
  for (std::size_t k = 0; k < K; ++k) {
    double used = 0.0;
    for (std::size_t i = 0; i < N; ++i) used += st.z[i * K + k];
    st.pi[k] = globals.beta(params.a0 / Kd + used, params.b0 * (Kd - 1.0) / Kd + Nd - used);
  }
  // Inactive weights are prior draws that never touch the likelihood; they are
  // integrated out here, so gamma_weight tracks the scale of the used weights.
  double s2 = 0.0, active = 0.0;
  for (std::size_t j = 0; j < st.s.size(); ++j)
    if (st.z[j]) {
      s2 += st.s[j] * st.s[j];
      active += 1.0;
    }
  st.gamma_weight = globals.gamma(params.e0 + 0.5 * active, params.f0 + 0.5 * s2);
  double e2 = 0.0, observed = 0.0;
  for (std::size_t j = 0; j < e.size(); ++j) {
    e2 += e[j] * e[j];
    observed += mask[j];
  }
  st.gamma_noise = globals.gamma(params.c0 + 0.5 * observed, params.d0 + 0.5 * e2);
  st.sweep = sweep + 1;
  st.check_invariants();
  return st;
}

double observed_residual_energy(const BpfaState& state, const PatchSet& observations) {
  check_shapes(state, observations);
  double total = 0.0;
  for (double v : observed_residual(state, observations)) total += v * v;
  return total;
}

Image bpfa_inpaint(const SparseImage& sparse, const BpfaParams& params, const SeededRng& rng, BpfaTrace* trace,
                   BpfaState* final_state, Exec exec) {
  params.validate();
  if (sparse.sampled_count() == 0) throw std::invalid_argument("bpfa_inpaint: empty sampling mask");
  if (params.patch_size > std::min(sparse.width(), sparse.height()))
    throw std::invalid_argument("bpfa_inpaint: patch larger than image");

  // Model the observations about their mean; unobserved entries are zeroed so
  // no stored value there can reach a conditional.
  PatchSet obs = extract_patches(sparse, params.patch_size, params.stride);
  double offset = 0.0;
  {
    const auto src = sparse.image().pixels();
    for (std::size_t j = 0; j < src.size(); ++j)
      if (sparse.sampled(j)) offset += src[j];
    offset /= static_cast<double>(sparse.sampled_count());
  }
  for (std::size_t j = 0; j < obs.values.size(); ++j) obs.values[j] = obs.known[j] ? obs.values[j] - offset : 0.0;

  const std::size_t W = sparse.width(), H = sparse.height(), ps = params.patch_size, P = obs.dim();
  std::vector<double> sum(W * H, 0.0);
  std::vector<double> cover(W * H, 0.0);
  for (const auto& pos : obs.positions)
    for (std::size_t dy = 0; dy < ps; ++dy)
      for (std::size_t dx = 0; dx < ps; ++dx) cover[(pos.y + dy) * W + pos.x + dx] += 1.0;

  BpfaState st = bpfa_initial_state(obs, params, rng, warm_start_dictionary(sparse, offset, params, rng));
  if (trace) trace->residual_energy.clear();
  std::vector<double> rec(P);
  const std::size_t total = params.burn_in + params.collect;
  for (std::size_t t = 0; t < total; ++t) {
    st = gibbs_sweep(st, obs, params, rng, exec);
    if (trace) trace->residual_energy.push_back(observed_residual_energy(st, obs));
    if (t < params.burn_in) continue;
    for (std::size_t i = 0; i < obs.count(); ++i) {
      st.reconstruct_patch_mean(i, rec);
      const auto pos = obs.positions[i];
      for (std::size_t dy = 0; dy < ps; ++dy)
        for (std::size_t dx = 0; dx < ps; ++dx) sum[(pos.y + dy) * W + pos.x + dx] += rec[dy * ps + dx];
    }
  }

  const auto src = sparse.image().pixels();
  std::vector<double> out(W * H);
  const double sweeps = static_cast<double>(params.collect);
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = sparse.sampled(j) ? src[j] : std::clamp(offset + sum[j] / (cover[j] * sweeps), 0.0, 1.0);
    if (!std::isfinite(out[j])) throw NumericalError("bpfa_inpaint: non-finite reconstruction");
  }
  if (final_state) *final_state = std::move(st);
  return Image(W, H, std::move(out));
}

PatchDictionary bpfa_dictionary(const BpfaState& state) {
  std::vector<double> atoms(state.dictionary.size());
  for (std::size_t k = 0; k < state.atoms; ++k) {
    const auto col = state.column(k);
    double peak = 0.0;
    for (double v : col) peak = std::max(peak, std::fabs(v));
    const double scale = peak > 0.0 ? 0.5 / peak : 0.0;
    for (std::size_t p = 0; p < state.dim; ++p) atoms[k * state.dim + p] = 0.5 + scale * col[p];
  }
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(state.dim))));
  return PatchDictionary(side, std::move(atoms), "bpfa dictionary after " + std::to_string(state.sweep) + " sweeps");
}

}  // namespace semsparse
