#include "semsparse/ebi.hpp"

#include <algorithm>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "semsparse/interpolation.hpp"

namespace semsparse {

void EbiParams::validate() const {
  if (patch_size < 1) throw std::invalid_argument("EbiParams: patch size must be >= 1");
  if (min_known < 1) throw std::invalid_argument("EbiParams: min_known must be >= 1");
  if (max_iterations < 1) throw std::invalid_argument("EbiParams: max_iterations must be >= 1");
}

Match best_match(const PatchDictionary& dict, std::span<const double> target, std::span<const std::uint8_t> known,
                 Exec exec) {
  if (dict.size() == 0) throw std::invalid_argument("best_match: empty dictionary");
  const std::size_t dim = dict.dim();
  if (target.size() != dim || known.size() != dim) throw std::invalid_argument("best_match: target size != atom size");
  std::vector<std::size_t> idx;
  for (std::size_t p = 0; p < dim; ++p)
    if (known[p]) idx.push_back(p);
  if (idx.empty()) throw std::invalid_argument("best_match: target has no known pixels");

  const std::size_t n = dict.size();
  std::vector<double> cost(n);
  const auto data = dict.data();
#pragma omp parallel for schedule(static) if (run_parallel(exec) && n >= 256)
  for (std::ptrdiff_t aa = 0; aa < static_cast<std::ptrdiff_t>(n); ++aa) {
    const double* a = data.data() + static_cast<std::size_t>(aa) * dim;
    double c = 0.0;
    for (std::size_t p : idx) {
      const double d = a[p] - target[p];
      c += d * d;
    }
    cost[static_cast<std::size_t>(aa)] = c;
  }
  Match best{0, cost[0]};
  for (std::size_t a = 1; a < n; ++a)
    if (cost[a] < best.cost) best = {a, cost[a]};
  return best;
}

Image ebi_inpaint(const SparseImage& sparse, const PatchDictionary& dict, const EbiParams& params, EbiReport* report,
                  Exec exec) {
  params.validate();
  if (dict.size() == 0) throw std::invalid_argument("ebi_inpaint: empty dictionary");
  if (dict.patch_size() != params.patch_size)
    throw std::invalid_argument("ebi_inpaint: dictionary patch size differs from params.patch_size");
  if (sparse.sampled_count() == 0) throw std::invalid_argument("ebi_inpaint: empty sampling mask");
  const std::size_t W = sparse.width(), H = sparse.height(), p = params.patch_size;
  if (p > std::min(W, H)) throw std::invalid_argument("ebi_inpaint: patch larger than image");

  EbiReport local;
  EbiReport& rep = report ? *report : local;
  rep = {};
  const auto src = sparse.image().pixels();
  std::vector<double> value(src.begin(), src.end());
  std::vector<std::uint8_t> filled(sparse.mask().begin(), sparse.mask().end());
  std::size_t missing_total = static_cast<std::size_t>(std::count(filled.begin(), filled.end(), 0));
  if (missing_total == 0) return sparse.image();

  const std::size_t stride = std::max<std::size_t>(1, p / 2);
  const auto xs = grid_offsets(W, p, stride);
  const auto ys = grid_offsets(H, p, stride);
  struct Region {
    std::size_t x, y, observed, missing;
  };
  std::vector<Region> regions;
  for (std::size_t y : ys)
    for (std::size_t x : xs) {
      Region r{x, y, 0, 0};
      for (std::size_t dy = 0; dy < p; ++dy)
        for (std::size_t dx = 0; dx < p; ++dx) {
          if (sparse.sampled(x + dx, y + dy)) ++r.observed;
          else ++r.missing;
        }
      regions.push_back(r);
    }
  // The observed count never changes, so one stable sort fixes the visiting order.
  std::vector<std::size_t> order(regions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return regions[a].observed > regions[b].observed; });

  std::vector<double> target(p * p);
  std::vector<std::uint8_t> known(p * p);
  for (std::size_t oi = 0; oi < order.size() && missing_total > 0; ++oi) {
    Region& r = regions[order[oi]];
    if (r.missing == 0) continue;
    if (r.observed < params.min_known || rep.iterations >= params.max_iterations) break;
    for (std::size_t dy = 0; dy < p; ++dy)
      for (std::size_t dx = 0; dx < p; ++dx) {
        const std::size_t j = (r.y + dy) * W + r.x + dx;
        target[dy * p + dx] = src[j];
        known[dy * p + dx] = sparse.sampled(j) ? 1 : 0;
      }
    const Match m = best_match(dict, target, known, exec);
    const auto atom = dict.atom(m.index);
    for (std::size_t dy = 0; dy < p; ++dy)
      for (std::size_t dx = 0; dx < p; ++dx) {
        const std::size_t px = r.x + dx, py = r.y + dy, j = py * W + px;
        if (filled[j]) continue;
        value[j] = atom[dy * p + dx];
        filled[j] = 1;
        --missing_total;
        // Every region containing this pixel loses one missing pixel.
        for (auto& other : regions)
          if (px >= other.x && px < other.x + p && py >= other.y && py < other.y + p) --other.missing;
      }
    ++rep.iterations;
  }

  if (missing_total > 0) {
    rep.warned = true;
    rep.fallback_pixels = missing_total;
    std::clog << "warning: ebi_inpaint: " << missing_total
              << " pixels in regions below min_known; filled by natural-neighbor interpolation\n";
    const SparseImage partial(Image(W, H, value), filled);
    Image fill;
    try {
      fill = interpolate(partial, InterpMethod::natural_neighbor, exec);
    } catch (const std::invalid_argument&) {
      fill = interpolate(partial, InterpMethod::nearest, exec);
    }
    for (std::size_t j = 0; j < value.size(); ++j)
      if (!filled[j]) value[j] = fill[j];
  }
  for (std::size_t j = 0; j < value.size(); ++j)
    if (sparse.sampled(j)) value[j] = src[j];
  return Image(W, H, std::move(value));
}

}  // namespace semsparse
