#include "semsparse/interpolation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "semsparse/delaunay.hpp"

namespace semsparse {

std::optional<InterpMethod> parse_interp_method(std::string_view name) {
  if (name == "nearest") return InterpMethod::nearest;
  if (name == "bilinear" || name == "linear") return InterpMethod::bilinear;
  if (name == "bicubic") return InterpMethod::bicubic;
  if (name == "nn" || name == "natural_neighbor") return InterpMethod::natural_neighbor;
  return std::nullopt;
}

std::string to_string(InterpMethod method) {
  switch (method) {
    case InterpMethod::nearest: return "nearest";
    case InterpMethod::bilinear: return "bilinear";
    case InterpMethod::bicubic: return "bicubic";
    case InterpMethod::natural_neighbor: return "nn";
  }
  return "unknown";
}

namespace {

// Bucket grid for nearest-sample queries with (distance, index) ordering.
class NearestSites {
 public:
  NearestSites(const std::vector<Point2>& sites, std::size_t width, std::size_t height) : sites_(sites) {
    const double density = static_cast<double>(sites.size()) / static_cast<double>(width * height);
    cell_ = std::max(1.0, std::round(std::sqrt(2.0 / density)));
    cols_ = static_cast<std::size_t>(std::ceil(static_cast<double>(width) / cell_));
    rows_ = static_cast<std::size_t>(std::ceil(static_cast<double>(height) / cell_));
    buckets_.resize(cols_ * rows_);
    for (std::uint32_t i = 0; i < sites.size(); ++i) buckets_[bucket_of(sites[i])].push_back(i);
  }

  std::uint32_t nearest(Point2 q) const {
    const auto cx = static_cast<std::ptrdiff_t>(std::floor(q.x / cell_));
    const auto cy = static_cast<std::ptrdiff_t>(std::floor(q.y / cell_));
    double best_d2 = std::numeric_limits<double>::infinity();
    std::uint32_t best = 0;
    const auto max_ring = static_cast<std::ptrdiff_t>(std::max(cols_, rows_));
    for (std::ptrdiff_t r = 0; r <= max_ring; ++r) {
      for (std::ptrdiff_t by = cy - r; by <= cy + r; ++by) {
        if (by < 0 || by >= static_cast<std::ptrdiff_t>(rows_)) continue;
        const bool edge_row = by == cy - r || by == cy + r;
        for (std::ptrdiff_t bx = cx - r; bx <= cx + r; bx += (edge_row || r == 0) ? 1 : 2 * r) {
          if (bx < 0 || bx >= static_cast<std::ptrdiff_t>(cols_)) continue;
          for (std::uint32_t i : buckets_[static_cast<std::size_t>(by) * cols_ + static_cast<std::size_t>(bx)]) {
            const double dx = sites_[i].x - q.x, dy = sites_[i].y - q.y;
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
              best_d2 = d2;
              best = i;
            }
          }
        }
      }
      const double reach = static_cast<double>(r) * cell_;
      if (best_d2 < reach * reach) break;
    }
    return best;
  }

 private:
  std::size_t bucket_of(Point2 p) const {
    const auto bx = std::min(cols_ - 1, static_cast<std::size_t>(p.x / cell_));
    const auto by = std::min(rows_ - 1, static_cast<std::size_t>(p.y / cell_));
    return by * cols_ + bx;
  }

  const std::vector<Point2>& sites_;
  double cell_ = 1.0;
  std::size_t cols_ = 1, rows_ = 1;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

struct Gradient {
  double gx = 0.0, gy = 0.0;
};

// Inverse-square-distance weighted least-squares plane through each site's
// Delaunay neighbours.
std::vector<Gradient> estimate_gradients(const Delaunay& dt, const std::vector<double>& values) {
  const auto& sites = dt.sites();
  const auto nb = dt.vertex_neighbors();
  std::vector<Gradient> grad(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    double axx = 0, axy = 0, ayy = 0, bx = 0, by = 0;
    for (std::uint32_t j : nb[i]) {
      const double dx = sites[j].x - sites[i].x, dy = sites[j].y - sites[i].y;
      const double w = 1.0 / (dx * dx + dy * dy);
      const double df = values[j] - values[i];
      axx += w * dx * dx;
      axy += w * dx * dy;
      ayy += w * dy * dy;
      bx += w * dx * df;
      by += w * dy * df;
    }
    const double det = axx * ayy - axy * axy;
    if (std::fabs(det) > 1e-12 * (axx * ayy + 1e-300)) {
      grad[i] = {(ayy * bx - axy * by) / det, (axx * by - axy * bx) / det};
    }
  }
  return grad;
}

std::array<double, 3> barycentric(Point2 a, Point2 b, Point2 c, Point2 q) {
  const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  const double l1 = ((b.x - q.x) * (c.y - q.y) - (c.x - q.x) * (b.y - q.y)) / det;
  const double l2 = ((c.x - q.x) * (a.y - q.y) - (a.x - q.x) * (c.y - q.y)) / det;
  return {l1, l2, 1.0 - l1 - l2};
}

// Cubic Bezier triangle with vertex values and gradients (C0 across edges,
// reproduces quadratics when the gradients are exact).
double cubic_patch(const std::array<Point2, 3>& p, const std::array<double, 3>& f, const std::array<Gradient, 3>& g,
                   const std::array<double, 3>& l) {
  auto edge_cp = [&](int i, int j) {
    return f[i] + (g[i].gx * (p[j].x - p[i].x) + g[i].gy * (p[j].y - p[i].y)) / 3.0;
  };
  const double b210 = edge_cp(0, 1), b201 = edge_cp(0, 2);
  const double b120 = edge_cp(1, 0), b021 = edge_cp(1, 2);
  const double b102 = edge_cp(2, 0), b012 = edge_cp(2, 1);
  const double e = (b210 + b201 + b120 + b021 + b102 + b012) / 6.0;
  const double v = (f[0] + f[1] + f[2]) / 3.0;
  const double b111 = e + (e - v) / 2.0;
  const double u = l[0], s = l[1], t = l[2];
  return f[0] * u * u * u + f[1] * s * s * s + f[2] * t * t * t + 3.0 * b210 * u * u * s + 3.0 * b201 * u * u * t +
         3.0 * b120 * s * s * u + 3.0 * b021 * s * s * t + 3.0 * b102 * t * t * u + 3.0 * b012 * t * t * s +
         6.0 * b111 * u * s * t;
}

}  // namespace

Image interpolate(const SparseImage& sparse, InterpMethod method, Exec exec) {
  const std::size_t width = sparse.width(), height = sparse.height();
  std::vector<Point2> sites;
  std::vector<double> values;
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      if (sparse.sampled(x, y)) {
        sites.push_back({static_cast<double>(x), static_cast<double>(y)});
        values.push_back(sparse.image()(x, y));
      }
  if (sites.empty()) throw std::invalid_argument("interpolate: empty sampling mask");
  if (sites.size() == width * height) return sparse.image();

  const NearestSites nearest(sites, width, height);

  std::optional<Delaunay> dt;
  if (method != InterpMethod::nearest) {
    try {
      dt.emplace(sites);
    } catch (const std::invalid_argument&) {
      method = InterpMethod::nearest;  // too few or collinear sites to triangulate
    }
  }
  std::vector<Gradient> grad;
  if (method == InterpMethod::bicubic) grad = estimate_gradients(*dt, values);

  std::vector<double> out(width * height);
  const auto src = sparse.image().pixels();

#pragma omp parallel for schedule(dynamic, 4) if (run_parallel(exec))
  for (std::ptrdiff_t yy = 0; yy < static_cast<std::ptrdiff_t>(height); ++yy) {
    const auto y = static_cast<std::size_t>(yy);
    std::uint32_t hint = Delaunay::kNone;
    std::vector<NaturalWeight> weights;
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t i = y * width + x;
      if (sparse.sampled(i)) {
        out[i] = src[i];
        continue;
      }
      const Point2 q{static_cast<double>(x), static_cast<double>(y)};
      double v = 0.0;
      bool resolved = false;
      switch (method) {
        case InterpMethod::nearest:
          break;
        case InterpMethod::natural_neighbor: {
          if (dt->natural_coordinates(q, weights, hint) != Delaunay::QueryKind::outside) {
            for (const auto& w : weights) v += w.weight * values[w.site];
            resolved = true;
          }
          break;
        }
        case InterpMethod::bilinear:
        case InterpMethod::bicubic: {
          const std::uint32_t t = dt->locate(q, hint);
          if (dt->is_ghost(t)) break;
          hint = t;
          const std::array<std::uint32_t, 3> vid{dt->vertex(t, 0), dt->vertex(t, 1), dt->vertex(t, 2)};
          const std::array<Point2, 3> p{sites[vid[0]], sites[vid[1]], sites[vid[2]]};
          const auto l = barycentric(p[0], p[1], p[2], q);
          const std::array<double, 3> f{values[vid[0]], values[vid[1]], values[vid[2]]};
          if (method == InterpMethod::bilinear) {
            v = l[0] * f[0] + l[1] * f[1] + l[2] * f[2];
          } else {
            v = cubic_patch(p, f, {grad[vid[0]], grad[vid[1]], grad[vid[2]]}, l);
          }
          resolved = true;
          break;
        }
      }
      if (!resolved) v = values[nearest.nearest(q)];
      out[i] = std::clamp(v, 0.0, 1.0);
    }
  }
  return Image(width, height, std::move(out));
}

}  // namespace semsparse
