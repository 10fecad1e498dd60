#include "semsparse/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace semsparse {

// ---------------------------------------------------------------------------
// Predicates. Static error bounds follow Shewchuk's adaptive predicates; the
// fallback is exact 128-bit integer arithmetic whenever the coordinates are
// small integers (pixel centers), and extended precision otherwise.

namespace {

constexpr double kOrientBound = 3.3306690738754716e-16;
constexpr double kIncircleBound = 1.1102230246251577e-15;
constexpr double kIntegralLimit = 16777216.0;  // 2^24

bool small_integral(Point2 p) {
  return p.x == std::floor(p.x) && p.y == std::floor(p.y) && std::fabs(p.x) < kIntegralLimit &&
         std::fabs(p.y) < kIntegralLimit;
}

template <typename T>
int sign_of(T v) {
  return (v > T(0)) - (v < T(0));
}

}  // namespace

int orient2d(Point2 a, Point2 b, Point2 c) {
  const double left = (a.x - c.x) * (b.y - c.y);
  const double right = (a.y - c.y) * (b.x - c.x);
  const double det = left - right;
  const double bound = kOrientBound * (std::fabs(left) + std::fabs(right));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  if (small_integral(a) && small_integral(b) && small_integral(c)) {
    const auto acx = static_cast<std::int64_t>(a.x - c.x), acy = static_cast<std::int64_t>(a.y - c.y);
    const auto bcx = static_cast<std::int64_t>(b.x - c.x), bcy = static_cast<std::int64_t>(b.y - c.y);
    return sign_of(acx * bcy - acy * bcx);
  }
  const long double l = static_cast<long double>(a.x - c.x) * static_cast<long double>(b.y - c.y);
  const long double r = static_cast<long double>(a.y - c.y) * static_cast<long double>(b.x - c.x);
  return sign_of(l - r);
}

int incircle(Point2 a, Point2 b, Point2 c, Point2 d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
  const double permanent = (std::fabs(bdxcdy) + std::fabs(cdxbdy)) * alift +
                           (std::fabs(cdxady) + std::fabs(adxcdy)) * blift +
                           (std::fabs(adxbdy) + std::fabs(bdxady)) * clift;
  const double bound = kIncircleBound * permanent;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  if (small_integral(a) && small_integral(b) && small_integral(c) && small_integral(d)) {
    using i128 = __int128;
    const i128 ax = static_cast<std::int64_t>(adx), ay = static_cast<std::int64_t>(ady);
    const i128 bx = static_cast<std::int64_t>(bdx), by = static_cast<std::int64_t>(bdy);
    const i128 cx = static_cast<std::int64_t>(cdx), cy = static_cast<std::int64_t>(cdy);
    const i128 exact = (ax * ax + ay * ay) * (bx * cy - cx * by) + (bx * bx + by * by) * (cx * ay - ax * cy) +
                       (cx * cx + cy * cy) * (ax * by - bx * ay);
    return sign_of(exact);
  }
  using ld = long double;
  const ld ax = adx, ay = ady, bx = bdx, by = bdy, cx = cdx, cy = cdy;
  const ld exact = (ax * ax + ay * ay) * (bx * cy - cx * by) + (bx * bx + by * by) * (cx * ay - ax * cy) +
                   (cx * cx + cy * cy) * (ax * by - bx * ay);
  return sign_of(exact);
}

Point2 circumcenter(Point2 a, Point2 b, Point2 c) {
  const double bx = b.x - a.x, by = b.y - a.y;
  const double cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  return {a.x + (cy * b2 - by * c2) / d, a.y + (bx * c2 - cx * b2) / d};
}

// ---------------------------------------------------------------------------

Delaunay::Delaunay(std::vector<Point2> sites) : sites_(std::move(sites)) {
  if (sites_.size() < 3) throw std::invalid_argument("Delaunay: need at least 3 sites");
  for (const auto& p : sites_)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::invalid_argument("Delaunay: non-finite site");
  {
    std::vector<Point2> sorted = sites_;
    std::sort(sorted.begin(), sorted.end(), [](Point2 l, Point2 r) { return l.x < r.x || (l.x == r.x && l.y < r.y); });
    for (std::size_t i = 1; i < sorted.size(); ++i)
      if (sorted[i].x == sorted[i - 1].x && sorted[i].y == sorted[i - 1].y)
        throw std::invalid_argument("Delaunay: duplicate sites");
  }

  std::uint32_t third = kNone;
  for (std::uint32_t k = 2; k < sites_.size(); ++k) {
    if (orient2d(sites_[0], sites_[1], sites_[k]) != 0) {
      third = k;
      break;
    }
  }
  if (third == kNone) throw std::invalid_argument("Delaunay: all sites are collinear");

  std::uint32_t a = 0, b = 1, c = third;
  if (orient2d(sites_[a], sites_[b], sites_[c]) < 0) std::swap(b, c);
  const std::uint32_t t0 = new_triangle(a, b, c);
  const std::uint32_t gab = new_triangle(b, a, kGhost);
  const std::uint32_t gbc = new_triangle(c, b, kGhost);
  const std::uint32_t gca = new_triangle(a, c, kGhost);
  // t0 = (a, b, c): opposite a is edge (b, c), etc.
  tris_[t0].n[0] = gbc;
  tris_[t0].n[1] = gca;
  tris_[t0].n[2] = gab;
  // Ghost (u, v, G): n[2] is the finite triangle, n[0] across (v, G), n[1] across (G, u).
  tris_[gab].n[2] = t0;  // (b, a, G)
  tris_[gab].n[0] = gca;  // across (a, G): ghost (a, c, G)
  tris_[gab].n[1] = gbc;  // across (G, b): ghost (c, b, G)
  tris_[gbc].n[2] = t0;  // (c, b, G)
  tris_[gbc].n[0] = gab;  // across (b, G)
  tris_[gbc].n[1] = gca;  // across (G, c)
  tris_[gca].n[2] = t0;  // (a, c, G)
  tris_[gca].n[0] = gbc;  // across (c, G)
  tris_[gca].n[1] = gab;  // across (G, a)

  std::uint32_t hint = t0;
  for (std::uint32_t s = 0; s < sites_.size(); ++s) {
    if (s == a || s == b || s == c) continue;
    insert(s, hint);
  }
  refresh_circumcenters();
}

bool Delaunay::is_ghost(std::uint32_t t) const { return tris_[t].v[2] == kGhost; }

std::vector<std::uint32_t> Delaunay::finite_triangles() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t t = 0; t < tris_.size(); ++t)
    if (tris_[t].alive && !is_ghost(t)) out.push_back(t);
  return out;
}

std::vector<std::vector<std::uint32_t>> Delaunay::vertex_neighbors() const {
  std::vector<std::vector<std::uint32_t>> nb(sites_.size());
  for (std::uint32_t t : finite_triangles()) {
    const auto& v = tris_[t].v;
    for (int i = 0; i < 3; ++i) nb[v[i]].push_back(v[(i + 1) % 3]);
  }
  for (std::uint32_t s = 0; s < nb.size(); ++s) {
    // The hull neighbour that closes a fan is only reached from the other side.
    for (std::uint32_t u : std::vector<std::uint32_t>(nb[s])) nb[u].push_back(s);
  }
  for (auto& list : nb) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return nb;
}

std::uint32_t Delaunay::new_triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
  // Keep the ghost vertex, if any, in slot 2.
  if (a == kGhost) {
    std::tie(a, b, c) = std::make_tuple(b, c, a);
  } else if (b == kGhost) {
    std::tie(a, b, c) = std::make_tuple(c, a, b);
  }
  Tri t{{a, b, c}, {kNone, kNone, kNone}, true};
  if (!free_.empty()) {
    const std::uint32_t id = free_.back();
    free_.pop_back();
    tris_[id] = t;
    return id;
  }
  tris_.push_back(t);
  return static_cast<std::uint32_t>(tris_.size() - 1);
}

bool Delaunay::in_conflict(std::uint32_t t, Point2 p) const {
  const auto& v = tris_[t].v;
  if (v[2] == kGhost) {
    const Point2 u = sites_[v[0]], w = sites_[v[1]];
    const int o = orient2d(u, w, p);
    if (o != 0) return o > 0;
    const double along_u = (p.x - u.x) * (w.x - u.x) + (p.y - u.y) * (w.y - u.y);
    const double along_w = (p.x - w.x) * (u.x - w.x) + (p.y - w.y) * (u.y - w.y);
    return along_u > 0.0 && along_w > 0.0;
  }
  return incircle(sites_[v[0]], sites_[v[1]], sites_[v[2]], p) > 0;
}

void Delaunay::collect_cavity(std::uint32_t start, Point2 p, std::vector<std::uint32_t>& cavity) const {
  cavity.clear();
  cavity.push_back(start);
  for (std::size_t head = 0; head < cavity.size(); ++head) {
    const std::uint32_t t = cavity[head];
    for (int i = 0; i < 3; ++i) {
      const std::uint32_t nb = tris_[t].n[i];
      if (std::find(cavity.begin(), cavity.end(), nb) != cavity.end()) continue;
      if (in_conflict(nb, p)) cavity.push_back(nb);
    }
  }
}

std::uint32_t Delaunay::locate(Point2 q, std::uint32_t hint) const {
  std::uint32_t t = hint;
  if (t == kNone || t >= tris_.size() || !tris_[t].alive) {
    t = 0;
    while (!tris_[t].alive) ++t;
  }
  if (is_ghost(t)) t = tris_[t].n[2];

  const std::size_t max_steps = 4 * tris_.size() + 16;
  int rot = 0;
  for (std::size_t step = 0; step < max_steps; ++step) {
    if (is_ghost(t)) return t;
    const auto& tri = tris_[t];
    bool moved = false;
    for (int k = 0; k < 3; ++k) {
      const int i = (k + rot) % 3;
      const Point2 a = sites_[tri.v[(i + 1) % 3]];
      const Point2 b = sites_[tri.v[(i + 2) % 3]];
      if (orient2d(a, b, q) < 0) {
        t = tri.n[i];
        moved = true;
        break;
      }
    }
    if (!moved) return t;
    rot = (rot + 1) % 3;
  }

  // Walk did not settle (should not happen on a Delaunay mesh): exhaustive search.
  std::uint32_t outside = kNone;
  for (std::uint32_t s = 0; s < tris_.size(); ++s) {
    if (!tris_[s].alive) continue;
    const auto& v = tris_[s].v;
    if (v[2] == kGhost) {
      if (outside == kNone && orient2d(sites_[v[0]], sites_[v[1]], q) > 0) outside = s;
      continue;
    }
    if (orient2d(sites_[v[0]], sites_[v[1]], q) >= 0 && orient2d(sites_[v[1]], sites_[v[2]], q) >= 0 &&
        orient2d(sites_[v[2]], sites_[v[0]], q) >= 0)
      return s;
  }
  if (outside == kNone) throw std::logic_error("Delaunay::locate: point not found");
  return outside;
}

void Delaunay::insert(std::uint32_t site, std::uint32_t& hint) {
  const Point2 p = sites_[site];
  const std::uint32_t start = locate(p, hint);
  std::vector<std::uint32_t> cavity;
  collect_cavity(start, p, cavity);

  struct Boundary {
    std::uint32_t a, b, outside;
  };
  std::vector<Boundary> boundary;
  for (std::uint32_t t : cavity) {
    for (int i = 0; i < 3; ++i) {
      const std::uint32_t nb = tris_[t].n[i];
      if (std::find(cavity.begin(), cavity.end(), nb) != cavity.end()) continue;
      boundary.push_back({tris_[t].v[(i + 1) % 3], tris_[t].v[(i + 2) % 3], nb});
    }
  }
  for (std::uint32_t t : cavity) {
    tris_[t].alive = false;
    free_.push_back(t);
  }

  std::vector<std::uint32_t> created;
  created.reserve(boundary.size());
  for (const auto& e : boundary) created.push_back(new_triangle(e.a, e.b, site));

  auto edge_index = [this](std::uint32_t t, std::uint32_t x, std::uint32_t y) {
    for (int j = 0; j < 3; ++j)
      if (tris_[t].v[(j + 1) % 3] == x && tris_[t].v[(j + 2) % 3] == y) return j;
    return -1;
  };

  for (std::size_t k = 0; k < created.size(); ++k) {
    const std::uint32_t t = created[k];
    const auto& e = boundary[k];
    const int outer = edge_index(t, e.a, e.b);
    tris_[t].n[outer] = e.outside;
    const int back = edge_index(e.outside, e.b, e.a);
    if (back < 0) throw std::logic_error("Delaunay::insert: broken adjacency");
    tris_[e.outside].n[back] = t;
    for (int i = 0; i < 3; ++i) {
      if (i == outer) continue;
      const std::uint32_t x = tris_[t].v[(i + 1) % 3];
      const std::uint32_t y = tris_[t].v[(i + 2) % 3];
      for (std::uint32_t other : created) {
        if (other != t && edge_index(other, y, x) >= 0) {
          tris_[t].n[i] = other;
          break;
        }
      }
    }
  }
  hint = created.front();
}

void Delaunay::refresh_circumcenters() {
  centers_.assign(tris_.size(), Point2{});
  for (std::uint32_t t = 0; t < tris_.size(); ++t) {
    if (!tris_[t].alive || is_ghost(t)) continue;
    const auto& v = tris_[t].v;
    centers_[t] = circumcenter(sites_[v[0]], sites_[v[1]], sites_[v[2]]);
  }
}

Delaunay::QueryKind Delaunay::natural_coordinates(Point2 q, std::vector<NaturalWeight>& weights,
                                                  std::uint32_t& hint) const {
  weights.clear();
  const std::uint32_t t = locate(q, hint);
  if (is_ghost(t)) {
    hint = tris_[t].n[2];
    return QueryKind::outside;
  }
  hint = t;
  const auto& tri = tris_[t];
  for (int i = 0; i < 3; ++i) {
    const Point2 s = sites_[tri.v[i]];
    if (s.x == q.x && s.y == q.y) {
      weights.push_back({tri.v[i], 1.0});
      return QueryKind::site;
    }
  }
  for (int i = 0; i < 3; ++i) {
    const std::uint32_t a = tri.v[(i + 1) % 3], b = tri.v[(i + 2) % 3];
    if (is_ghost(tri.n[i]) && orient2d(sites_[a], sites_[b], q) == 0) {
      const Point2 pa = sites_[a], pb = sites_[b];
      const double len2 = (pb.x - pa.x) * (pb.x - pa.x) + (pb.y - pa.y) * (pb.y - pa.y);
      const double s = ((q.x - pa.x) * (pb.x - pa.x) + (q.y - pa.y) * (pb.y - pa.y)) / len2;
      weights.push_back({a, 1.0 - s});
      weights.push_back({b, s});
      return QueryKind::hull_edge;
    }
  }

  std::vector<std::uint32_t> cavity;
  collect_cavity(t, q, cavity);

  // Boundary edges (a -> b, owning cavity triangle), chained head to tail.
  struct Edge {
    std::uint32_t a, b, tri;
    Point2 center;
  };
  std::vector<Edge> edges;
  for (std::uint32_t c : cavity) {
    if (is_ghost(c)) return QueryKind::outside;
    for (int i = 0; i < 3; ++i) {
      const std::uint32_t nb = tris_[c].n[i];
      if (std::find(cavity.begin(), cavity.end(), nb) != cavity.end()) continue;
      const std::uint32_t a = tris_[c].v[(i + 1) % 3], b = tris_[c].v[(i + 2) % 3];
      edges.push_back({a, b, c, circumcenter(sites_[a], sites_[b], q)});
    }
  }
  auto edge_to = [&](std::uint32_t v) -> const Edge& {
    for (const auto& e : edges)
      if (e.b == v) return e;
    throw std::logic_error("natural_coordinates: open cavity boundary");
  };

  double total = 0.0;
  std::vector<Point2> poly;
  for (const auto& next : edges) {
    const std::uint32_t v = next.a;
    const Edge& prev = edge_to(v);
    poly.clear();
    poly.push_back(next.center);
    std::uint32_t cur = next.tri;
    for (std::size_t guard = 0; guard <= cavity.size(); ++guard) {
      poly.push_back(centers_[cur]);
      if (cur == prev.tri) break;
      const auto& ct = tris_[cur];
      int i = 0;
      while (ct.v[i] != v) ++i;
      cur = ct.n[(i + 1) % 3];  // across (v, v[i+2]): next triangle counter-clockwise around v
    }
    poly.push_back(prev.center);
    double area2 = 0.0;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Point2 p0 = poly[k], p1 = poly[(k + 1) % poly.size()];
      area2 += p0.x * p1.y - p1.x * p0.y;
    }
    const double area = 0.5 * std::fabs(area2);
    weights.push_back({v, area});
    total += area;
  }
  if (!(total > 0.0)) throw std::logic_error("natural_coordinates: degenerate cavity");
  for (auto& w : weights) w.weight /= total;
  return QueryKind::interior;
}

std::vector<NaturalWeight> sibson_coordinates(const std::vector<Point2>& sites, Point2 query) {
  const Delaunay dt(sites);
  std::vector<NaturalWeight> weights;
  std::uint32_t hint = Delaunay::kNone;
  if (dt.natural_coordinates(query, weights, hint) == Delaunay::QueryKind::outside)
    throw std::invalid_argument("sibson_coordinates: query outside the convex hull of the sites");
  return weights;
}

}  // namespace semsparse
