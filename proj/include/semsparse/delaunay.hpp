#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace semsparse {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Sign of the signed area of (a, b, c): +1 counter-clockwise, -1 clockwise, 0 collinear.
// Exact for integral coordinates below 2^24; filtered floating point otherwise.
int orient2d(Point2 a, Point2 b, Point2 c);
// +1 if d lies strictly inside the circle through the counter-clockwise a, b, c.
int incircle(Point2 a, Point2 b, Point2 c, Point2 d);
Point2 circumcenter(Point2 a, Point2 b, Point2 c);

struct NaturalWeight {
  std::uint32_t site = 0;
  double weight = 0.0;
};

/// Incremental Delaunay triangulation (Bowyer-Watson) with a ghost vertex
/// closing the convex hull, so points outside the current hull insert through
/// the same cavity machinery as interior points.
///
/// Finite triangles are stored counter-clockwise. A ghost triangle (u, v, G)
/// has the hull edge u->v with the exterior on its left. neighbor(t, i) is the
/// triangle across the edge opposite vertex i.
///
/// After construction the structure is read-only; locate() and
/// natural_coordinates() may be called concurrently.
class Delaunay {
 public:
  static constexpr std::uint32_t kGhost = std::numeric_limits<std::uint32_t>::max();
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  // Throws std::invalid_argument for < 3 sites, duplicate sites, or all-collinear input.
  explicit Delaunay(std::vector<Point2> sites);

  const std::vector<Point2>& sites() const { return sites_; }
  std::size_t triangle_slots() const { return tris_.size(); }
  bool alive(std::uint32_t t) const { return tris_[t].alive; }
  bool is_ghost(std::uint32_t t) const;
  std::uint32_t vertex(std::uint32_t t, int i) const { return tris_[t].v[i]; }
  std::uint32_t neighbor(std::uint32_t t, int i) const { return tris_[t].n[i]; }
  std::vector<std::uint32_t> finite_triangles() const;

  // Sites sharing a Delaunay edge with each site.
  std::vector<std::vector<std::uint32_t>> vertex_neighbors() const;

  // A finite triangle containing q (closed), or a ghost triangle whose hull
  // edge separates q from the hull. `hint` may be any triangle index.
  std::uint32_t locate(Point2 q, std::uint32_t hint = kNone) const;

  enum class QueryKind { site, interior, hull_edge, outside };

  /// Sibson coordinates of q by virtual insertion: weights are the areas each
  /// natural neighbor's Voronoi cell would lose to q, normalized to sum 1.
  /// Queries on a hull edge get the limiting linear weights along that edge;
  /// queries strictly outside the hull return QueryKind::outside with no weights.
  QueryKind natural_coordinates(Point2 q, std::vector<NaturalWeight>& weights, std::uint32_t& hint) const;

 private:
  struct Tri {
    std::uint32_t v[3];
    std::uint32_t n[3];
    bool alive = true;
  };

  bool in_conflict(std::uint32_t t, Point2 p) const;
  void collect_cavity(std::uint32_t start, Point2 p, std::vector<std::uint32_t>& cavity) const;
  void insert(std::uint32_t site, std::uint32_t& hint);
  std::uint32_t new_triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c);
  void refresh_circumcenters();

  std::vector<Point2> sites_;
  std::vector<Tri> tris_;
  std::vector<std::uint32_t> free_;
  std::vector<Point2> centers_;  // per triangle slot; finite triangles only
};

// Sibson coordinates of `query` with respect to `sites`.
// Throws for degenerate site sets and for queries strictly outside the hull.
std::vector<NaturalWeight> sibson_coordinates(const std::vector<Point2>& sites, Point2 query);

}  // namespace semsparse
