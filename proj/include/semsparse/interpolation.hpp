#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "semsparse/image.hpp"
#include "semsparse/parallel.hpp"

namespace semsparse {

enum class InterpMethod { nearest, bilinear, bicubic, natural_neighbor };

// Config names: "nearest" | "bilinear" | "bicubic" | "nn" (also "natural_neighbor").
std::optional<InterpMethod> parse_interp_method(std::string_view name);
std::string to_string(InterpMethod method);

/// Fills the unsampled pixels of a sparse scan; sampled pixels are copied.
///
/// All methods except `nearest` work on the Delaunay triangulation of the
/// sampled pixel centers: `bilinear` is piecewise linear, `bicubic` uses cubic
/// Bezier triangles built from least-squares vertex gradients, and
/// `natural_neighbor` uses Sibson coordinates. Pixels outside the convex hull
/// of the samples take the nearest sample (lowest row-major index on ties), as
/// does every pixel when the samples cannot be triangulated.
Image interpolate(const SparseImage& sparse, InterpMethod method, Exec exec = Exec::parallel);

}  // namespace semsparse
