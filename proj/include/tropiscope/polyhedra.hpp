#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tropiscope/expr.hpp"
#include "tropiscope/geometry.hpp"
#include "tropiscope/rational.hpp"

namespace trop {

/// {x : <q,x> <= a}
struct RationalHalfspace {
  RatVec q;
  Rational a;
};

/// H-representation plus the generator (V-) representation computed by exact
/// double description: P = conv(points) + cone(rays) + span(lines).
struct RationalConvexPolyhedron {
  int n = 0;
  std::vector<RationalHalfspace> halfspaces;
  bool empty = false;
  RatMat points;
  RatMat rays;   // primitive integer
  RatMat lines;  // primitive integer
};

/// Exact vertex enumeration; n <= 6, at most 64 halfspaces.
RationalConvexPolyhedron halfspace_intersection(int n, const std::vector<RationalHalfspace>& hs);

/// True iff the recession cone is {0}.
bool is_compact(const RationalConvexPolyhedron& Q);

/// Recovers facet inequalities (and affine-hull equalities as halfspace pairs)
/// from the generator representation.
std::vector<RationalHalfspace> hrep_from_vrep(const RationalConvexPolyhedron& Q);

struct RationalPolytope {
  int n = 0;
  RatMat vertices;  // lexicographically sorted
};

int polytope_dim(const RationalPolytope& P);

/// Convex hull of supp(p), exact. Throws EmptySupport.
RationalPolytope newton_polytope(const LaurentPolynomial& p);

struct Cone {
  RatMat rays;   // primitive integer generators of the pointed part
  RatMat lines;  // lineality basis, primitive integer
  int dim = 0;
  int face_dim = 0;  // dimension of the polytope face this cone is normal to
};

struct Fan {
  int n = 0;
  std::vector<Cone> cones;
  std::vector<std::vector<int>> faces_of;  // faces_of[i]: cones that are faces of cone i
};

/// Complete outer-normal fan of a polytope, one cone per nonempty face.
Fan normal_fan(const RationalPolytope& P);

struct SphericalCell {
  enum class Kind { Vertex, Arc, Cell };
  Kind kind = Kind::Vertex;
  int dim = 0;
  std::vector<RationalSlope> slopes;  // vertex: the slope; arc: endpoint slopes; cell: generators
  std::vector<Vec> samples;           // unit representatives, endpoints first
  std::vector<RationalSlope> generators;  // integer vectors positively spanning the cell's cone
  bool rational = true;
  bool low_confidence = false;
};

struct SphericalComplex {
  int n = 0;
  std::vector<SphericalCell> cells;
};

const char* cell_kind_name(SphericalCell::Kind kind);

/// {cells:[{kind, dim, slopes, samples}]} with stable key order.
std::string to_json_string(const SphericalComplex& S);

/// Codimension >= 1 skeleton of the normal fan of the Newton polytope,
/// intersected with the unit sphere. Throws EmptySupport / MonomialInput.
SphericalComplex tropical_limit_set(const LaurentPolynomial& p);

/// (max cell dimension, all maximal cells share it). A vertex counts as
/// non-maximal when it appears among a higher cell's boundary slopes.
std::pair<int, bool> complex_dim_and_homogeneity(const SphericalComplex& S);

struct BalanceReport {
  bool balanced = false;
  int span_dim = 0;
  bool exact = false;  // all cells carried exact slope data
  int hyperplane_tests = 0;
  int random_tests = 0;
  std::vector<Vec> witnesses;  // directions whose open hemisphere misses the set
};

/// Whether 0 lies in the relative interior of conv(S) within span(S): the set
/// meets both open hemispheres of every direction in its span. The LP verdict
/// is cross-checked by hemisphere scanning over hyperplane normals spanned by
/// cell generators plus 10^4 seeded random directions.
BalanceReport balance_check(const SphericalComplex& S);

struct NewtonBound {
  RationalConvexPolyhedron body;
  bool compact_within_span = false;
  int span_dim = 0;
};

/// Intersection of {alpha : <u,alpha> <= -b} over the given vertex data;
/// compactness is judged within the linear span of the slopes.
NewtonBound newton_bound_from_vertices(int n,
                                       const std::vector<std::pair<RationalSlope, double>>& verts);

/// All exponents alpha in supp(s) with b + <u,alpha> > 0.
std::vector<ExponentVec> support_halfspace_violations(const SeriesTruncation& s,
                                                      const RationalSlope& u, double b);

}  // namespace trop
