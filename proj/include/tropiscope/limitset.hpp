#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tropiscope/geometry.hpp"
#include "tropiscope/polyhedra.hpp"
#include "tropiscope/sampler.hpp"

namespace trop {

struct WeightedDirection {
  Direction d;
  double R = 0;       // radius of the shell the point came from
  double weight = 1;  // > 0
};

/// Normalized log-images of sample points, kept as unit directions.
struct DirectionCloud {
  int n = 0;
  uint64_t seed = 0;  // seed of the sampling run that produced the cloud
  std::vector<WeightedDirection> entries;
};

/// Directions of all sample points whose log-image has norm >= cutoff.
/// Throws EmptyAfterCutoff when nothing survives, BadArgument on empty input
/// or a negative cutoff.
DirectionCloud direction_cloud(const std::vector<ShellSample>& samples, double cutoff);

struct DirectionComponent {
  int n = 0;
  std::vector<Direction> dirs;  // lexicographically sorted
  std::vector<double> shell_R;  // matching shell radius per direction
};

/// Connected components of the graph linking entries at angular distance
/// <= eps, via union-find on the lexicographically sorted entries. Components
/// are ordered by their first direction. eps == 0 keeps every distinct
/// direction on its own.
std::vector<DirectionComponent> cluster_directions(const DirectionCloud& cloud, double eps);

struct ClassifiedCell {
  SphericalCell cell;
  double dim_estimate = 0;  // 0 vertex, 1 arc, box-counting estimate otherwise
};

/// Classifies one component as a vertex (angular diameter <= 4e-2), an arc
/// (within 1e-2 rad of a fitted great circle; endpoint slopes searched up to
/// denominator 12 at tolerance 5e-2), or a higher-dimensional cell whose
/// dimension is box-counted. Components with fewer than 10 points become
/// low-confidence vertices.
ClassifiedCell classify_component(const DirectionComponent& comp);

/// Least-squares slope of log N(eps) against log(1/eps), where N counts the
/// occupied cells of a geodesic grid (gnomonic cube-face charts, lattice
/// anchored per chart). Needs >= 100 points and >= 3 scales (BadArgument);
/// scales must be positive, finite and distinct (DegenerateScales).
double box_counting_dim(const std::vector<Direction>& points, const std::vector<double>& scales);

struct EstimateConfig {
  double rmin = 5;
  double rmax = 100;
  int shells = 3;
  int count = 400;     // points per shell
  uint64_t seed = 1;
  int workers = 1;
  double cutoff = -1;  // < 0: keep the outermost shell only
  double eps = -1;     // <= 0: 5x the 95th percentile nearest-neighbour gap
};

struct LimitSetEstimate {
  SphericalComplex complex;        // classified cells, vertices first
  std::vector<double> cell_dims;   // real dimension estimate per cell
  std::vector<bool> persistent;    // cell seen on each of the last 3 shells
  DirectionCloud cloud;
  double eps = 0;                  // clustering radius actually used
  std::vector<double> radii;
  int points_per_shell = 0;
  bool oracle_checked = false;     // exact comparison ran (polynomial input)
  bool oracle_agrees = false;      // vertex sets within 2e-2 of each other
  SphericalComplex oracle;
};

/// Samples the variety on a geometric shell schedule, clusters the outermost
/// directions and classifies each component. For a single polynomial equation
/// the exact Newton-polytope limit set is attached and compared.
LimitSetEstimate estimate_limit_set(const VarietySpec& spec, const EstimateConfig& config);

enum class Decision { AlgebraicConsistent, NotAlgebraic, Inconclusive };

const char* decision_name(Decision d);

struct Verdict {
  Decision decision = Decision::Inconclusive;
  double dim_estimate = 0;  // largest cell dimension estimate
  SphericalComplex cells;
  std::vector<double> cell_dims;
  BalanceReport balance;
  bool homogeneous = false;
  int shells = 0;
  int points_per_shell = 0;
  double eps = 0;
  double eps_point = 0;
  double tol_arc = 0;
  bool oracle_checked = false;
  bool oracle_agrees = false;
};

/// Decides whether the estimate looks like the limit set of a k-dimensional
/// algebraic variety: AlgebraicConsistent needs dimension k-1 with every cell
/// a rational vertex or arc; NotAlgebraic needs a confident cell of dimension
/// >= k or a persistent vertex with no rational slope; anything shakier is
/// Inconclusive. Requires >= 3 shells and 1 <= k < n.
Verdict algebraicity_verdict(const LimitSetEstimate& estimate, int k);

/// {decision, dim_estimate, cells, balance, diagnostics} with stable keys.
std::string to_json_string(const Verdict& v);

struct NewtonCertificate {
  NewtonBound bound;                 // intersection of the vertex half-spaces
  std::vector<RationalSlope> slopes;
  std::vector<double> offsets;       // support function value per slope at D
  std::vector<std::vector<ExponentVec>> violations;  // at degree 2D
  bool tail_nonzero = false;         // truncation dropped nonzero terms
  bool refuted = false;              // some refined exponent escapes a bound
  bool certified = false;            // compact within span, nothing escapes
};

/// Bounds the Newton polytope of an entire f by the half-spaces dual to the
/// estimated vertex slopes, with offsets read off the degree-D truncation,
/// then rechecks the truncation at degree 2D. Estimate must consist of
/// rational vertex cells only.
NewtonCertificate certify_newton_bound(const Expression& f, const SphericalComplex& estimate,
                                       long long D);

}  // namespace trop
