#pragma once

#include <string>
#include <vector>

#include "tropiscope/geometry.hpp"
#include "tropiscope/sampler.hpp"

namespace trop {

struct PhasePoint {
  std::vector<double> theta;  // angles wrapped into [0, 2pi)
  double R = 0;               // radius of the shell the point came from
};

/// Coordinatewise arguments of sample points, carrier of the coamoeba and of
/// phase-limit-set estimates.
struct PhaseCloud {
  int n = 0;
  std::vector<PhasePoint> points;
};

/// Arguments of every sample point whose log-image has norm >= cutoff.
/// Throws BadArgument on empty input or mixed dimensions, EmptyAfterCutoff
/// when no point survives.
PhaseCloud phase_cloud(const std::vector<ShellSample>& samples, double cutoff);

/// Flat torus metric: max over coordinates of the wrapped angular distance.
double torus_distance(const std::vector<double>& a, const std::vector<double>& b);

/// Distance from `theta` to the closed geodesic {theta0 + t*s} in the flat
/// torus metric, via a dense scan of the circle parameter plus local
/// refinement (resolution ~1e-3 rad).
double coset_distance(const std::vector<double>& theta, const std::vector<double>& theta0,
                      const std::vector<long long>& s);

struct GeodesicCircle {
  RationalSlope slope;
  std::vector<double> offset;  // a cloud point on the circle, wrapped angles
  int captured = 0;            // points assigned to this circle
  double coverage = 0;         // captured / cloud size
};

/// Greedy extraction of geodesic circles: scans primitive slopes s with
/// ||s||_inf <= Q (sign-canonical, first nonzero entry positive) for cosets
/// {offset + t*s} that capture at least 5% of the cloud within `tol` in the
/// torus metric, repeatedly removing the largest capture. Each point is
/// assigned to at most one circle; circles come out by decreasing capture.
/// Throws BadArgument on an empty cloud, Q < 1, or a non-positive tol.
std::vector<GeodesicCircle> detect_geodesic_circles(const PhaseCloud& cloud, long long Q,
                                                    double tol);

/// Box-counting dimension of the cloud in the flat torus metric:
/// least-squares slope of log N(eps) vs log(1/eps), where N counts occupied
/// cells of the angle grid of mesh eps. Needs >= 1000 points and >= 3 scales
/// (BadArgument); scales must be positive, finite and distinct
/// (DegenerateScales).
double closure_dimension(const PhaseCloud& cloud, const std::vector<double>& scales);

/// One point per line: shell radius then the angles, as
/// seventeen-significant-digit ASCII decimals.
std::string to_line_format(const PhaseCloud& cloud);

}  // namespace trop
