#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tropiscope/expr.hpp"
#include "tropiscope/geometry.hpp"

namespace trop {

/// A subvariety of the complex torus, given either implicitly by equations or
/// as the image of a parametrization.
struct VarietySpec {
  enum class Mode { Implicit, Parametrized };

  Mode mode = Mode::Implicit;
  std::vector<Expression> equations;  // Implicit: arity-n defining equations
  std::vector<Expression> map;        // Parametrized: n components of arity p
  int n = 0;                          // ambient torus dimension
  int params = 0;                     // Parametrized only: parameter count p
  int expected_dim = 0;               // declared complex dimension
};

/// Implicit spec with 1 <= equations.size() <= n-1, each of arity n.
/// The declared dimension is n minus the number of equations.
VarietySpec implicit_spec(std::vector<Expression> equations, int n);

/// Parametrized spec: map must have exactly n components sharing one arity p
/// with 1 <= p < n. The declared dimension is p.
VarietySpec parametrized_spec(std::vector<Expression> map, int n);

struct SamplePoint {
  std::vector<Complex> z;
  double residual = 0.0;
  std::vector<Complex> params;  // parameter values when the point came from a map
};

/// Points of the variety with ||Log z|| within `band` of the shell radius.
struct ShellSample {
  double R = 0.0;
  double band = 0.0;
  uint64_t seed = 0;
  std::vector<SamplePoint> points;
};

/// Shell half-thickness max(0.5, 0.02 R).
double shell_band(double R);

/// Geometric progression of m radii from rmin to rmax inclusive.
/// Requires 0 < rmin < rmax and m >= 2; throws BadBounds otherwise.
std::vector<double> shell_schedule(double rmin, double rmax, int m);

/// Samples `count` points of a parametrized variety on the shell of radius R
/// by drawing parameter log-moduli from an adaptively grown box and steering
/// the first parameter's phase onto the shell. Residuals are 0 by
/// construction. Deterministic for fixed (spec, R, count, seed); the worker
/// count only parallelizes. Throws ShellUnreachable when the budget runs out
/// before `count` points are found.
ShellSample sample_parametrized(const VarietySpec& spec, double R, int count,
                                uint64_t seed, int workers = 1);

/// Samples `count` points of the hypersurface f = 0 on the shell of radius R:
/// draw the log-moduli of all but one coordinate uniformly on the shell's
/// projection and the free phases uniformly, then solve for the remaining
/// coordinate (companion-matrix roots for polynomial f, Newton from a grid of
/// starts otherwise). Every kept point has ||Log z|| in the band and
/// |f(z)| <= 1e-9 (1 + local scale of f). Deterministic for fixed seed.
/// Throws ShellUnreachable when nothing is found, RootFindingBudgetExceeded
/// when the budget runs out with a partial sample.
ShellSample sample_hypersurface(const Expression& f, double R, int count,
                                uint64_t seed, int workers = 1);

/// Dispatches on the spec mode. Implicit specs must have a single equation.
ShellSample sample_shell(const VarietySpec& spec, double R, int count,
                         uint64_t seed, int workers = 1);

/// One sample per radius, with per-shell seeds derived from (seed, index).
std::vector<ShellSample> sample_schedule(const VarietySpec& spec,
                                         const std::vector<double>& radii,
                                         int count, uint64_t seed,
                                         int workers = 1);

/// One point per line: R, re and im of each coordinate, residual, as
/// seventeen-significant-digit ASCII decimals in storage order.
std::string to_line_format(const ShellSample& sample);

/// Rank statistics of the differential of Log restricted to the variety.
struct GenericityReport {
  int expected_rank = 0;         // min(2 expected_dim, n)
  std::vector<int> ranks;        // per inspected point
  double maximal_fraction = 0.0; // share of inspected points at expected_rank
};

/// Measures, at up to 200 sample points, the rank of d(Log restricted to V):
/// a finite-difference tangent basis of V is pushed through the logarithmic
/// differential and the real rank read off the singular values (threshold
/// 1e-8 of the largest). Throws BadArgument on an empty sample.
GenericityReport genericity_probe(const VarietySpec& spec, const ShellSample& sample);

struct EndsReport {
  int ends = 0;                   // cluster count on the last shell
  bool stable = false;            // last three shells agree
  std::vector<int> per_shell;     // cluster count per shell, in input order
  std::vector<Vec> representatives;  // last-shell cluster means in log space
};

/// Counts the ends of the variety over the direction x: per shell, the sample
/// points whose log-direction lies within eps of x are projected onto the
/// hyperplane orthogonal to x and single-linkage clustered with threshold
/// min(0.02 R, 0.5). Requires at least 3 shells; throws NoPointsNearDirection
/// when any of the last three shells has no points in the cone.
EndsReport ends_at_direction(const std::vector<ShellSample>& samples,
                             const Direction& x, double eps);

}  // namespace trop
