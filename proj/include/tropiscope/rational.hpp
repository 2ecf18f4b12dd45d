#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <optional>
#include <vector>

#include "tropiscope/errors.hpp"

namespace trop {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;
using RatVec = std::vector<Rational>;
using RatMat = std::vector<RatVec>;

Rational rat_dot(const RatVec& a, const RatVec& b);

int rat_rank(RatMat A);

/// Basis of {x in Q^ncols : A x = 0}.
RatMat rat_nullspace(const RatMat& A, int ncols);

/// One solution of A x = b (free variables set to 0), or nullopt if inconsistent.
std::optional<RatVec> rat_solve(RatMat A, RatVec b);

/// Scales a nonzero rational vector to integer entries with gcd 1; sign kept.
RatVec rat_primitive(const RatVec& v);

/// Continued-fraction approximation with denominator <= max_den.
Rational rationalize(double x, long long max_den);

struct LpResult {
  enum class Status { Optimal, Infeasible, Unbounded };
  Status status = Status::Infeasible;
  Rational objective;
  RatVec x;
};

/// min c.x subject to A x = b, x >= 0. Exact two-phase simplex with Bland's
/// rule, so it always terminates.
LpResult lp_minimize(const RatMat& A, const RatVec& b, const RatVec& c);

/// Feasibility of {x >= 0 : A x = b}.
bool lp_feasible(const RatMat& A, const RatVec& b);

}  // namespace trop
