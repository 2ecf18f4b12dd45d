#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "tropiscope/expr.hpp"

namespace trop {

using Vec = Eigen::VectorXd;

/// Unit vector on S^{n-1}, Euclidean norm 1 within 1e-12.
struct Direction {
  Vec v;

  int n() const { return static_cast<int>(v.size()); }
};

/// Primitive integer vector: gcd of absolute entries is 1. Kept signed, so a
/// slope and its antipode are distinct.
struct RationalSlope {
  std::vector<long long> p;

  friend bool operator==(const RationalSlope& a, const RationalSlope& b) { return a.p == b.p; }
  friend auto operator<=>(const RationalSlope& a, const RationalSlope& b) { return a.p <=> b.p; }
};

/// Divides by the gcd of absolute entries. Throws ZeroVector on the zero vector.
std::vector<long long> primitive_vector(std::vector<long long> v);

/// Coordinatewise log of moduli.
Vec log_map(std::span<const Complex> z);

/// Coordinatewise phases z_j / |z_j|.
std::vector<Complex> arg_map(std::span<const Complex> z);

/// x / (1 + ||x||_2), mapping R^n into the open unit ball.
Vec rho(const Vec& x);

/// Inverse of rho on the open unit ball: y / (1 - ||y||_2).
Vec rho_inverse(const Vec& y);

/// x / ||x||_2. Throws ZeroVector.
Direction direction_of(const Vec& x);

Vec unit_of_slope(const RationalSlope& s);

/// arccos of the clamped dot product, in [0, pi].
double angular_distance(const Direction& a, const Direction& b);

/// The primitive integer vector p with ||p||_inf <= Q minimizing the angle to
/// d, found by exhaustive search; ties broken by smaller ||p||_inf, then
/// lexicographically. Returns nullopt when the best angle exceeds tol
/// (the direction is irrational at this resolution).
std::optional<RationalSlope> rational_slope_of(const Direction& d, long long Q, double tol);

}  // namespace trop
