#include "tropiscope/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace trop {

std::vector<long long> primitive_vector(std::vector<long long> v) {
  long long g = 0;
  for (long long x : v) g = std::gcd(g, std::llabs(x));
  if (g == 0) raise(ErrorCode::ZeroVector, "no primitive form of the zero vector");
  if (g > 1)
    for (long long& x : v) x /= g;
  return v;
}

Vec log_map(std::span<const Complex> z) {
  Vec x(static_cast<Eigen::Index>(z.size()));
  for (size_t i = 0; i < z.size(); ++i) x[static_cast<Eigen::Index>(i)] = std::log(std::abs(z[i]));
  return x;
}

std::vector<Complex> arg_map(std::span<const Complex> z) {
  std::vector<Complex> phases(z.size());
  for (size_t i = 0; i < z.size(); ++i) phases[i] = z[i] / std::abs(z[i]);
  return phases;
}

Vec rho(const Vec& x) { return x / (1.0 + x.norm()); }

Vec rho_inverse(const Vec& y) {
  double s = y.norm();
  if (s >= 1.0) raise(ErrorCode::BadArgument, "rho_inverse needs a point of the open unit ball");
  return y / (1.0 - s);
}

Direction direction_of(const Vec& x) {
  double norm = x.norm();
  if (norm == 0.0) raise(ErrorCode::ZeroVector, "direction of the zero vector");
  return Direction{x / norm};
}

Vec unit_of_slope(const RationalSlope& s) {
  Vec v(static_cast<Eigen::Index>(s.p.size()));
  for (size_t i = 0; i < s.p.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = static_cast<double>(s.p[i]);
  return v / v.norm();
}

double angular_distance(const Direction& a, const Direction& b) {
  double dot = a.v.dot(b.v);
  return std::acos(std::clamp(dot, -1.0, 1.0));
}

namespace {

bool is_primitive(const std::vector<long long>& v) {
  long long g = 0;
  for (long long x : v) g = std::gcd(g, std::llabs(x));
  return g == 1;
}

long long inf_norm(const std::vector<long long>& v) {
  long long m = 0;
  for (long long x : v) m = std::max(m, std::llabs(x));
  return m;
}

}  // namespace

std::optional<RationalSlope> rational_slope_of(const Direction& d, long long Q, double tol) {
  if (Q < 1 || tol <= 0.0) raise(ErrorCode::BadArgument, "rational_slope_of needs Q >= 1, tol > 0");
  const int n = d.n();
  std::vector<long long> p(static_cast<size_t>(n), -Q);
  std::vector<long long> best;
  double best_angle = 0.0;
  long long best_inf = 0;
  bool have_best = false;
  while (true) {
    if (is_primitive(p)) {
      double dot = 0.0, sq = 0.0;
      for (int i = 0; i < n; ++i) {
        double c = static_cast<double>(p[static_cast<size_t>(i)]);
        dot += c * d.v[i];
        sq += c * c;
      }
      double angle = std::acos(std::clamp(dot / std::sqrt(sq), -1.0, 1.0));
      long long pinf = inf_norm(p);
      if (!have_best || angle < best_angle ||
          (angle == best_angle && pinf < best_inf)) {
        best = p;
        best_angle = angle;
        best_inf = pinf;
        have_best = true;
      }
    }
    int i = n - 1;
    while (i >= 0 && p[static_cast<size_t>(i)] == Q) {
      p[static_cast<size_t>(i)] = -Q;
      --i;
    }
    if (i < 0) break;
    ++p[static_cast<size_t>(i)];
  }
  if (!have_best || best_angle > tol) return std::nullopt;
  return RationalSlope{std::move(best)};
}

}  // namespace trop
