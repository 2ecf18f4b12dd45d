#include "tropiscope/rational.hpp"

#include <cmath>

namespace trop {

Rational rat_dot(const RatVec& a, const RatVec& b) {
  Rational s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace {

// Reduces A (augmented or not) to row echelon form in place; returns pivot
// column of each eliminated row.
std::vector<int> echelon(RatMat& A, int ncols) {
  std::vector<int> pivot_cols;
  size_t row = 0;
  for (int col = 0; col < ncols && row < A.size(); ++col) {
    size_t pivot = row;
    while (pivot < A.size() && A[pivot][static_cast<size_t>(col)] == 0) ++pivot;
    if (pivot == A.size()) continue;
    std::swap(A[row], A[pivot]);
    Rational lead = A[row][static_cast<size_t>(col)];
    for (auto& x : A[row]) x /= lead;
    for (size_t r = 0; r < A.size(); ++r) {
      if (r == row) continue;
      Rational factor = A[r][static_cast<size_t>(col)];
      if (factor == 0) continue;
      for (size_t c = 0; c < A[r].size(); ++c) A[r][c] -= factor * A[row][c];
    }
    pivot_cols.push_back(col);
    ++row;
  }
  return pivot_cols;
}

}  // namespace

int rat_rank(RatMat A) {
  if (A.empty()) return 0;
  return static_cast<int>(echelon(A, static_cast<int>(A[0].size())).size());
}

RatMat rat_nullspace(const RatMat& A, int ncols) {
  RatMat R = A;
  std::vector<int> pivots = R.empty() ? std::vector<int>{} : echelon(R, ncols);
  std::vector<bool> is_pivot(static_cast<size_t>(ncols), false);
  for (int c : pivots) is_pivot[static_cast<size_t>(c)] = true;
  RatMat basis;
  for (int free = 0; free < ncols; ++free) {
    if (is_pivot[static_cast<size_t>(free)]) continue;
    RatVec v(static_cast<size_t>(ncols), 0);
    v[static_cast<size_t>(free)] = 1;
    for (size_t r = 0; r < pivots.size(); ++r)
      v[static_cast<size_t>(pivots[r])] = -R[r][static_cast<size_t>(free)];
    basis.push_back(std::move(v));
  }
  return basis;
}

std::optional<RatVec> rat_solve(RatMat A, RatVec b) {
  const int ncols = A.empty() ? 0 : static_cast<int>(A[0].size());
  for (size_t r = 0; r < A.size(); ++r) A[r].push_back(b[r]);
  std::vector<int> pivots = echelon(A, ncols);
  for (size_t r = pivots.size(); r < A.size(); ++r)
    if (A[r].back() != 0) return std::nullopt;
  RatVec x(static_cast<size_t>(ncols), 0);
  for (size_t r = 0; r < pivots.size(); ++r) x[static_cast<size_t>(pivots[r])] = A[r].back();
  return x;
}

RatVec rat_primitive(const RatVec& v) {
  BigInt lcm = 1;
  for (const auto& q : v) lcm = boost::multiprecision::lcm(lcm, boost::multiprecision::denominator(q));
  BigInt gcd = 0;
  std::vector<BigInt> scaled(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    scaled[i] = boost::multiprecision::numerator(v[i]) *
                (lcm / boost::multiprecision::denominator(v[i]));
    gcd = boost::multiprecision::gcd(gcd, boost::multiprecision::abs(scaled[i]));
  }
  if (gcd == 0) raise(ErrorCode::ZeroVector, "no primitive form of the zero vector");
  RatVec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = Rational(scaled[i] / gcd);
  return out;
}

Rational rationalize(double x, long long max_den) {
  if (!std::isfinite(x)) raise(ErrorCode::BadArgument, "cannot rationalize a non-finite value");
  bool negative = x < 0.0;
  double a = std::abs(x);
  // convergents p/q of the continued fraction of a
  BigInt p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double frac = a;
  for (int iter = 0; iter < 64; ++iter) {
    double floor_part = std::floor(frac);
    if (floor_part > 9e18) break;
    BigInt t(static_cast<long long>(floor_part));
    BigInt p2 = t * p1 + p0;
    BigInt q2 = t * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    double rem = frac - floor_part;
    if (rem < 1e-18) break;
    frac = 1.0 / rem;
  }
  if (q1 == 0) return 0;
  Rational r(p1, q1);
  return negative ? -r : r;
}

namespace {

struct Tableau {
  RatMat rows;  // m x (width+1), last column is the rhs
  RatVec cost;  // reduced costs, [width] holds -objective
  std::vector<int> basis;
  int width = 0;
};

void price_out(Tableau& T, const RatVec& c) {
  T.cost.assign(static_cast<size_t>(T.width) + 1, 0);
  for (size_t j = 0; j < c.size(); ++j) T.cost[j] = c[j];
  for (size_t i = 0; i < T.rows.size(); ++i) {
    Rational cb = c.size() > static_cast<size_t>(T.basis[i])
                      ? c[static_cast<size_t>(T.basis[i])]
                      : Rational(0);
    if (cb == 0) continue;
    for (size_t j = 0; j <= static_cast<size_t>(T.width); ++j) T.cost[j] -= cb * T.rows[i][j];
  }
}

void pivot(Tableau& T, size_t r, int j) {
  Rational lead = T.rows[r][static_cast<size_t>(j)];
  for (auto& x : T.rows[r]) x /= lead;
  for (size_t i = 0; i < T.rows.size(); ++i) {
    if (i == r) continue;
    Rational f = T.rows[i][static_cast<size_t>(j)];
    if (f == 0) continue;
    for (size_t c = 0; c < T.rows[i].size(); ++c) T.rows[i][c] -= f * T.rows[r][c];
  }
  Rational f = T.cost[static_cast<size_t>(j)];
  if (f != 0)
    for (size_t c = 0; c < T.cost.size(); ++c) T.cost[c] -= f * T.rows[r][c];
  T.basis[r] = j;
}

// Bland's rule iteration over columns [0, limit). Returns false on unbounded.
bool simplex_iterate(Tableau& T, int limit) {
  while (true) {
    int entering = -1;
    for (int j = 0; j < limit; ++j) {
      if (T.cost[static_cast<size_t>(j)] < 0) {
        entering = j;
        break;
      }
    }
    if (entering < 0) return true;
    size_t leaving = T.rows.size();
    Rational best_ratio = 0;
    for (size_t i = 0; i < T.rows.size(); ++i) {
      const Rational& a = T.rows[i][static_cast<size_t>(entering)];
      if (a <= 0) continue;
      Rational ratio = T.rows[i].back() / a;
      if (leaving == T.rows.size() || ratio < best_ratio ||
          (ratio == best_ratio && T.basis[i] < T.basis[leaving])) {
        leaving = i;
        best_ratio = ratio;
      }
    }
    if (leaving == T.rows.size()) return false;
    pivot(T, leaving, entering);
  }
}

}  // namespace

LpResult lp_minimize(const RatMat& A, const RatVec& b, const RatVec& c) {
  const int m = static_cast<int>(A.size());
  const int n = m > 0 ? static_cast<int>(A[0].size()) : static_cast<int>(c.size());

  Tableau T;
  T.width = n + m;
  T.rows.assign(static_cast<size_t>(m), RatVec(static_cast<size_t>(T.width) + 1, 0));
  T.basis.resize(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    bool flip = b[static_cast<size_t>(i)] < 0;
    for (int j = 0; j < n; ++j)
      T.rows[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          flip ? -A[static_cast<size_t>(i)][static_cast<size_t>(j)]
               : A[static_cast<size_t>(i)][static_cast<size_t>(j)];
    T.rows[static_cast<size_t>(i)].back() =
        flip ? -b[static_cast<size_t>(i)] : b[static_cast<size_t>(i)];
    T.rows[static_cast<size_t>(i)][static_cast<size_t>(n + i)] = 1;
    T.basis[static_cast<size_t>(i)] = n + i;
  }

  // Phase 1: minimize the sum of artificials.
  RatVec phase1_cost(static_cast<size_t>(T.width), 0);
  for (int j = n; j < T.width; ++j) phase1_cost[static_cast<size_t>(j)] = 1;
  price_out(T, phase1_cost);
  simplex_iterate(T, T.width);

  LpResult result;
  if (T.cost.back() != 0) {  // -objective != 0 means some artificial stuck positive
    result.status = LpResult::Status::Infeasible;
    return result;
  }

  // Drive remaining artificials out of the basis or drop redundant rows.
  for (size_t i = 0; i < T.rows.size();) {
    if (T.basis[i] < n) {
      ++i;
      continue;
    }
    int j = 0;
    while (j < n && T.rows[i][static_cast<size_t>(j)] == 0) ++j;
    if (j < n) {
      pivot(T, i, j);
      ++i;
    } else {
      T.rows.erase(T.rows.begin() + static_cast<std::ptrdiff_t>(i));
      T.basis.erase(T.basis.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }

  // Phase 2 on the original columns.
  price_out(T, c);
  bool bounded = simplex_iterate(T, n);
  if (!bounded) {
    result.status = LpResult::Status::Unbounded;
    return result;
  }
  result.status = LpResult::Status::Optimal;
  result.x.assign(static_cast<size_t>(n), 0);
  for (size_t i = 0; i < T.rows.size(); ++i)
    result.x[static_cast<size_t>(T.basis[i])] = T.rows[i].back();
  result.objective = -T.cost.back();
  return result;
}

bool lp_feasible(const RatMat& A, const RatVec& b) {
  const int n = A.empty() ? 0 : static_cast<int>(A[0].size());
  RatVec zero(static_cast<size_t>(n), 0);
  return lp_minimize(A, b, zero).status == LpResult::Status::Optimal;
}

}  // namespace trop
