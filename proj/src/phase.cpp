#include "tropiscope/phase.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>

#include "tropiscope/errors.hpp"

namespace trop {

namespace {

constexpr double kTau = 2 * std::numbers::pi;
constexpr double kCoverageMin = 0.05;  // a circle must capture 5% of the cloud

double wrap_angle(double a) {
  double w = std::fmod(a, kTau);
  if (w < 0) w += kTau;
  if (w >= kTau) w = 0;
  return w + 0.0;
}

double circ_dist(double a, double b) { return std::abs(std::remainder(a - b, kTau)); }

/// All primitive integer vectors with ||s||_inf <= Q whose first nonzero
/// entry is positive (s and -s trace the same circle).
std::vector<std::vector<long long>> candidate_slopes(int n, long long Q) {
  std::vector<std::vector<long long>> out;
  std::vector<long long> cur(static_cast<size_t>(n), -Q);
  while (true) {
    long long g = 0;
    int first = -1;
    for (int j = 0; j < n; ++j) {
      g = std::gcd(g, std::abs(cur[static_cast<size_t>(j)]));
      if (first < 0 && cur[static_cast<size_t>(j)] != 0) first = j;
    }
    if (g == 1 && cur[static_cast<size_t>(first)] > 0) out.push_back(cur);
    int j = n - 1;
    while (j >= 0 && cur[static_cast<size_t>(j)] == Q) cur[static_cast<size_t>(j--)] = -Q;
    if (j < 0) break;
    ++cur[static_cast<size_t>(j)];
  }
  return out;
}

/// Center of the densest circular window of half-width T over the values u;
/// returns the captured count through `hits`.
double densest_mode(std::vector<double> u, double T, int* hits) {
  std::sort(u.begin(), u.end());
  size_t m = u.size();
  size_t best = 0, besti = 0;
  size_t j = 0;
  for (size_t i = 0; i < m; ++i) {
    while (j < i + m) {
      double uj = j < m ? u[j] : u[j - m] + kTau;
      if (uj <= u[i] + 2 * T + 1e-9) ++j;
      else break;
    }
    if (j - i > best) {
      best = j - i;
      besti = i;
    }
  }
  if (hits) *hits = static_cast<int>(std::min(best, m));
  return wrap_angle(u[besti] + T);
}

struct Capture {
  std::vector<size_t> idx;
  std::vector<double> anchor;
};

/// Largest sub-cluster of the remaining points within tol of some coset of
/// slope s: nested mode finding on the integer forms vanishing on s narrows
/// the field, then every survivor is checked against the coset through the
/// best-centered candidate.
std::optional<Capture> capture_for_slope(const PhaseCloud& cloud, const std::vector<size_t>& rem,
                                         const std::vector<long long>& s, double tol,
                                         size_t need) {
  int n = cloud.n;
  int k = 0;
  for (int j = 1; j < n; ++j)
    if (std::abs(s[static_cast<size_t>(j)]) > std::abs(s[static_cast<size_t>(k)])) k = j;

  std::vector<size_t> cand = rem;
  std::vector<double> score(cloud.points.size(), 0.0);
  for (int j = 0; j < n; ++j) {
    if (j == k) continue;
    // integer form w = s_k e_j - s_j e_k vanishes on s
    double wk = static_cast<double>(-s[static_cast<size_t>(j)]);
    double wj = static_cast<double>(s[static_cast<size_t>(k)]);
    double l1 = std::abs(wj) + std::abs(wk);
    double T = tol * l1;
    std::vector<double> u;
    u.reserve(cand.size());
    for (size_t i : cand) {
      const auto& th = cloud.points[i].theta;
      u.push_back(wrap_angle(wj * th[static_cast<size_t>(j)] + wk * th[static_cast<size_t>(k)]));
    }
    double c = densest_mode(u, T, nullptr);
    std::vector<size_t> keep;
    for (size_t t = 0; t < cand.size(); ++t) {
      double d = circ_dist(u[t], c);
      if (d <= T + 1e-9) {
        score[cand[t]] = std::max(score[cand[t]], d / l1);
        keep.push_back(cand[t]);
      }
    }
    cand.swap(keep);
    if (cand.size() < need) return std::nullopt;
  }

  size_t anchor = cand.front();
  for (size_t i : cand)
    if (score[i] < score[anchor]) anchor = i;

  Capture cap;
  cap.anchor = cloud.points[anchor].theta;
  for (size_t i : cand)
    if (coset_distance(cloud.points[i].theta, cap.anchor, s) <= tol) cap.idx.push_back(i);
  if (cap.idx.size() < need) return std::nullopt;
  return cap;
}

/// Least-squares slope of log N against log(1/eps).
double loglog_slope(const std::vector<double>& eps, const std::vector<double>& counts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < eps.size(); ++i) {
    double x = std::log(1.0 / eps[i]);
    double y = std::log(counts[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double k = static_cast<double>(eps.size());
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

}  // namespace

PhaseCloud phase_cloud(const std::vector<ShellSample>& samples, double cutoff) {
  if (samples.empty()) raise(ErrorCode::BadArgument, "phase_cloud: no samples");
  PhaseCloud cloud;
  for (const auto& s : samples) {
    for (const auto& pt : s.points) {
      Vec x = log_map(pt.z);
      if (!x.allFinite() || x.norm() < cutoff) continue;
      PhasePoint p;
      p.R = s.R;
      p.theta.reserve(pt.z.size());
      for (const Complex& c : pt.z) p.theta.push_back(wrap_angle(std::arg(c)));
      if (cloud.points.empty()) {
        cloud.n = static_cast<int>(p.theta.size());
      } else if (static_cast<int>(p.theta.size()) != cloud.n) {
        raise(ErrorCode::BadArgument, "phase_cloud: mixed dimensions");
      }
      cloud.points.push_back(std::move(p));
    }
  }
  if (cloud.points.empty()) raise(ErrorCode::EmptyAfterCutoff, "phase_cloud: nothing survives");
  return cloud;
}

double torus_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    raise(ErrorCode::BadArgument, "torus_distance: dimension mismatch");
  double d = 0;
  for (size_t j = 0; j < a.size(); ++j) d = std::max(d, circ_dist(a[j], b[j]));
  return d;
}

double coset_distance(const std::vector<double>& theta, const std::vector<double>& theta0,
                      const std::vector<long long>& s) {
  size_t n = theta.size();
  if (theta0.size() != n || s.size() != n || n == 0)
    raise(ErrorCode::BadArgument, "coset_distance: dimension mismatch");
  long long smax = 0;
  for (long long v : s) smax = std::max(smax, std::abs(v));
  if (smax == 0) return torus_distance(theta, theta0);

  auto at = [&](double t) {
    double d = 0;
    for (size_t j = 0; j < n; ++j)
      d = std::max(d, circ_dist(theta[j], theta0[j] + t * static_cast<double>(s[j])));
    return d;
  };
  int M = 256 * static_cast<int>(smax);
  double best = std::numeric_limits<double>::infinity();
  double bt = 0;
  for (int g = 0; g < M; ++g) {
    double t = kTau * g / M;
    double d = at(t);
    if (d < best) {
      best = d;
      bt = t;
    }
  }
  double h = kTau / M;
  for (int g = -64; g <= 64; ++g) best = std::min(best, at(bt + h * g / 64.0));
  return best;
}

std::vector<GeodesicCircle> detect_geodesic_circles(const PhaseCloud& cloud, long long Q,
                                                    double tol) {
  if (cloud.points.empty()) raise(ErrorCode::BadArgument, "detect_geodesic_circles: empty cloud");
  if (Q < 1) raise(ErrorCode::BadArgument, "detect_geodesic_circles: Q must be >= 1");
  if (!(tol > 0) || !std::isfinite(tol))
    raise(ErrorCode::BadArgument, "detect_geodesic_circles: tol must be positive");

  auto slopes = candidate_slopes(cloud.n, Q);
  size_t total = cloud.points.size();
  size_t need = std::max<size_t>(1, static_cast<size_t>(std::ceil(kCoverageMin * total)));
  std::vector<size_t> rem(total);
  std::iota(rem.begin(), rem.end(), 0);

  std::vector<GeodesicCircle> out;
  while (rem.size() >= need) {
    std::optional<Capture> best;
    const std::vector<long long>* best_s = nullptr;
    for (const auto& s : slopes) {
      auto cap = capture_for_slope(cloud, rem, s, tol, need);
      if (cap && (!best || cap->idx.size() > best->idx.size())) {
        best = std::move(cap);
        best_s = &s;
      }
    }
    if (!best) break;
    GeodesicCircle gc;
    gc.slope = RationalSlope{*best_s};
    gc.offset = best->anchor;
    gc.captured = static_cast<int>(best->idx.size());
    gc.coverage = static_cast<double>(best->idx.size()) / static_cast<double>(total);
    out.push_back(std::move(gc));
    std::vector<size_t> next;
    std::set_difference(rem.begin(), rem.end(), best->idx.begin(), best->idx.end(),
                        std::back_inserter(next));
    rem.swap(next);
  }
  return out;
}

double closure_dimension(const PhaseCloud& cloud, const std::vector<double>& scales) {
  if (cloud.points.size() < 1000)
    raise(ErrorCode::BadArgument, "closure_dimension: needs at least 1000 points");
  if (scales.size() < 3)
    raise(ErrorCode::BadArgument, "closure_dimension: needs at least 3 scales");
  std::vector<double> eps(scales);
  std::sort(eps.begin(), eps.end(), std::greater<>());
  for (size_t i = 0; i < eps.size(); ++i) {
    bool bad = !(eps[i] > 0) || !std::isfinite(eps[i]);
    if (bad || (i + 1 < eps.size() && eps[i] == eps[i + 1])) {
      raise(ErrorCode::DegenerateScales, "scales must be positive, finite and distinct");
    }
  }

  std::vector<double> counts;
  counts.reserve(eps.size());
  for (double e : eps) {
    std::set<std::vector<long long>> cells;
    for (const auto& p : cloud.points) {
      std::vector<long long> key(p.theta.size());
      for (size_t j = 0; j < p.theta.size(); ++j)
        key[j] = static_cast<long long>(std::floor(p.theta[j] / e));
      cells.insert(std::move(key));
    }
    counts.push_back(static_cast<double>(cells.size()));
  }
  return loglog_slope(eps, counts);
}

std::string to_line_format(const PhaseCloud& cloud) {
  std::string out;
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g%c", v, sep);
    out += buf;
  };
  for (const auto& p : cloud.points) {
    put(p.R, ' ');
    for (size_t j = 0; j < p.theta.size(); ++j)
      put(p.theta[j], j + 1 == p.theta.size() ? '\n' : ' ');
  }
  return out;
}

}  // namespace trop
