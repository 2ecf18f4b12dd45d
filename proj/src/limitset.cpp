#include "tropiscope/limitset.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "tropiscope/errors.hpp"

namespace trop {

namespace {

constexpr double kEpsPoint = 2e-2;    // angular radius of a vertex blob
constexpr double kTolArc = 1e-2;      // allowed deviation from a great circle
constexpr double kEndpointTol = 5e-2; // slope search tolerance at arc endpoints
constexpr double kAgreeTol = 2e-2;    // vertex agreement with the exact oracle
constexpr double kEpsFloor = 1e-4;
constexpr long long kSlopeQ = 12;
constexpr int kMinComponent = 10;
constexpr int kBoxMinPoints = 100;

bool lex_less(const Vec& a, const Vec& b) {
  for (int i = 0; i < a.size() && i < b.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return a.size() < b.size();
}

struct UnionFind {
  std::vector<int> parent;

  explicit UnionFind(int m) : parent(m) { std::iota(parent.begin(), parent.end(), 0); }

  int find(int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }

  void unite(int a, int b) { parent[find(a)] = find(b); }
};

Direction mean_direction(const std::vector<Direction>& dirs) {
  Vec sum = Vec::Zero(dirs.front().v.size());
  for (const auto& d : dirs) sum += d.v;
  if (sum.norm() < 1e-9) return dirs.front();
  return direction_of(sum);
}

double angular_diameter(const std::vector<Direction>& dirs) {
  double worst = 0;
  for (size_t i = 0; i < dirs.size(); ++i) {
    for (size_t j = i + 1; j < dirs.size(); ++j) {
      worst = std::max(worst, angular_distance(dirs[i], dirs[j]));
    }
  }
  return worst;
}

void attach_slope(SphericalCell& cell, const Direction& d, double tol) {
  auto p = rational_slope_of(d, kSlopeQ, tol);
  if (p) {
    cell.slopes.push_back(*p);
    cell.generators.push_back(*p);
  } else {
    cell.rational = false;
  }
}

/// Number of occupied cells of a geodesic grid with mesh `eps`. The sphere is
/// charted by its cube faces (gnomonic projection, bounded metric distortion);
/// each chart carries a square lattice anchored at the chart's own point
/// cloud, so counts do not pick up spurious cells from points straddling an
/// arbitrary grid origin.
int grid_count(const std::vector<Direction>& dirs, double eps) {
  std::map<int, std::vector<std::vector<double>>> charts;
  for (const auto& d : dirs) {
    int n = static_cast<int>(d.v.size());
    int axis = 0;
    for (int j = 1; j < n; ++j)
      if (std::abs(d.v(j)) > std::abs(d.v(axis))) axis = j;
    std::vector<double> u;
    u.reserve(static_cast<size_t>(n) - 1);
    for (int j = 0; j < n; ++j)
      if (j != axis) u.push_back(d.v(j) / std::abs(d.v(axis)));
    charts[2 * axis + (d.v(axis) < 0 ? 1 : 0)].push_back(std::move(u));
  }
  int total = 0;
  for (auto& [id, pts] : charts) {
    size_t dim = pts.front().size();
    std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
    for (const auto& u : pts)
      for (size_t j = 0; j < dim; ++j) lo[j] = std::min(lo[j], u[j]);
    std::set<std::vector<long long>> cells;
    for (const auto& u : pts) {
      std::vector<long long> key(dim);
      for (size_t j = 0; j < dim; ++j)
        key[j] = static_cast<long long>(std::floor((u[j] - lo[j]) / eps));
      cells.insert(std::move(key));
    }
    total += static_cast<int>(cells.size());
  }
  return total;
}

double distance_to_component(const Direction& d, const DirectionComponent& comp, double stop) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : comp.dirs) {
    best = std::min(best, angular_distance(d, c));
    if (best <= stop) break;
  }
  return best;
}

// Upper-tail quantile of the nearest-neighbor gaps. The linking radius has
// to clear the tail, not the typical gap: spacings along a sampled curve
// fluctuate exponentially, and a radius tied to the median shatters the
// curve into fragments no matter how many points are drawn.
double nn_gap_quantile(const std::vector<WeightedDirection>& entries, double q) {
  std::vector<double> gaps;
  gaps.reserve(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < entries.size(); ++j) {
      if (j == i) continue;
      best = std::min(best, angular_distance(entries[i].d, entries[j].d));
    }
    gaps.push_back(best);
  }
  size_t rank = std::min(gaps.size() - 1, static_cast<size_t>(q * gaps.size()));
  std::nth_element(gaps.begin(), gaps.begin() + rank, gaps.end());
  return gaps[rank];
}

double hausdorff(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  double worst = 0;
  auto one_sided = [&](const std::vector<Vec>& from, const std::vector<Vec>& to) {
    for (const auto& x : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : to) {
        best = std::min(best, angular_distance(Direction{x}, Direction{y}));
      }
      worst = std::max(worst, best);
    }
  };
  one_sided(a, b);
  one_sided(b, a);
  return worst;
}

std::vector<Vec> vertex_points(const SphericalComplex& S) {
  std::vector<Vec> out;
  for (const auto& cell : S.cells) {
    if (cell.kind != SphericalCell::Kind::Vertex) continue;
    if (!cell.samples.empty()) {
      out.push_back(cell.samples.front());
    } else if (!cell.slopes.empty()) {
      out.push_back(unit_of_slope(cell.slopes.front()));
    }
  }
  return out;
}

}  // namespace

DirectionCloud direction_cloud(const std::vector<ShellSample>& samples, double cutoff) {
  if (samples.empty()) raise(ErrorCode::BadArgument, "direction_cloud: no shells");
  if (!(cutoff >= 0) || !std::isfinite(cutoff)) {
    raise(ErrorCode::BadArgument, "direction_cloud: cutoff must be finite and nonnegative");
  }
  DirectionCloud cloud;
  cloud.seed = samples.front().seed;
  for (const auto& shell : samples) {
    for (const auto& pt : shell.points) {
      Vec x = log_map(pt.z);
      if (cloud.n == 0) cloud.n = static_cast<int>(x.size());
      if (x.norm() < cutoff) continue;
      cloud.entries.push_back({direction_of(x), shell.R, 1.0});
    }
  }
  if (cloud.entries.empty()) raise(ErrorCode::EmptyAfterCutoff, "no log-image reaches the cutoff");
  return cloud;
}

std::vector<DirectionComponent> cluster_directions(const DirectionCloud& cloud, double eps) {
  if (cloud.entries.empty()) raise(ErrorCode::BadArgument, "cluster_directions: empty cloud");
  if (!(eps >= 0) || !std::isfinite(eps)) {
    raise(ErrorCode::BadArgument, "cluster_directions: eps must be finite and nonnegative");
  }
  std::vector<int> order(cloud.entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ea = cloud.entries[a];
    const auto& eb = cloud.entries[b];
    if (ea.d.v != eb.d.v) return lex_less(ea.d.v, eb.d.v);
    return ea.R < eb.R;
  });

  int m = static_cast<int>(order.size());
  UnionFind uf(m);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      if (angular_distance(cloud.entries[order[i]].d, cloud.entries[order[j]].d) <= eps) {
        uf.unite(i, j);
      }
    }
  }

  std::vector<int> root_slot(m, -1);
  std::vector<DirectionComponent> comps;
  for (int i = 0; i < m; ++i) {
    int r = uf.find(i);
    if (root_slot[r] < 0) {
      root_slot[r] = static_cast<int>(comps.size());
      comps.push_back({cloud.n, {}, {}});
    }
    auto& comp = comps[root_slot[r]];
    comp.dirs.push_back(cloud.entries[order[i]].d);
    comp.shell_R.push_back(cloud.entries[order[i]].R);
  }
  return comps;
}

ClassifiedCell classify_component(const DirectionComponent& comp) {
  if (comp.dirs.empty()) raise(ErrorCode::BadArgument, "classify_component: empty component");
  int m = static_cast<int>(comp.dirs.size());
  int n = comp.dirs.front().n();

  ClassifiedCell out;
  SphericalCell& cell = out.cell;

  Direction mean = mean_direction(comp.dirs);
  if (m < kMinComponent) {
    cell.kind = SphericalCell::Kind::Vertex;
    cell.dim = 0;
    cell.samples = {mean.v};
    cell.low_confidence = true;
    attach_slope(cell, mean, kEpsPoint);
    out.dim_estimate = 0;
    return out;
  }

  double diameter = angular_diameter(comp.dirs);
  if (diameter <= 2 * kEpsPoint) {
    cell.kind = SphericalCell::Kind::Vertex;
    cell.dim = 0;
    cell.samples = {mean.v};
    attach_slope(cell, mean, kEpsPoint);
    out.dim_estimate = 0;
    return out;
  }

  Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(n, n);
  for (const auto& d : comp.dirs) moment += d.v * d.v.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(moment);
  Vec u1 = eig.eigenvectors().col(n - 1);
  Vec u2 = n >= 2 ? Vec(eig.eigenvectors().col(n - 2)) : Vec();

  double off_plane = 0;
  if (n >= 2) {
    for (const auto& d : comp.dirs) {
      double a = d.v.dot(u1), b = d.v.dot(u2);
      double r2 = std::max(0.0, 1.0 - a * a - b * b);
      off_plane = std::max(off_plane, std::asin(std::min(1.0, std::sqrt(r2))));
    }
  }

  if (n >= 2 && off_plane <= kTolArc) {
    std::vector<std::pair<double, int>> angles(m);
    for (int i = 0; i < m; ++i) {
      angles[i] = {std::atan2(comp.dirs[i].v.dot(u2), comp.dirs[i].v.dot(u1)), i};
    }
    std::sort(angles.begin(), angles.end());
    int gap_at = m - 1;
    double max_gap = angles.front().first + 2 * std::numbers::pi - angles.back().first;
    for (int i = 0; i + 1 < m; ++i) {
      double g = angles[i + 1].first - angles[i].first;
      if (g > max_gap) {
        max_gap = g;
        gap_at = i;
      }
    }
    const Direction& start = comp.dirs[angles[(gap_at + 1) % m].second];
    const Direction& finish = comp.dirs[angles[gap_at].second];
    double span = 2 * std::numbers::pi - max_gap;
    double target = angles[(gap_at + 1) % m].first + span / 2;
    int mid_idx = angles[(gap_at + 1) % m].second;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      double a = angles[i].first;
      while (a < angles[(gap_at + 1) % m].first) a += 2 * std::numbers::pi;
      if (std::abs(a - target) < best) {
        best = std::abs(a - target);
        mid_idx = angles[i].second;
      }
    }

    cell.kind = SphericalCell::Kind::Arc;
    cell.dim = 1;
    cell.samples = {start.v, finish.v, comp.dirs[mid_idx].v};
    attach_slope(cell, start, kEndpointTol);
    attach_slope(cell, finish, kEndpointTol);
    out.dim_estimate = 1;
    return out;
  }

  cell.kind = SphericalCell::Kind::Cell;
  cell.rational = false;
  cell.samples = {mean.v, comp.dirs.front().v, comp.dirs.back().v};
  if (m >= kBoxMinPoints) {
    // The top scale has to sit well below the component's own extent or the
    // coarse count is boundary dominated and the slope flattens; the bottom
    // scale has to stay above the sample spacing or the fine count saturates
    // at the point count. Start fine and coarsen while saturated.
    double top = std::max(1e-3, diameter / 6);
    for (int i = 0; i < 4 && top < diameter; ++i) {
      if (grid_count(comp.dirs, top / 4) <= m / 2) break;
      top *= 2;
    }
    out.dim_estimate = box_counting_dim(comp.dirs, {top, top / 2, top / 4});
    cell.dim = static_cast<int>(std::clamp<long>(std::lround(out.dim_estimate), 1, n - 1));
  } else {
    cell.low_confidence = true;
    out.dim_estimate = std::min(2, n - 1);
    cell.dim = std::min(2, n - 1);
  }
  return out;
}

double box_counting_dim(const std::vector<Direction>& points, const std::vector<double>& scales) {
  if (points.size() < static_cast<size_t>(kBoxMinPoints)) {
    raise(ErrorCode::BadArgument, "box_counting_dim: needs at least 100 points");
  }
  if (scales.size() < 3) raise(ErrorCode::BadArgument, "box_counting_dim: needs at least 3 scales");
  std::vector<double> eps(scales);
  std::sort(eps.begin(), eps.end(), std::greater<>());
  for (size_t i = 0; i < eps.size(); ++i) {
    bool bad = !(eps[i] > 0) || !std::isfinite(eps[i]);
    if (bad || (i + 1 < eps.size() && eps[i] == eps[i + 1])) {
      raise(ErrorCode::DegenerateScales, "scales must be positive, finite and distinct");
    }
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double e : eps) {
    double x = std::log(1.0 / e);
    double y = std::log(static_cast<double>(grid_count(points, e)));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double k = static_cast<double>(eps.size());
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

LimitSetEstimate estimate_limit_set(const VarietySpec& spec, const EstimateConfig& config) {
  if (config.count < 1) raise(ErrorCode::BadArgument, "estimate_limit_set: count must be positive");
  LimitSetEstimate est;
  est.radii = shell_schedule(config.rmin, config.rmax, config.shells);
  est.points_per_shell = config.count;
  auto samples =
      sample_schedule(spec, est.radii, config.count, config.seed, std::max(1, config.workers));

  double cutoff = config.cutoff;
  if (cutoff < 0) {
    size_t m = est.radii.size();
    cutoff = m >= 2 ? std::sqrt(est.radii[m - 2] * est.radii[m - 1]) : 0.0;
  }
  est.cloud = direction_cloud(samples, cutoff);

  est.eps = config.eps;
  if (est.eps <= 0)
    est.eps = std::max(kEpsFloor, 5 * nn_gap_quantile(est.cloud.entries, 0.95));

  auto comps = cluster_directions(est.cloud, est.eps);
  std::vector<int> comp_order(comps.size());
  std::iota(comp_order.begin(), comp_order.end(), 0);
  std::vector<ClassifiedCell> classified(comps.size());
  for (size_t i = 0; i < comps.size(); ++i) classified[i] = classify_component(comps[i]);
  std::sort(comp_order.begin(), comp_order.end(), [&](int a, int b) {
    const auto& ca = classified[a].cell;
    const auto& cb = classified[b].cell;
    if (ca.dim != cb.dim) return ca.dim < cb.dim;
    return lex_less(ca.samples.front(), cb.samples.front());
  });

  est.complex.n = est.cloud.n;
  double reach = std::max(2 * est.eps, 3 * kEpsPoint);
  size_t first_checked = samples.size() > 3 ? samples.size() - 3 : 0;
  for (int idx : comp_order) {
    est.complex.cells.push_back(classified[idx].cell);
    est.cell_dims.push_back(classified[idx].dim_estimate);
    bool persists = true;
    for (size_t s = first_checked; s < samples.size() && persists; ++s) {
      bool seen = false;
      for (const auto& pt : samples[s].points) {
        Vec x = log_map(pt.z);
        if (x.norm() < 1e-12) continue;
        if (distance_to_component(direction_of(x), comps[idx], reach) <= reach) {
          seen = true;
          break;
        }
      }
      persists = seen;
    }
    est.persistent.push_back(persists);
  }

  if (spec.mode == VarietySpec::Mode::Implicit && spec.equations.size() == 1) {
    try {
      est.oracle = tropical_limit_set(to_laurent(spec.equations.front()));
      est.oracle_checked = true;
      est.oracle_agrees =
          hausdorff(vertex_points(est.complex), vertex_points(est.oracle)) <= kAgreeTol;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotPolynomial) throw;
    }
  }
  return est;
}

const char* decision_name(Decision d) {
  switch (d) {
    case Decision::AlgebraicConsistent: return "algebraic-consistent";
    case Decision::NotAlgebraic: return "not-algebraic";
    case Decision::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Verdict algebraicity_verdict(const LimitSetEstimate& estimate, int k) {
  int n = estimate.complex.n;
  if (k < 1 || k >= n) raise(ErrorCode::BadArgument, "algebraicity_verdict: need 1 <= k < n");
  if (estimate.radii.size() < 3) {
    raise(ErrorCode::BadArgument, "algebraicity_verdict: need at least 3 shells");
  }
  const auto& cells = estimate.complex.cells;
  if (cells.empty() || cells.size() != estimate.cell_dims.size() ||
      cells.size() != estimate.persistent.size()) {
    raise(ErrorCode::BadArgument, "algebraicity_verdict: inconsistent estimate");
  }

  Verdict v;
  v.cells = estimate.complex;
  v.cell_dims = estimate.cell_dims;
  v.balance = balance_check(estimate.complex);
  v.homogeneous = complex_dim_and_homogeneity(estimate.complex).second;
  v.shells = static_cast<int>(estimate.radii.size());
  v.points_per_shell = estimate.points_per_shell;
  v.eps = estimate.eps;
  v.eps_point = kEpsPoint;
  v.tol_arc = kTolArc;
  v.oracle_checked = estimate.oracle_checked;
  v.oracle_agrees = estimate.oracle_agrees;
  v.dim_estimate = *std::max_element(estimate.cell_dims.begin(), estimate.cell_dims.end());

  bool any_shaky = false;
  bool too_big = false;
  bool irrational_vertex = false;
  bool ambiguous_dim = false;
  bool all_polyhedral = true;
  for (size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = cells[i];
    bool confident = !cell.low_confidence && estimate.persistent[i];
    double d = estimate.cell_dims[i];
    if (!confident) any_shaky = true;
    if (confident && cell.kind != SphericalCell::Kind::Vertex && d >= k - 0.25) too_big = true;
    if (confident && cell.kind == SphericalCell::Kind::Vertex && !cell.rational) {
      irrational_vertex = true;
    }
    if (cell.kind == SphericalCell::Kind::Cell) {
      all_polyhedral = false;
      if (std::abs(d - std::floor(d) - 0.5) <= 0.25) ambiguous_dim = true;
    }
    if (!cell.rational) all_polyhedral = false;
  }

  if (too_big || irrational_vertex) {
    v.decision = Decision::NotAlgebraic;
  } else if (any_shaky || ambiguous_dim) {
    v.decision = Decision::Inconclusive;
  } else if (all_polyhedral && std::lround(v.dim_estimate) == k - 1) {
    v.decision = Decision::AlgebraicConsistent;
  } else {
    v.decision = Decision::Inconclusive;
  }
  return v;
}

std::string to_json_string(const Verdict& v) {
  nlohmann::ordered_json root;
  root["decision"] = decision_name(v.decision);
  root["dim_estimate"] = v.dim_estimate;
  root["cells"] = nlohmann::ordered_json::array();
  for (size_t i = 0; i < v.cells.cells.size(); ++i) {
    const auto& cell = v.cells.cells[i];
    nlohmann::ordered_json c;
    c["kind"] = cell_kind_name(cell.kind);
    c["dim"] = cell.dim;
    c["dim_estimate"] = v.cell_dims[i];
    c["slopes"] = nlohmann::ordered_json::array();
    for (const auto& s : cell.slopes) c["slopes"].push_back(s.p);
    c["samples"] = nlohmann::ordered_json::array();
    for (const auto& x : cell.samples) {
      std::vector<double> coords(x.data(), x.data() + x.size());
      c["samples"].push_back(coords);
    }
    c["rational"] = cell.rational;
    c["low_confidence"] = cell.low_confidence;
    root["cells"].push_back(std::move(c));
  }
  nlohmann::ordered_json bal;
  bal["balanced"] = v.balance.balanced;
  bal["span_dim"] = v.balance.span_dim;
  bal["exact"] = v.balance.exact;
  bal["hyperplane_tests"] = v.balance.hyperplane_tests;
  bal["random_tests"] = v.balance.random_tests;
  bal["witnesses"] = nlohmann::ordered_json::array();
  for (const auto& w : v.balance.witnesses) {
    std::vector<double> coords(w.data(), w.data() + w.size());
    bal["witnesses"].push_back(coords);
  }
  root["balance"] = std::move(bal);
  nlohmann::ordered_json diag;
  diag["homogeneous"] = v.homogeneous;
  diag["shells"] = v.shells;
  diag["points_per_shell"] = v.points_per_shell;
  diag["eps"] = v.eps;
  diag["eps_point"] = v.eps_point;
  diag["tol_arc"] = v.tol_arc;
  diag["oracle_checked"] = v.oracle_checked;
  diag["oracle_agrees"] = v.oracle_agrees;
  root["diagnostics"] = std::move(diag);
  return root.dump(2);
}

NewtonCertificate certify_newton_bound(const Expression& f, const SphericalComplex& estimate,
                                       long long D) {
  if (!f.valid()) raise(ErrorCode::BadArgument, "certify_newton_bound: empty expression");
  if (D < 1) raise(ErrorCode::BadArgument, "certify_newton_bound: degree bound must be positive");
  if (estimate.cells.empty()) {
    raise(ErrorCode::BadArgument, "certify_newton_bound: empty estimate");
  }
  NewtonCertificate cert;
  for (const auto& cell : estimate.cells) {
    if (cell.kind != SphericalCell::Kind::Vertex || !cell.rational || cell.slopes.empty()) {
      raise(ErrorCode::BadArgument, "certify_newton_bound: estimate must be rational vertices");
    }
    cert.slopes.push_back(cell.slopes.front());
  }

  auto base = truncate_series(f, D);
  auto refined = truncate_series(f, 2 * D);
  cert.tail_nonzero = base.tail_nonzero || refined.tail_nonzero;

  std::vector<std::pair<RationalSlope, double>> verts;
  for (const auto& u : cert.slopes) {
    double h = -std::numeric_limits<double>::infinity();
    for (const auto& [alpha, c] : base.poly.terms) {
      double dot = 0;
      for (size_t j = 0; j < alpha.size(); ++j) dot += static_cast<double>(u.p[j]) * alpha[j];
      h = std::max(h, dot);
    }
    if (!std::isfinite(h)) raise(ErrorCode::EmptySupport, "truncation has no terms");
    cert.offsets.push_back(h);
    verts.push_back({u, -h});
    cert.violations.push_back(support_halfspace_violations(refined, u, -h));
    if (!cert.violations.back().empty()) cert.refuted = true;
  }
  cert.bound = newton_bound_from_vertices(f.arity(), verts);
  cert.certified = !cert.refuted && !cert.tail_nonzero && cert.bound.compact_within_span;
  return cert;
}

}  // namespace trop
