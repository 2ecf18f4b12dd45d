#include "tropiscope/polyhedra.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>

#include <json.hpp>

#include "tropiscope/rng.hpp"

namespace trop {

namespace {

constexpr size_t kMaxHalfspaces = 64;

RatMat identity_basis(int dim) {
  RatMat basis(static_cast<size_t>(dim), RatVec(static_cast<size_t>(dim), 0));
  for (int i = 0; i < dim; ++i) basis[static_cast<size_t>(i)][static_cast<size_t>(i)] = 1;
  return basis;
}

struct GeneratorSet {
  RatMat rays;
  RatMat lines;
};

uint64_t zero_bits(const RatMat& constraints, size_t upto, const RatVec& r) {
  uint64_t bits = 0;
  for (size_t i = 0; i < upto; ++i)
    if (rat_dot(constraints[i], r) == 0) bits |= uint64_t{1} << i;
  return bits;
}

/// Double description: generators of {y : <c,y> <= 0 for every constraint c}.
/// Lineality is pivoted away constraint by constraint; the pointed part grows
/// by the adjacency-filtered combination rule.
GeneratorSet dd_cone(int dim, const RatMat& constraints) {
  if (constraints.size() > kMaxHalfspaces)
    raise(ErrorCode::BadArgument, "double description capped at 64 constraints");
  GeneratorSet g;
  g.lines = identity_basis(dim);

  for (size_t k = 0; k < constraints.size(); ++k) {
    const RatVec& c = constraints[k];

    int pivot = -1;
    for (size_t i = 0; i < g.lines.size(); ++i) {
      if (rat_dot(c, g.lines[i]) != 0) {
        pivot = static_cast<int>(i);
        break;
      }
    }
    if (pivot >= 0) {
      RatVec b0 = g.lines[static_cast<size_t>(pivot)];
      Rational cb0 = rat_dot(c, b0);
      RatMat new_lines;
      for (size_t i = 0; i < g.lines.size(); ++i) {
        if (static_cast<int>(i) == pivot) continue;
        Rational ci = rat_dot(c, g.lines[i]);
        RatVec adjusted = g.lines[i];
        if (ci != 0)
          for (size_t j = 0; j < adjusted.size(); ++j) adjusted[j] -= ci / cb0 * b0[j];
        new_lines.push_back(rat_primitive(adjusted));
      }
      g.lines = std::move(new_lines);
      RatMat new_rays;
      for (const auto& r : g.rays) {
        Rational cr = rat_dot(c, r);
        RatVec adjusted = r;
        if (cr != 0)
          for (size_t j = 0; j < adjusted.size(); ++j) adjusted[j] -= cr / cb0 * b0[j];
        bool zero = true;
        for (const auto& x : adjusted) zero = zero && x == 0;
        if (!zero) new_rays.push_back(rat_primitive(adjusted));
      }
      RatVec r0 = b0;
      if (cb0 > 0)
        for (auto& x : r0) x = -x;
      new_rays.push_back(rat_primitive(r0));
      std::sort(new_rays.begin(), new_rays.end());
      new_rays.erase(std::unique(new_rays.begin(), new_rays.end()), new_rays.end());
      g.rays = std::move(new_rays);
    } else {
      std::vector<Rational> vals(g.rays.size());
      bool any_positive = false;
      for (size_t i = 0; i < g.rays.size(); ++i) {
        vals[i] = rat_dot(c, g.rays[i]);
        any_positive = any_positive || vals[i] > 0;
      }
      if (!any_positive) continue;

      std::vector<uint64_t> zsets(g.rays.size());
      for (size_t i = 0; i < g.rays.size(); ++i) zsets[i] = zero_bits(constraints, k, g.rays[i]);

      RatMat new_rays;
      for (size_t i = 0; i < g.rays.size(); ++i)
        if (vals[i] <= 0) new_rays.push_back(g.rays[i]);
      for (size_t p = 0; p < g.rays.size(); ++p) {
        if (vals[p] <= 0) continue;
        for (size_t m = 0; m < g.rays.size(); ++m) {
          if (vals[m] >= 0) continue;
          uint64_t common = zsets[p] & zsets[m];
          bool adjacent = true;
          for (size_t other = 0; other < g.rays.size(); ++other) {
            if (other == p || other == m) continue;
            if ((common & ~zsets[other]) == 0) {
              adjacent = false;
              break;
            }
          }
          if (!adjacent) continue;
          RatVec w(g.rays[p].size());
          for (size_t j = 0; j < w.size(); ++j)
            w[j] = vals[p] * g.rays[m][j] - vals[m] * g.rays[p][j];
          new_rays.push_back(rat_primitive(w));
        }
      }
      std::sort(new_rays.begin(), new_rays.end());
      new_rays.erase(std::unique(new_rays.begin(), new_rays.end()), new_rays.end());
      g.rays = std::move(new_rays);
    }
  }
  std::sort(g.rays.begin(), g.rays.end());
  std::sort(g.lines.begin(), g.lines.end());
  return g;
}

struct ConeHRep {
  RatMat inequalities;  // <c,y> <= 0, primitive c
  RatMat equalities;    // <c,y> = 0, basis of span^perp
};

/// Brute-force facet enumeration of cone(rays) + span(lines).
ConeHRep cone_facets(int dim, const RatMat& rays, const RatMat& lines) {
  RatMat all = rays;
  all.insert(all.end(), lines.begin(), lines.end());
  ConeHRep out;
  out.equalities = rat_nullspace(all, dim);
  const int s = dim - static_cast<int>(out.equalities.size());
  const int l = lines.empty() ? 0 : rat_rank(lines);
  const int pick = s - 1 - l;
  if (pick < 0) return out;  // the cone is a subspace

  std::set<RatVec> seen;
  std::vector<size_t> subset(static_cast<size_t>(pick));
  std::function<void(size_t, size_t)> enumerate = [&](size_t idx, size_t start) {
    if (idx == subset.size()) {
      RatMat M = lines;
      for (size_t j : subset) M.push_back(rays[j]);
      for (const auto& e : out.equalities) M.push_back(e);
      RatMat kernel = rat_nullspace(M, dim);
      if (kernel.size() != 1) return;
      RatVec c = rat_primitive(kernel[0]);
      bool has_pos = false, has_neg = false;
      for (const auto& r : rays) {
        Rational d = rat_dot(c, r);
        has_pos = has_pos || d > 0;
        has_neg = has_neg || d < 0;
      }
      if (has_pos && has_neg) return;
      if (has_pos)
        for (auto& x : c) x = -x;
      if (seen.insert(c).second) out.inequalities.push_back(c);
      return;
    }
    for (size_t j = start; j < rays.size(); ++j) {
      subset[idx] = j;
      enumerate(idx + 1, j + 1);
    }
  };
  enumerate(0, 0);
  std::sort(out.inequalities.begin(), out.inequalities.end());
  return out;
}

long long to_ll(const Rational& q) {
  return boost::multiprecision::numerator(q).convert_to<long long>();
}

RationalSlope slope_of(const RatVec& v) {
  RationalSlope s;
  s.p.reserve(v.size());
  for (const auto& x : v) s.p.push_back(to_ll(x));
  return s;
}

RatVec slope_vec(const RationalSlope& s) {
  RatVec v(s.p.size());
  for (size_t i = 0; i < s.p.size(); ++i) v[i] = s.p[i];
  return v;
}

Vec to_unit(const RatVec& v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i)
    x[static_cast<Eigen::Index>(i)] = static_cast<double>(v[i].convert_to<double>());
  return x / x.norm();
}

}  // namespace

RationalConvexPolyhedron halfspace_intersection(int n,
                                                const std::vector<RationalHalfspace>& hs) {
  if (n > 6) raise(ErrorCode::DimensionTooLarge, "exact enumeration is limited to n <= 6");
  if (n < 1) raise(ErrorCode::BadArgument, "dimension must be >= 1");
  RatMat constraints;
  RatVec t_row(static_cast<size_t>(n) + 1, 0);
  t_row.back() = -1;  // homogenization variable stays nonnegative
  constraints.push_back(std::move(t_row));
  for (const auto& h : hs) {
    RatVec row(h.q);
    row.push_back(-h.a);
    constraints.push_back(std::move(row));
  }
  GeneratorSet g = dd_cone(n + 1, constraints);

  RationalConvexPolyhedron Q;
  Q.n = n;
  Q.halfspaces = hs;
  for (const auto& l : g.lines) {
    RatVec x(l.begin(), l.end() - 1);
    Q.lines.push_back(rat_primitive(x));
  }
  for (const auto& r : g.rays) {
    Rational t = r.back();
    RatVec x(r.begin(), r.end() - 1);
    if (t == 0) {
      Q.rays.push_back(rat_primitive(x));
    } else {
      for (auto& xi : x) xi /= t;
      Q.points.push_back(std::move(x));
    }
  }
  Q.empty = Q.points.empty();
  if (Q.empty) {
    Q.rays.clear();
    Q.lines.clear();
  }
  std::sort(Q.points.begin(), Q.points.end());
  std::sort(Q.rays.begin(), Q.rays.end());
  std::sort(Q.lines.begin(), Q.lines.end());
  return Q;
}

bool is_compact(const RationalConvexPolyhedron& Q) { return Q.rays.empty() && Q.lines.empty(); }

std::vector<RationalHalfspace> hrep_from_vrep(const RationalConvexPolyhedron& Q) {
  if (Q.empty) raise(ErrorCode::BadArgument, "no H-representation of the empty set");
  RatMat gens;
  for (const auto& p : Q.points) {
    RatVec y(p);
    y.push_back(1);
    gens.push_back(std::move(y));
  }
  for (const auto& r : Q.rays) {
    RatVec y(r);
    y.push_back(0);
    gens.push_back(std::move(y));
  }
  RatMat lines;
  for (const auto& l : Q.lines) {
    RatVec y(l);
    y.push_back(0);
    lines.push_back(std::move(y));
  }
  ConeHRep cone = cone_facets(Q.n + 1, gens, lines);
  std::vector<RationalHalfspace> out;
  auto push = [&](const RatVec& c, bool flip) {
    RatVec q(c.begin(), c.end() - 1);
    bool zero = true;
    for (const auto& x : q) zero = zero && x == 0;
    if (zero) return;  // pure homogenization facet, no content in x-space
    Rational a = -c.back();
    if (flip) {
      for (auto& x : q) x = -x;
      a = -a;
    }
    out.push_back(RationalHalfspace{std::move(q), a});
  };
  for (const auto& c : cone.inequalities) push(c, false);
  for (const auto& e : cone.equalities) {
    push(e, false);
    push(e, true);
  }
  return out;
}

int polytope_dim(const RationalPolytope& P) {
  if (P.vertices.empty()) return -1;
  RatMat diffs;
  for (size_t i = 1; i < P.vertices.size(); ++i) {
    RatVec d(P.vertices[i]);
    for (size_t j = 0; j < d.size(); ++j) d[j] -= P.vertices[0][j];
    diffs.push_back(std::move(d));
  }
  return diffs.empty() ? 0 : rat_rank(diffs);
}

RationalPolytope newton_polytope(const LaurentPolynomial& p) {
  if (p.is_zero()) raise(ErrorCode::EmptySupport, "newton polytope of the zero polynomial");
  const int n = p.arity;
  RatMat pts;
  for (const auto& [alpha, c] : p.terms) {
    RatVec v(alpha.size());
    for (size_t i = 0; i < alpha.size(); ++i) v[i] = alpha[i];
    pts.push_back(std::move(v));
  }
  RationalPolytope P;
  P.n = n;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (pts.size() == 1) {
      P.vertices.push_back(pts[i]);
      break;
    }
    // vertex iff not a convex combination of the other support points
    RatMat A(static_cast<size_t>(n) + 1);
    for (int r = 0; r <= n; ++r) A[static_cast<size_t>(r)].reserve(pts.size() - 1);
    for (size_t j = 0; j < pts.size(); ++j) {
      if (j == i) continue;
      for (int r = 0; r < n; ++r) A[static_cast<size_t>(r)].push_back(pts[j][static_cast<size_t>(r)]);
      A[static_cast<size_t>(n)].push_back(1);
    }
    RatVec b(pts[i]);
    b.push_back(1);
    if (!lp_feasible(A, b)) P.vertices.push_back(pts[i]);
  }
  std::sort(P.vertices.begin(), P.vertices.end());
  return P;
}

Fan normal_fan(const RationalPolytope& P) {
  if (P.vertices.empty()) raise(ErrorCode::EmptySupport, "normal fan of the empty polytope");
  const int n = P.n;
  const size_t m = P.vertices.size();

  RatMat gens;
  for (const auto& v : P.vertices) {
    RatVec y(v);
    y.push_back(1);
    gens.push_back(std::move(y));
  }
  ConeHRep hull = cone_facets(n + 1, gens, {});

  // lineality of every normal cone: the orthogonal complement of aff(P)
  RatMat perp;
  for (const auto& e : hull.equalities) {
    RatVec q(e.begin(), e.end() - 1);
    bool zero = true;
    for (const auto& x : q) zero = zero && x == 0;
    if (!zero) perp.push_back(rat_primitive(q));
  }

  // facet -> incident vertex set, facet -> its normal direction in x-space
  std::vector<std::vector<size_t>> facet_members;
  RatMat facet_normals;
  for (const auto& c : hull.inequalities) {
    RatVec q(c.begin(), c.end() - 1);
    bool q_zero = true;
    for (const auto& x : q) q_zero = q_zero && x == 0;
    if (q_zero) continue;  // homogenization artifact (single-point hull)
    std::vector<size_t> members;
    for (size_t i = 0; i < m; ++i)
      if (rat_dot(c, gens[i]) == 0) members.push_back(i);
    if (members.empty()) continue;  // supports only the apex, not a face of P
    facet_members.push_back(std::move(members));
    facet_normals.push_back(rat_primitive(q));
  }

  // face lattice: every face is an intersection of facet vertex sets
  std::vector<size_t> everything(m);
  for (size_t i = 0; i < m; ++i) everything[i] = i;
  std::set<std::vector<size_t>> faces;
  faces.insert(everything);
  for (const auto& f : facet_members) faces.insert(f);
  bool grew = true;
  while (grew) {
    grew = false;
    std::vector<std::vector<size_t>> snapshot(faces.begin(), faces.end());
    for (size_t a = 0; a < snapshot.size(); ++a) {
      for (size_t b = a + 1; b < snapshot.size(); ++b) {
        std::vector<size_t> inter;
        std::set_intersection(snapshot[a].begin(), snapshot[a].end(), snapshot[b].begin(),
                              snapshot[b].end(), std::back_inserter(inter));
        if (!inter.empty() && faces.insert(inter).second) grew = true;
      }
    }
  }

  auto face_dim = [&](const std::vector<size_t>& members) {
    RatMat diffs;
    for (size_t i = 1; i < members.size(); ++i) {
      RatVec d(P.vertices[members[i]]);
      for (size_t j = 0; j < d.size(); ++j) d[j] -= P.vertices[members[0]][j];
      diffs.push_back(std::move(d));
    }
    return diffs.empty() ? 0 : rat_rank(diffs);
  };

  std::vector<std::vector<size_t>> ordered(faces.begin(), faces.end());
  std::sort(ordered.begin(), ordered.end(),
            [&](const std::vector<size_t>& a, const std::vector<size_t>& b) {
              int da = face_dim(a), db = face_dim(b);
              if (da != db) return da < db;
              return a < b;
            });

  Fan fan;
  fan.n = n;
  for (const auto& members : ordered) {
    Cone cone;
    cone.face_dim = face_dim(members);
    cone.lines = perp;
    for (size_t f = 0; f < facet_members.size(); ++f) {
      if (std::includes(facet_members[f].begin(), facet_members[f].end(), members.begin(),
                        members.end()))
        cone.rays.push_back(facet_normals[f]);
    }
    std::sort(cone.rays.begin(), cone.rays.end());
    RatMat all = cone.rays;
    all.insert(all.end(), cone.lines.begin(), cone.lines.end());
    cone.dim = all.empty() ? 0 : rat_rank(all);
    fan.cones.push_back(std::move(cone));
  }
  fan.faces_of.resize(fan.cones.size());
  for (size_t i = 0; i < ordered.size(); ++i) {
    for (size_t j = 0; j < ordered.size(); ++j) {
      if (i == j) continue;
      // N(G) is a face of N(F) exactly when F is a face of G
      if (std::includes(ordered[j].begin(), ordered[j].end(), ordered[i].begin(),
                        ordered[i].end()))
        fan.faces_of[i].push_back(static_cast<int>(j));
    }
  }
  return fan;
}

const char* cell_kind_name(SphericalCell::Kind kind) {
  switch (kind) {
    case SphericalCell::Kind::Vertex: return "vertex";
    case SphericalCell::Kind::Arc: return "arc";
    case SphericalCell::Kind::Cell: return "cell";
  }
  return "cell";
}

std::string to_json_string(const SphericalComplex& S) {
  nlohmann::ordered_json root;
  root["cells"] = nlohmann::ordered_json::array();
  for (const auto& cell : S.cells) {
    nlohmann::ordered_json c;
    c["kind"] = cell_kind_name(cell.kind);
    c["dim"] = cell.dim;
    c["slopes"] = nlohmann::ordered_json::array();
    for (const auto& s : cell.slopes) c["slopes"].push_back(s.p);
    c["samples"] = nlohmann::ordered_json::array();
    for (const auto& v : cell.samples) {
      std::vector<double> coords(v.data(), v.data() + v.size());
      c["samples"].push_back(coords);
    }
    root["cells"].push_back(std::move(c));
  }
  return root.dump(2);
}

namespace {

SphericalCell vertex_cell(const RatVec& ray) {
  SphericalCell cell;
  cell.kind = SphericalCell::Kind::Vertex;
  cell.dim = 0;
  cell.slopes = {slope_of(ray)};
  cell.samples = {to_unit(ray)};
  cell.generators = {slope_of(ray)};
  return cell;
}

SphericalCell arc_cell(const RatVec& end1, const RatVec& end2, const RatVec& interior) {
  SphericalCell cell;
  cell.kind = SphericalCell::Kind::Arc;
  cell.dim = 1;
  RatVec a = end1, b = end2;
  if (b < a) std::swap(a, b);
  cell.slopes = {slope_of(a), slope_of(b)};
  Vec mid = to_unit(interior);
  cell.samples = {to_unit(a), to_unit(b), mid};
  cell.generators = {slope_of(a), slope_of(b), slope_of(interior)};
  return cell;
}

}  // namespace

SphericalComplex tropical_limit_set(const LaurentPolynomial& p) {
  if (p.is_zero()) raise(ErrorCode::EmptySupport, "tropical limit set of the zero polynomial");
  if (p.is_monomial())
    raise(ErrorCode::MonomialInput, "a monomial cuts out the empty set in the torus");
  RationalPolytope P = newton_polytope(p);
  Fan fan = normal_fan(P);

  SphericalComplex S;
  S.n = p.arity;
  for (const auto& cone : fan.cones) {
    if (cone.face_dim < 1 || cone.dim < 1 || cone.dim > p.arity - 1) continue;
    if (cone.dim == 1) {
      if (!cone.rays.empty()) {
        S.cells.push_back(vertex_cell(cone.rays[0]));
      } else {
        RatVec neg = cone.lines[0];
        for (auto& x : neg) x = -x;
        S.cells.push_back(vertex_cell(cone.lines[0]));
        S.cells.push_back(vertex_cell(neg));
      }
    } else if (cone.dim == 2) {
      if (cone.lines.empty()) {
        RatVec mid(cone.rays[0]);
        for (size_t j = 0; j < mid.size(); ++j) mid[j] += cone.rays[1][j];
        S.cells.push_back(arc_cell(cone.rays[0], cone.rays[1], rat_primitive(mid)));
      } else if (cone.rays.size() == 1) {
        RatVec neg = cone.lines[0];
        for (auto& x : neg) x = -x;
        S.cells.push_back(arc_cell(cone.lines[0], neg, cone.rays[0]));
      } else {
        // a full great circle, reported as two half-circle arcs
        RatVec v = cone.lines[0], w = cone.lines[1];
        RatVec nv = v, nw = w;
        for (auto& x : nv) x = -x;
        for (auto& x : nw) x = -x;
        SphericalCell upper = arc_cell(v, nv, w);
        SphericalCell lower = arc_cell(v, nv, nw);
        upper.generators = {slope_of(v), slope_of(nv), slope_of(w)};
        lower.generators = {slope_of(v), slope_of(nv), slope_of(nw)};
        S.cells.push_back(std::move(upper));
        S.cells.push_back(std::move(lower));
      }
    } else {
      SphericalCell cell;
      cell.kind = SphericalCell::Kind::Cell;
      cell.dim = cone.dim - 1;
      RatVec sum(static_cast<size_t>(p.arity), 0);
      for (const auto& r : cone.rays) {
        cell.slopes.push_back(slope_of(r));
        cell.generators.push_back(slope_of(r));
        cell.samples.push_back(to_unit(r));
        for (size_t j = 0; j < sum.size(); ++j) sum[j] += r[j];
      }
      for (const auto& l : cone.lines) {
        RatVec neg = l;
        for (auto& x : neg) x = -x;
        cell.slopes.push_back(slope_of(l));
        cell.slopes.push_back(slope_of(neg));
        cell.generators.push_back(slope_of(l));
        cell.generators.push_back(slope_of(neg));
        cell.samples.push_back(to_unit(l));
        cell.samples.push_back(to_unit(neg));
      }
      bool sum_zero = true;
      for (const auto& x : sum) sum_zero = sum_zero && x == 0;
      if (!sum_zero) cell.samples.push_back(to_unit(sum));
      S.cells.push_back(std::move(cell));
    }
  }
  std::sort(S.cells.begin(), S.cells.end(), [](const SphericalCell& a, const SphericalCell& b) {
    if (a.dim != b.dim) return a.dim < b.dim;
    return a.slopes < b.slopes;
  });
  return S;
}

std::pair<int, bool> complex_dim_and_homogeneity(const SphericalComplex& S) {
  if (S.cells.empty()) return {-1, true};
  int max_dim = 0;
  for (const auto& c : S.cells) max_dim = std::max(max_dim, c.dim);
  bool homogeneous = true;
  for (const auto& c : S.cells) {
    if (c.dim == max_dim) continue;
    bool covered = false;
    for (const auto& big : S.cells) {
      if (big.dim <= c.dim || c.slopes.empty()) continue;
      bool all_in = true;
      for (const auto& s : c.slopes)
        all_in = all_in &&
                 std::find(big.slopes.begin(), big.slopes.end(), s) != big.slopes.end();
      if (all_in) {
        covered = true;
        break;
      }
    }
    if (!covered) homogeneous = false;
  }
  return {max_dim, homogeneous};
}

BalanceReport balance_check(const SphericalComplex& S) {
  if (S.cells.empty()) raise(ErrorCode::BadArgument, "balance check of an empty complex");
  BalanceReport report;
  report.exact = true;

  RatMat G;
  for (const auto& cell : S.cells) {
    if (!cell.generators.empty() && cell.rational) {
      for (const auto& s : cell.generators) G.push_back(slope_vec(s));
    } else {
      report.exact = false;
      for (const auto& v : cell.samples) {
        RatVec g(static_cast<size_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i)
          g[static_cast<size_t>(i)] = rationalize(v[i], 1000000);
        G.push_back(std::move(g));
      }
    }
  }
  report.span_dim = rat_rank(G);

  // 0 in relint conv(S) within span(S)  <=>  some lambda >= 1 has sum lambda_g g = 0
  const size_t n = static_cast<size_t>(S.n);
  RatMat A(n, RatVec(G.size(), 0));
  RatVec b(n, 0);
  for (size_t j = 0; j < G.size(); ++j) {
    for (size_t i = 0; i < n; ++i) {
      A[i][j] = G[j][i];
      b[i] -= G[j][i];
    }
  }
  report.balanced = lp_feasible(A, b);

  // hemisphere scan: hyperplanes through generator tuples, then random u
  std::vector<Vec> reps;
  for (const auto& cell : S.cells)
    for (const auto& v : cell.samples) reps.push_back(v);
  Eigen::MatrixXd Gf(static_cast<Eigen::Index>(G.size()), static_cast<Eigen::Index>(n));
  for (size_t j = 0; j < G.size(); ++j)
    for (size_t i = 0; i < n; ++i)
      Gf(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
          G[j][i].convert_to<double>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Gf, Eigen::ComputeFullV);
  Eigen::MatrixXd Vfull = svd.matrixV();
  Eigen::MatrixXd span_basis = Vfull.leftCols(report.span_dim);

  auto test_direction = [&](const Vec& u) {
    double lo = 0.0, hi = 0.0;
    for (const auto& r : reps) {
      double d = u.dot(r);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    bool misses_side = !(hi > 1e-9 && lo < -1e-9);
    bool nontrivial = hi > 1e-9 || lo < -1e-9;
    if (misses_side && nontrivial && report.witnesses.size() < 8)
      report.witnesses.push_back(hi > 1e-9 ? Vec(-u) : u);
  };

  const int s = report.span_dim;
  if (s >= 1) {
    if (s == 1) {
      Vec u = span_basis.col(0);
      test_direction(u);
      ++report.hyperplane_tests;
    } else {
      std::vector<size_t> pick(static_cast<size_t>(s - 1));
      std::function<void(size_t, size_t)> enumerate = [&](size_t idx, size_t start) {
        if (report.hyperplane_tests >= 5000) return;
        if (idx == pick.size()) {
          Eigen::MatrixXd M(static_cast<Eigen::Index>(pick.size()) + (Gf.cols() - s),
                            Gf.cols());
          Eigen::Index row = 0;
          for (size_t j : pick) M.row(row++) = reps[j].transpose();
          for (Eigen::Index c = s; c < Vfull.cols(); ++c) M.row(row++) = Vfull.col(c).transpose();
          // M has n-1 rows in n columns, so its kernel is nontrivial and the
          // trailing right-singular vector spans (part of) it
          Eigen::JacobiSVD<Eigen::MatrixXd> msvd(M, Eigen::ComputeFullV);
          Eigen::VectorXd u = msvd.matrixV().col(Vfull.cols() - 1);
          if (u.norm() < 0.5) return;
          test_direction(u);
          ++report.hyperplane_tests;
          return;
        }
        for (size_t j = start; j < reps.size(); ++j) {
          pick[idx] = j;
          enumerate(idx + 1, j + 1);
        }
      };
      enumerate(0, 0);
    }
  }

  SplitMix64 rng(hash_mix(0x62616c616e636564ull, static_cast<uint64_t>(S.n)));
  for (int t = 0; t < 10000; ++t) {
    Vec raw(static_cast<Eigen::Index>(n));
    for (size_t i = 0; i < n; ++i) raw[static_cast<Eigen::Index>(i)] = rng.uniform(-1.0, 1.0);
    Vec projected = span_basis * (span_basis.transpose() * raw);
    double norm = projected.norm();
    ++report.random_tests;
    if (norm < 1e-9) continue;
    test_direction(projected / norm);
  }
  return report;
}

NewtonBound newton_bound_from_vertices(
    int n, const std::vector<std::pair<RationalSlope, double>>& verts) {
  if (verts.empty()) raise(ErrorCode::BadArgument, "no vertex slopes given");
  std::vector<RationalHalfspace> hs;
  RatMat slopes;
  for (const auto& [u, b] : verts) {
    RatVec q = slope_vec(u);
    slopes.push_back(q);
    hs.push_back(RationalHalfspace{std::move(q), -rationalize(b, 1000000)});
  }
  NewtonBound bound;
  bound.body = halfspace_intersection(n, hs);
  bound.span_dim = rat_rank(slopes);
  bound.compact_within_span = true;
  auto orthogonal_to_all = [&](const RatVec& d) {
    for (const auto& u : slopes)
      if (rat_dot(u, d) != 0) return false;
    return true;
  };
  for (const auto& r : bound.body.rays)
    bound.compact_within_span = bound.compact_within_span && orthogonal_to_all(r);
  for (const auto& l : bound.body.lines)
    bound.compact_within_span = bound.compact_within_span && orthogonal_to_all(l);
  return bound;
}

std::vector<ExponentVec> support_halfspace_violations(const SeriesTruncation& s,
                                                      const RationalSlope& u, double b) {
  Rational offset = rationalize(b, 1000000);
  std::vector<ExponentVec> out;
  for (const auto& [alpha, c] : s.poly.terms) {
    Rational lhs = offset;
    for (size_t i = 0; i < alpha.size(); ++i) lhs += Rational(u.p[i]) * alpha[i];
    if (lhs > 0) out.push_back(alpha);
  }
  return out;
}

}  // namespace trop
