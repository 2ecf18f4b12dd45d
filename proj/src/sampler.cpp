#include "tropiscope/sampler.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <numbers>
#include <set>

#include "tropiscope/errors.hpp"
#include "tropiscope/rng.hpp"

namespace trop {

namespace {

constexpr int kChunkTarget = 32;
constexpr int kPolynomialAttempts = 1024;
constexpr int kTranscendentalAttempts = 512;
constexpr int kParametrizedAttempts = 2048;
constexpr int kZeroChunkAbort = 4;

int max_chunks_for(int count) { return 4 * ((count + kChunkTarget - 1) / kChunkTarget) + 4; }

void collect_vars(const NodePtr& node, std::set<int>& out) {
  if (node->kind == NodeKind::Variable) out.insert(node->var_index);
  for (const auto& c : node->children) collect_vars(c, out);
}

std::vector<int> variables_used(const Expression& f) {
  std::set<int> s;
  collect_vars(f.root(), s);
  return std::vector<int>(s.begin(), s.end());
}

Complex cpow(Complex w, long long e) {
  if (e < 0) return 1.0 / cpow(w, -e);
  Complex acc{1.0, 0.0};
  while (e > 0) {
    if (e & 1) acc *= w;
    w *= w;
    e >>= 1;
  }
  return acc;
}

bool finite(Complex v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

/// Univariate Laurent polynomial as exponent -> coefficient.
struct Univariate {
  std::map<long long, Complex> coeffs;

  Complex eval(Complex w) const {
    Complex acc{0.0, 0.0};
    for (const auto& [e, c] : coeffs) acc += c * cpow(w, e);
    return acc;
  }

  Complex deriv(Complex w) const {
    Complex acc{0.0, 0.0};
    for (const auto& [e, c] : coeffs)
      if (e != 0) acc += c * static_cast<double>(e) * cpow(w, e - 1);
    return acc;
  }
};

/// Parlett-Reinsch balancing: scale rows and columns by powers of two until
/// they have comparable norms. Companion matrices of polynomials whose
/// coefficients span hundreds of orders of magnitude are hopeless without
/// this; the QR noise floor eps*|A| buries every root smaller than the
/// largest matrix entry.
void balance(Eigen::MatrixXcd& A) {
  const double radix = 2.0;
  bool done = false;
  while (!done) {
    done = true;
    for (int i = 0; i < A.rows(); ++i) {
      double c = 0.0, r = 0.0;
      for (int j = 0; j < A.rows(); ++j) {
        if (j == i) continue;
        c += std::abs(A(j, i));
        r += std::abs(A(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double f = 1.0;
      double s = c + r;
      while (c < r / radix) {
        c *= radix;
        r /= radix;
        f *= radix;
      }
      while (c >= r * radix) {
        c /= radix;
        r *= radix;
        f /= radix;
      }
      if (c + r < 0.95 * s) {
        done = false;
        A.row(i) /= f;
        A.col(i) *= f;
      }
    }
  }
}

/// All torus roots of a univariate Laurent polynomial. On far-out shells the
/// coefficients span hundreds of orders of magnitude and the root moduli
/// split into scales given by the slopes of the upper Newton polygon of
/// (exponent, log|coeff|); a single companion matrix cannot resolve roots
/// below its eps*|A| noise floor, so each polygon edge is solved in its own
/// scaled coordinate where the companion has entries of order one.
std::vector<Complex> laurent_roots(const std::map<long long, Complex>& raw) {
  double maxc = 0.0;
  for (const auto& [e, c] : raw) maxc = std::max(maxc, std::abs(c));
  if (!(maxc > 0.0) || !std::isfinite(maxc)) return {};
  std::vector<std::pair<long long, Complex>> terms;
  for (const auto& [e, c] : raw)
    if (std::abs(c) > 1e-280 * maxc) terms.emplace_back(e, c / maxc);
  if (terms.size() < 2) return {};
  if (terms.back().first - terms.front().first > 512) return {};

  std::vector<double> logc(terms.size());
  for (size_t i = 0; i < terms.size(); ++i) logc[i] = std::log(std::abs(terms[i].second));
  std::vector<size_t> hull;
  for (size_t i = 0; i < terms.size(); ++i) {
    while (hull.size() >= 2) {
      size_t a = hull[hull.size() - 2], b = hull.back();
      double ex = static_cast<double>(terms[b].first - terms[a].first);
      double ey = logc[b] - logc[a];
      double fx = static_cast<double>(terms[i].first - terms[a].first);
      double fy = logc[i] - logc[a];
      if (ex * fy - fx * ey >= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(i);
  }

  std::vector<Complex> roots;
  for (size_t k = 0; k + 1 < hull.size(); ++k) {
    size_t a = hull[k], b = hull[k + 1];
    double slope = (logc[b] - logc[a]) / static_cast<double>(terms[b].first - terms[a].first);
    if (std::abs(slope) > 700.0) continue;
    double s = std::exp(-slope);
    double base = logc[a] - slope * static_cast<double>(terms[a].first);

    // Rescaled polynomial q(y) = u(s*y)/e^base: edge terms have magnitude
    // one, everything else decays with its distance below the edge.
    Univariate q;
    Univariate edge;
    for (size_t i = 0; i < terms.size(); ++i) {
      double lg = logc[i] - slope * static_cast<double>(terms[i].first) - base;
      if (lg < -700.0) continue;
      Complex c = terms[i].second / std::abs(terms[i].second) * std::exp(lg);
      q.coeffs[terms[i].first] = c;
      if (lg > -3.0) edge.coeffs[terms[i].first] = c;
    }
    if (edge.coeffs.size() < 2) continue;
    long long emin = edge.coeffs.begin()->first;
    long long emax = edge.coeffs.rbegin()->first;
    long long d = emax - emin;

    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(static_cast<int>(d), static_cast<int>(d));
    Complex lead = edge.coeffs.rbegin()->second;
    for (long long j = 0; j < d; ++j) {
      auto it = edge.coeffs.find(emin + j);
      Complex c = it == edge.coeffs.end() ? Complex{0.0, 0.0} : it->second;
      C(static_cast<int>(j), static_cast<int>(d - 1)) = -c / lead;
      if (j >= 1) C(static_cast<int>(j), static_cast<int>(j - 1)) = 1.0;
    }
    balance(C);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(C, false);
    if (ces.info() != Eigen::Success) continue;

    for (int i = 0; i < ces.eigenvalues().size(); ++i) {
      Complex y = ces.eigenvalues()(i);
      if (!finite(y) || std::abs(y) == 0.0) continue;
      for (int step = 0; step < 12; ++step) {
        Complex g = q.eval(y);
        Complex dg = q.deriv(y);
        if (!finite(g) || !finite(dg) || std::abs(dg) == 0.0) break;
        Complex next = y - g / dg;
        if (!finite(next) || std::abs(next) == 0.0) break;
        if (std::abs(q.eval(next)) >= std::abs(g)) break;
        y = next;
      }
      // Roots of this edge live near |y| = 1; anything that drifted far
      // belongs to another edge and is found there with full precision.
      if (std::abs(std::log(std::abs(y))) > 30.0) continue;
      Complex w = s * y;
      if (finite(w) && std::abs(w) > 0.0) roots.push_back(w);
    }
  }
  return roots;
}

/// Newton iteration for f(z) = 0 in the single coordinate `var`, all other
/// coordinates of z held fixed. Returns distinct converged roots.
std::vector<Complex> newton_roots(const Expression& f, const Expression& dfdv,
                                  std::vector<Complex>& z, int var, double R,
                                  double modulus_span, SplitMix64& rng) {
  const double diverge = std::exp(2.0 * R);
  std::vector<Complex> roots;
  auto push_unique = [&](Complex w) {
    for (const Complex& u : roots)
      if (std::abs(w - u) <= 1e-9 * (1.0 + std::abs(u))) return;
    roots.push_back(w);
  };

  for (int circle = 0; circle < 8; ++circle) {
    double sigma = modulus_span <= 0.0
                       ? 0.0
                       : -modulus_span + 2.0 * modulus_span * circle / 7.0;
    double jitter = rng.uniform01();
    for (int k = 0; k < 32; ++k) {
      double phase = 2.0 * std::numbers::pi * (k + jitter) / 32.0;
      Complex w = std::polar(std::exp(sigma), phase);
      bool converged = false;
      for (int step = 0; step < 50; ++step) {
        z[static_cast<size_t>(var)] = w;
        auto fv = try_eval(f, z);
        auto dv = try_eval(dfdv, z);
        if (!fv || !dv || std::abs(*dv) == 0.0) break;
        Complex next = w - *fv / *dv;
        if (!finite(next) || std::abs(next) > diverge || std::abs(next) == 0.0) break;
        double delta = std::abs(next - w);
        w = next;
        if (delta <= 1e-12 * (1.0 + std::abs(w))) {
          converged = true;
          break;
        }
      }
      if (!converged) continue;
      z[static_cast<size_t>(var)] = w;
      auto fv = try_eval(f, z);
      if (!fv) continue;
      double best = std::abs(*fv);
      for (int polish = 0; polish < 5; ++polish) {
        z[static_cast<size_t>(var)] = w;
        auto g = try_eval(f, z);
        auto dg = try_eval(dfdv, z);
        if (!g || !dg || std::abs(*dg) == 0.0) break;
        Complex next = w - *g / *dg;
        if (!finite(next) || std::abs(next) == 0.0) break;
        z[static_cast<size_t>(var)] = next;
        auto gn = try_eval(f, z);
        if (!gn || std::abs(*gn) >= best) break;
        best = std::abs(*gn);
        w = next;
      }
      push_unique(w);
    }
  }
  return roots;
}

/// Runs chunk tasks in waves of `workers`, merging results in chunk order so
/// scheduling cannot affect the output. Stops once `count` points are merged,
/// or after kZeroChunkAbort consecutive empty chunks with nothing found yet.
std::vector<SamplePoint> run_chunked(
    int count, int workers, int max_chunks,
    const std::function<std::vector<SamplePoint>(int)>& chunk_fn) {
  std::vector<SamplePoint> out;
  int next = 0;
  int zero_streak = 0;
  bool done = false;
  while (!done && next < max_chunks) {
    int wave = std::min(std::max(workers, 1), max_chunks - next);
    std::vector<std::future<std::vector<SamplePoint>>> futs;
    futs.reserve(static_cast<size_t>(wave));
    for (int i = 0; i < wave; ++i)
      futs.push_back(std::async(std::launch::async, chunk_fn, next + i));
    for (auto& fu : futs) {
      auto pts = fu.get();
      if (done) continue;
      zero_streak = pts.empty() ? zero_streak + 1 : 0;
      for (auto& p : pts) out.push_back(std::move(p));
      if (static_cast<int>(out.size()) >= count) done = true;
      if (out.empty() && zero_streak >= kZeroChunkAbort) done = true;
    }
    next += wave;
  }
  if (static_cast<int>(out.size()) > count) out.resize(static_cast<size_t>(count));
  return out;
}

/// Uniform draw from the closed ball of radius `radius` in dimension dim.
bool draw_in_ball(SplitMix64& rng, int dim, double radius, Vec& out) {
  out = Vec(dim);
  for (int tries = 0; tries < 64; ++tries) {
    for (int i = 0; i < dim; ++i) out(i) = rng.uniform(-radius, radius);
    if (out.norm() <= radius) return true;
  }
  return false;
}

}  // namespace

VarietySpec implicit_spec(std::vector<Expression> equations, int n) {
  if (n < 2) raise(ErrorCode::BadArgument, "implicit specs need ambient dimension >= 2");
  if (equations.empty() || static_cast<int>(equations.size()) > n - 1)
    raise(ErrorCode::BadArgument, "implicit specs need between 1 and n-1 equations");
  for (const auto& f : equations)
    if (f.arity() != n) raise(ErrorCode::BadArgument, "equation arity must equal n");
  VarietySpec spec;
  spec.mode = VarietySpec::Mode::Implicit;
  spec.n = n;
  spec.expected_dim = n - static_cast<int>(equations.size());
  spec.equations = std::move(equations);
  return spec;
}

VarietySpec parametrized_spec(std::vector<Expression> map, int n) {
  if (static_cast<int>(map.size()) != n)
    raise(ErrorCode::BadArgument, "parametrization needs exactly n components");
  if (map.empty()) raise(ErrorCode::BadArgument, "empty parametrization");
  int p = map[0].arity();
  for (const auto& g : map)
    if (g.arity() != p) raise(ErrorCode::BadArgument, "components must share one arity");
  if (p < 1 || p >= n)
    raise(ErrorCode::BadArgument, "parameter count must satisfy 1 <= p < n");
  VarietySpec spec;
  spec.mode = VarietySpec::Mode::Parametrized;
  spec.n = n;
  spec.params = p;
  spec.expected_dim = p;
  spec.map = std::move(map);
  return spec;
}

double shell_band(double R) { return std::max(0.5, 0.02 * R); }

std::vector<double> shell_schedule(double rmin, double rmax, int m) {
  if (!(rmin > 0.0) || !(rmax > rmin) || m < 2)
    raise(ErrorCode::BadBounds, "need 0 < rmin < rmax and m >= 2");
  std::vector<double> out(static_cast<size_t>(m));
  double ratio = rmax / rmin;
  for (int i = 0; i < m; ++i)
    out[static_cast<size_t>(i)] = rmin * std::pow(ratio, static_cast<double>(i) / (m - 1));
  out.front() = rmin;
  out.back() = rmax;
  return out;
}

ShellSample sample_parametrized(const VarietySpec& spec, double R, int count,
                                uint64_t seed, int workers) {
  if (spec.mode != VarietySpec::Mode::Parametrized)
    raise(ErrorCode::BadArgument, "spec is not parametrized");
  if (count < 1) raise(ErrorCode::BadArgument, "count must be positive");
  if (!(R > 0.0)) raise(ErrorCode::BadBounds, "shell radius must be positive");
  const double delta = shell_band(R);
  const int p = spec.params;
  const int n = spec.n;

  // 0: inside the torus with finite log; +1: some modulus overflowed (or the
  // map failed to evaluate); -1: some modulus underflowed to zero. The walls
  // bound the corridor of parameters the shell band can live in.
  auto image_log = [&](const std::vector<Complex>& t, std::vector<Complex>& z, Vec& x) {
    int status = 0;
    for (int j = 0; j < n; ++j) {
      auto v = try_eval(spec.map[static_cast<size_t>(j)], t);
      if (!v || !std::isfinite(std::abs(*v))) return 1;
      if (std::abs(*v) == 0.0) {
        status = -1;
        continue;
      }
      z[static_cast<size_t>(j)] = *v;
      x(j) = std::log(std::abs(*v));
      if (!std::isfinite(x(j))) return 1;
    }
    return status;
  };

  auto chunk_fn = [&](int chunk) {
    SplitMix64 rng(hash_mix(seed, static_cast<uint64_t>(chunk)));
    std::vector<SamplePoint> pts;
    double S = std::max(2.0, 1.2 * R);
    const double Smax = 4.0 * R + 32.0;
    int consecutive_rejects = 0;
    std::vector<Complex> t(static_cast<size_t>(p));
    std::vector<Complex> z(static_cast<size_t>(n));
    Vec x(n);
    std::vector<double> moduli(static_cast<size_t>(p));
    std::vector<double> phases(static_cast<size_t>(p));

    // The first phase is carried as a point (c, s) on the unit circle, not as
    // an angle: near the poles a root can sit at c below the resolution of
    // representable angles, while chord-midpoint bisection keeps full
    // relative precision in each coordinate.
    auto shell_gap = [&](double c1, double s1, int& wall) {
      t[0] = std::exp(moduli[0]) * Complex(c1, s1);
      for (int i = 1; i < p; ++i)
        t[static_cast<size_t>(i)] =
            std::polar(std::exp(moduli[static_cast<size_t>(i)]), phases[static_cast<size_t>(i)]);
      wall = image_log(t, z, x);
      if (wall != 0) return std::numeric_limits<double>::infinity();
      double h = x.norm() - R;
      if (!std::isfinite(h)) {
        wall = 1;
        return std::numeric_limits<double>::infinity();
      }
      return h;
    };
    auto accept = [&](double c1, double s1) {
      int wall = 0;
      double h = shell_gap(c1, s1, wall);
      if (wall != 0 || std::abs(h) > delta) return false;
      SamplePoint pt;
      pt.z = z;
      pt.residual = 0.0;
      pt.params = t;
      pts.push_back(std::move(pt));
      consecutive_rejects = 0;
      return true;
    };
    auto chord_mid = [](double ca, double sa, double cb, double sb, double& cm, double& sm) {
      cm = ca + cb;
      sm = sa + sb;
      double norm = std::hypot(cm, sm);
      if (!(norm > 0.0)) return false;
      cm /= norm;
      sm /= norm;
      return !((cm == ca && sm == sa) || (cm == cb && sm == sb));
    };
    // Negative endpoint against a positive-or-wall endpoint: the gap grows to
    // +inf toward either wall, so a wall is always a valid upper side.
    auto root_bisect = [&](double cn, double sn, double cp, double sp) {
      for (int it = 0; it < 1200; ++it) {
        double cm, sm;
        if (!chord_mid(cn, sn, cp, sp, cm, sm)) return false;
        int wall = 0;
        double fm = shell_gap(cm, sm, wall);
        if (wall == 0 && std::abs(fm) <= 0.9 * delta) return accept(cm, sm);
        if (wall == 0 && fm < 0.0) {
          cn = cm;
          sn = sm;
        } else {
          cp = cm;
          sp = sm;
        }
      }
      return false;
    };
    // Between an overflow wall and an underflow wall the moduli sweep the
    // whole range, so a finite corridor hides in between even when it is far
    // narrower than the grid step. The shell crossings sit on the two
    // shoulders of the corridor; which one a walk reaches depends on the side
    // it approaches from, so the orientation is drawn per attempt.
    auto corridor_hunt = [&](double cp, double sp, double cu, double su, bool orient) {
      for (int it = 0; it < 1200; ++it) {
        double cm, sm;
        if (!chord_mid(cp, sp, cu, su, cm, sm)) return false;
        int wall = 0;
        double fm = shell_gap(cm, sm, wall);
        if (wall == 0 && std::abs(fm) <= 0.9 * delta) return accept(cm, sm);
        if (wall == 0 && fm < 0.0)
          return orient ? root_bisect(cm, sm, cp, sp) : root_bisect(cm, sm, cu, su);
        if (wall == -1 || (wall == 0 && !orient)) {
          cu = cm;
          su = sm;
        } else {
          cp = cm;
          sp = sm;
        }
      }
      return false;
    };

    for (int attempt = 0; attempt < kParametrizedAttempts; ++attempt) {
      if (static_cast<int>(pts.size()) >= kChunkTarget) break;
      if (consecutive_rejects >= 192 && S < Smax) {
        S = std::min(S * 1.5, Smax);
        consecutive_rejects = 0;
      }
      for (int i = 0; i < p; ++i) moduli[static_cast<size_t>(i)] = rng.uniform(-S, S);
      for (int i = 1; i < p; ++i)
        phases[static_cast<size_t>(i)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double offset = rng.uniform01();
      bool orient = rng.uniform01() < 0.5;

      constexpr int kGrid = 64;
      double gridval[kGrid];
      int gridwall[kGrid];
      double gridc[kGrid];
      double grids[kGrid];
      int inband[kGrid];
      int ninband = 0;
      for (int j = 0; j < kGrid; ++j) {
        double phi = 2.0 * std::numbers::pi * (j + offset) / kGrid;
        gridc[j] = std::cos(phi);
        grids[j] = std::sin(phi);
        gridval[j] = shell_gap(gridc[j], grids[j], gridwall[j]);
        if (gridwall[j] == 0 && std::abs(gridval[j]) <= 0.9 * delta) inband[ninband++] = j;
      }
      // The shell meets the phase circle in several symmetric roots; taking
      // the first hit in scan order would starve all but one of them of
      // phase coverage, so candidates (and fallback pairs) are drawn at
      // random.
      bool found = false;
      while (ninband > 0 && !found) {
        int pick = static_cast<int>(rng.below(static_cast<uint64_t>(ninband)));
        int j = inband[pick];
        inband[pick] = inband[--ninband];
        found = accept(gridc[j], grids[j]);
      }
      int pairs[kGrid];
      int npairs = 0;
      if (!found) {
        for (int j = 0; j < kGrid; ++j) {
          int jn = (j + 1) % kGrid;
          int wa = gridwall[j], wb = gridwall[jn];
          double a = gridval[j], b = gridval[jn];
          bool usable = false;
          if (wa == 0 && a < 0.0)
            usable = wb != 0 || b >= 0.0;
          else if (wb == 0 && b < 0.0)
            usable = true;
          else if ((wa != -1 && wb == -1) || (wa == -1 && wb != -1))
            usable = true;
          if (usable) pairs[npairs++] = j;
        }
      }
      while (npairs > 0 && !found) {
        int pick = static_cast<int>(rng.below(static_cast<uint64_t>(npairs)));
        int j = pairs[pick];
        pairs[pick] = pairs[--npairs];
        int jn = (j + 1) % kGrid;
        int wa = gridwall[j], wb = gridwall[jn];
        double a = gridval[j], b = gridval[jn];
        if (wa == 0 && a < 0.0) {
          found = root_bisect(gridc[j], grids[j], gridc[jn], grids[jn]);
        } else if (wb == 0 && b < 0.0) {
          found = root_bisect(gridc[jn], grids[jn], gridc[j], grids[j]);
        } else if (wa != -1 && wb == -1) {
          found = corridor_hunt(gridc[j], grids[j], gridc[jn], grids[jn], orient);
        } else if (wa == -1 && wb != -1) {
          found = corridor_hunt(gridc[jn], grids[jn], gridc[j], grids[j], orient);
        }
      }
      if (!found) ++consecutive_rejects;
    }
    return pts;
  };

  auto pts = run_chunked(count, workers, max_chunks_for(count), chunk_fn);
  if (static_cast<int>(pts.size()) < count)
    raise(ErrorCode::ShellUnreachable,
          "found " + std::to_string(pts.size()) + " of " + std::to_string(count) +
              " points on shell R=" + std::to_string(R));
  ShellSample out;
  out.R = R;
  out.band = delta;
  out.seed = seed;
  out.points = std::move(pts);
  return out;
}

ShellSample sample_hypersurface(const Expression& f, double R, int count,
                                uint64_t seed, int workers) {
  if (!f.valid()) raise(ErrorCode::BadArgument, "empty expression");
  if (count < 1) raise(ErrorCode::BadArgument, "count must be positive");
  if (!(R > 0.0)) raise(ErrorCode::BadBounds, "shell radius must be positive");
  const int n = f.arity();
  const double delta = shell_band(R);
  const std::vector<int> usable = variables_used(f);
  if (usable.empty()) raise(ErrorCode::BadArgument, "equation uses no variables");

  const bool transcendental = f.has_transcendental();
  LaurentPolynomial poly;
  std::map<int, Expression> derivs;
  if (transcendental) {
    for (int v : usable) derivs.emplace(v, differentiate(f, v));
  } else {
    poly = to_laurent(f);
  }

  auto chunk_fn = [&](int chunk) {
    SplitMix64 rng(hash_mix(seed, static_cast<uint64_t>(chunk)));
    std::vector<SamplePoint> pts;
    const int budget = transcendental ? kTranscendentalAttempts : kPolynomialAttempts;
    std::vector<Complex> z(static_cast<size_t>(n));
    Vec xfree;

    for (int attempt = 0; attempt < budget; ++attempt) {
      if (static_cast<int>(pts.size()) >= kChunkTarget) break;
      int v = usable[static_cast<size_t>(attempt) % usable.size()];
      if (!draw_in_ball(rng, n - 1, R + delta, xfree)) continue;
      int slot = 0;
      for (int j = 0; j < n; ++j) {
        if (j == v) continue;
        double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        z[static_cast<size_t>(j)] = std::polar(std::exp(xfree(slot)), theta);
        ++slot;
      }

      std::vector<Complex> roots;
      if (transcendental) {
        double rr = (R + delta) * (R + delta) - xfree.squaredNorm();
        double span = std::sqrt(std::max(0.0, rr));
        roots = newton_roots(f, derivs.at(v), z, v, R, span, rng);
      } else {
        roots = laurent_roots(substitute_all_but(poly, z, v));
      }

      for (const Complex& w : roots) {
        if (static_cast<int>(pts.size()) >= kChunkTarget) break;
        if (!finite(w) || std::abs(w) == 0.0) continue;
        z[static_cast<size_t>(v)] = w;
        Vec x = log_map(z);
        if (!x.allFinite()) continue;
        if (std::abs(x.norm() - R) > delta) continue;
        auto fv = try_eval(f, z);
        if (!fv) continue;
        double residual = std::abs(*fv);
        // Relative to the term scale with no absolute floor: far from the
        // variety every term can be microscopic, making |f| tiny for points
        // that cancel nothing.
        double scale = eval_scale(f, z);
        if (!(scale > 0.0) || !std::isfinite(scale)) continue;
        if (residual > 1e-9 * scale) continue;
        SamplePoint pt;
        pt.z = z;
        pt.residual = residual;
        pts.push_back(std::move(pt));
      }
    }
    return pts;
  };

  auto pts = run_chunked(count, workers, max_chunks_for(count), chunk_fn);
  if (pts.empty())
    raise(ErrorCode::ShellUnreachable, "no variety points on shell R=" + std::to_string(R));
  if (static_cast<int>(pts.size()) < count)
    raise(ErrorCode::RootFindingBudgetExceeded,
          "found " + std::to_string(pts.size()) + " of " + std::to_string(count) + " points");
  ShellSample out;
  out.R = R;
  out.band = delta;
  out.seed = seed;
  out.points = std::move(pts);
  return out;
}

ShellSample sample_shell(const VarietySpec& spec, double R, int count,
                         uint64_t seed, int workers) {
  if (spec.mode == VarietySpec::Mode::Parametrized)
    return sample_parametrized(spec, R, count, seed, workers);
  if (spec.equations.size() != 1)
    raise(ErrorCode::BadArgument, "only single-equation implicit sampling is supported");
  return sample_hypersurface(spec.equations[0], R, count, seed, workers);
}

std::vector<ShellSample> sample_schedule(const VarietySpec& spec,
                                         const std::vector<double>& radii,
                                         int count, uint64_t seed, int workers) {
  std::vector<ShellSample> out;
  out.reserve(radii.size());
  for (size_t i = 0; i < radii.size(); ++i)
    out.push_back(sample_shell(spec, radii[i], count, hash_mix(seed, i), workers));
  return out;
}

std::string to_line_format(const ShellSample& sample) {
  std::string out;
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g%c", v, sep);
    out += buf;
  };
  for (const auto& pt : sample.points) {
    put(sample.R, ' ');
    for (const Complex& c : pt.z) {
      put(c.real(), ' ');
      put(c.imag(), ' ');
    }
    put(pt.residual, '\n');
  }
  return out;
}

GenericityReport genericity_probe(const VarietySpec& spec, const ShellSample& sample) {
  if (sample.points.empty()) raise(ErrorCode::BadArgument, "empty sample");
  const int n = spec.n;
  GenericityReport report;
  report.expected_rank = std::min(2 * spec.expected_dim, n);

  size_t limit = std::min<size_t>(sample.points.size(), 200);
  for (size_t idx = 0; idx < limit; ++idx) {
    const SamplePoint& pt = sample.points[idx];

    // Complex basis of the tangent space at pt.
    std::vector<Eigen::VectorXcd> basis;
    if (spec.mode == VarietySpec::Mode::Parametrized) {
      if (static_cast<int>(pt.params.size()) != spec.params) continue;
      for (int i = 0; i < spec.params; ++i) {
        double h = 1e-6 * (1.0 + std::abs(pt.params[static_cast<size_t>(i)]));
        auto tp = pt.params, tm = pt.params;
        tp[static_cast<size_t>(i)] += h;
        tm[static_cast<size_t>(i)] -= h;
        Eigen::VectorXcd col(n);
        bool ok = true;
        for (int j = 0; j < n; ++j) {
          auto a = try_eval(spec.map[static_cast<size_t>(j)], tp);
          auto b = try_eval(spec.map[static_cast<size_t>(j)], tm);
          if (!a || !b) {
            ok = false;
            break;
          }
          col(j) = (*a - *b) / (2.0 * h);
        }
        if (ok) basis.push_back(col);
      }
    } else {
      int m = static_cast<int>(spec.equations.size());
      Eigen::MatrixXcd J(m, n);
      bool ok = true;
      for (int r = 0; r < m && ok; ++r) {
        for (int j = 0; j < n && ok; ++j) {
          double h = 1e-6 * (1.0 + std::abs(pt.z[static_cast<size_t>(j)]));
          auto zp = pt.z, zm = pt.z;
          zp[static_cast<size_t>(j)] += h;
          zm[static_cast<size_t>(j)] -= h;
          auto a = try_eval(spec.equations[static_cast<size_t>(r)], zp);
          auto b = try_eval(spec.equations[static_cast<size_t>(r)], zm);
          if (!a || !b) ok = false;
          else J(r, j) = (*a - *b) / (2.0 * h);
        }
      }
      if (!ok) continue;
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(J, Eigen::ComputeFullV);
      for (int j = m; j < n; ++j) basis.push_back(svd.matrixV().col(j));
    }
    if (basis.empty()) continue;

    // Push {v, iv} through d Log: row j of d Log (z)[v] is Re(v_j / z_j).
    Eigen::MatrixXd M(n, 2 * static_cast<int>(basis.size()));
    for (size_t b = 0; b < basis.size(); ++b) {
      for (int j = 0; j < n; ++j) {
        Complex q = basis[b](j) / pt.z[static_cast<size_t>(j)];
        M(j, static_cast<int>(2 * b)) = q.real();
        M(j, static_cast<int>(2 * b + 1)) = -q.imag();
      }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    int rank = 0;
    double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > 1e-8 * smax) ++rank;
    report.ranks.push_back(rank);
  }

  if (!report.ranks.empty()) {
    int hits = 0;
    for (int r : report.ranks)
      if (r == report.expected_rank) ++hits;
    report.maximal_fraction = static_cast<double>(hits) / static_cast<double>(report.ranks.size());
  }
  return report;
}

EndsReport ends_at_direction(const std::vector<ShellSample>& samples,
                             const Direction& x, double eps) {
  if (samples.size() < 3) raise(ErrorCode::BadArgument, "need at least 3 shells");
  if (!(eps > 0.0)) raise(ErrorCode::BadArgument, "eps must be positive");

  EndsReport report;
  std::vector<std::vector<Vec>> last_clusters;
  for (size_t s = 0; s < samples.size(); ++s) {
    const ShellSample& shell = samples[s];
    std::vector<Vec> logs;      // full log coordinates in the cone
    std::vector<Vec> projected; // component orthogonal to x
    for (const auto& pt : shell.points) {
      Vec lg = log_map(pt.z);
      if (!lg.allFinite() || lg.norm() == 0.0) continue;
      if (angular_distance(direction_of(lg), x) > eps) continue;
      projected.push_back(lg - lg.dot(x.v) * x.v);
      logs.push_back(std::move(lg));
    }
    bool in_window = s + 3 >= samples.size();
    if (logs.empty()) {
      if (in_window)
        raise(ErrorCode::NoPointsNearDirection,
              "no sample directions within eps of x on shell R=" + std::to_string(shell.R));
      report.per_shell.push_back(0);
      continue;
    }

    double tau = std::min(0.02 * shell.R, 0.5);
    size_t m = logs.size();
    std::vector<size_t> parent(m);
    for (size_t i = 0; i < m; ++i) parent[i] = i;
    std::function<size_t(size_t)> find = [&](size_t a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    for (size_t i = 0; i < m; ++i)
      for (size_t j = i + 1; j < m; ++j)
        if ((projected[i] - projected[j]).norm() <= tau) parent[find(i)] = find(j);

    std::map<size_t, std::vector<size_t>> clusters;
    for (size_t i = 0; i < m; ++i) clusters[find(i)].push_back(i);
    report.per_shell.push_back(static_cast<int>(clusters.size()));

    if (s + 1 == samples.size()) {
      for (const auto& [root, members] : clusters) {
        Vec mean = Vec::Zero(x.n());
        for (size_t i : members) mean += logs[i];
        mean /= static_cast<double>(members.size());
        report.representatives.push_back(mean);
      }
      std::sort(report.representatives.begin(), report.representatives.end(),
                [](const Vec& a, const Vec& b) {
                  return std::lexicographical_compare(a.data(), a.data() + a.size(),
                                                      b.data(), b.data() + b.size());
                });
    }
  }

  size_t k = report.per_shell.size();
  report.ends = report.per_shell.back();
  report.stable = report.per_shell[k - 1] == report.per_shell[k - 2] &&
                  report.per_shell[k - 2] == report.per_shell[k - 3];
  return report;
}

}  // namespace trop
