#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>

#include "tropiscope/errors.hpp"
#include "tropiscope/limitset.hpp"
#include "tropiscope/rng.hpp"

using namespace trop;

namespace {

Expression pe(const char* text, int arity) { return parse_expression(text, arity); }

bool code_is(const std::function<void()>& fn, ErrorCode code) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

RatVec rv(std::vector<long long> x) {
  RatVec v(x.size());
  for (size_t i = 0; i < x.size(); ++i) v[i] = x[i];
  return v;
}

Direction dirn(std::vector<double> coords) {
  Vec v(coords.size());
  for (size_t i = 0; i < coords.size(); ++i) v[i] = coords[i];
  v /= v.norm();
  return Direction{v};
}

DirectionCloud cloud_of(const std::vector<Direction>& dirs, double R = 1.0) {
  DirectionCloud cloud;
  cloud.n = dirs.front().n();
  for (const auto& d : dirs) cloud.entries.push_back({d, R, 1.0});
  return cloud;
}

std::vector<Direction> blob(const Direction& center, int count, double spread, uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<Direction> out;
  for (int i = 0; i < count; ++i) {
    Vec v = center.v;
    for (int j = 0; j < v.size(); ++j) v[j] += rng.uniform(-spread, spread);
    out.push_back(Direction{v / v.norm()});
  }
  return out;
}

std::set<std::vector<long long>> slope_set(const SphericalComplex& S) {
  std::set<std::vector<long long>> out;
  for (const auto& cell : S.cells) {
    for (const auto& s : cell.slopes) out.insert(s.p);
  }
  return out;
}

/// Angular distance from d to the closed right half-circle {cos >= 0} in S^1.
double dist_to_right_half(const Direction& d) {
  double beta = std::atan2(d.v[1], d.v[0]);
  return std::max(0.0, std::abs(beta) - std::numbers::pi / 2);
}

LimitSetEstimate synthetic_estimate(std::vector<SphericalCell> cells, std::vector<double> dims,
                                    std::vector<bool> persistent, int n) {
  LimitSetEstimate est;
  est.complex.n = n;
  est.complex.cells = std::move(cells);
  est.cell_dims = std::move(dims);
  est.persistent = std::move(persistent);
  est.radii = {5, 20, 80};
  est.points_per_shell = 100;
  est.eps = 1e-2;
  return est;
}

SphericalCell vertex_cell_at(const Direction& d, std::vector<long long> slope, bool rational) {
  SphericalCell cell;
  cell.kind = SphericalCell::Kind::Vertex;
  cell.dim = 0;
  cell.samples = {d.v};
  cell.rational = rational;
  if (rational) {
    cell.slopes = {RationalSlope{slope}};
    cell.generators = {RationalSlope{slope}};
  }
  return cell;
}

const EstimateConfig kLineConfig = {10, 100, 3, 400, 11, 2, -1, -1};
const EstimateConfig kHyperbolaConfig = {5, 50, 3, 300, 5, 2, -1, -1};
const EstimateConfig kGraphConfig = {15, 150, 3, 1600, 9, 2, -1, -1};

}  // namespace

TEST_CASE("direction cloud collects directions past the cutoff") {
  auto spec = implicit_spec({pe("1+z1+z2", 2)}, 2);
  auto samples = sample_schedule(spec, {100.0}, 300, 11);

  auto cloud = direction_cloud(samples, 0.0);
  CHECK(cloud.n == 2);
  CHECK(cloud.seed == samples.front().seed);
  REQUIRE(cloud.entries.size() == 300);
  std::vector<Direction> expected = {dirn({-1, 0}), dirn({0, -1}), dirn({1, 1})};
  for (const auto& e : cloud.entries) {
    CHECK(e.R == 100.0);
    CHECK(e.weight == 1.0);
    double best = std::numbers::pi;
    for (const auto& x : expected) best = std::min(best, angular_distance(e.d, x));
    CHECK(best <= 2e-2);
  }

  CHECK(code_is([&] { direction_cloud(samples, 120.0); }, ErrorCode::EmptyAfterCutoff));
  CHECK(code_is([&] { direction_cloud({}, 1.0); }, ErrorCode::BadArgument));
  CHECK(code_is([&] { direction_cloud(samples, -1.0); }, ErrorCode::BadArgument));
}

TEST_CASE("clustering splits blobs and respects the linking radius") {
  std::vector<Direction> pts;
  for (int c = 0; c < 3; ++c) {
    Vec e = Vec::Zero(3);
    e[c] = 1;
    auto b = blob(Direction{e}, 40, 0.01, 100 + c);
    pts.insert(pts.end(), b.begin(), b.end());
  }

  auto comps = cluster_directions(cloud_of(pts), 0.1);
  REQUIRE(comps.size() == 3);
  for (const auto& comp : comps) {
    CHECK(comp.dirs.size() == 40);
    CHECK(comp.n == 3);
    CHECK(std::is_sorted(comp.dirs.begin(), comp.dirs.end(),
                         [](const Direction& a, const Direction& b) {
                           return std::lexicographical_compare(a.v.data(), a.v.data() + a.v.size(),
                                                               b.v.data(), b.v.data() + b.v.size());
                         }));
  }
  CHECK(comps[0].dirs.front().v[0] <= comps[1].dirs.front().v[0]);

  auto singletons = cluster_directions(cloud_of(pts), 0.0);
  CHECK(singletons.size() == pts.size());

  std::vector<Direction> arc;
  for (int i = 0; i < 200; ++i) arc.push_back(dirn({std::cos(0.01 * i), std::sin(0.01 * i)}));
  CHECK(cluster_directions(cloud_of(arc), 0.05).size() == 1);
  CHECK(cluster_directions(cloud_of(arc), 0.005).size() == 200);

  auto shuffled = pts;
  SplitMix64 rng(7);
  for (size_t i = shuffled.size(); i > 1; --i) {
    std::swap(shuffled[i - 1], shuffled[rng.next() % i]);
  }
  auto again = cluster_directions(cloud_of(shuffled), 0.1);
  REQUIRE(again.size() == comps.size());
  for (size_t c = 0; c < comps.size(); ++c) {
    REQUIRE(again[c].dirs.size() == comps[c].dirs.size());
    for (size_t i = 0; i < comps[c].dirs.size(); ++i) {
      CHECK((again[c].dirs[i].v - comps[c].dirs[i].v).norm() == 0.0);
    }
  }

  CHECK(code_is([&] { cluster_directions(DirectionCloud{}, 0.1); }, ErrorCode::BadArgument));
  CHECK(code_is([&] { cluster_directions(cloud_of(pts), -0.5); }, ErrorCode::BadArgument));
}

TEST_CASE("tight blobs classify as vertices") {
  DirectionComponent comp{2, blob(dirn({1, 1}), 150, 1e-3, 42), {}};
  comp.shell_R.assign(150, 50.0);
  auto got = classify_component(comp);
  CHECK(got.cell.kind == SphericalCell::Kind::Vertex);
  CHECK(got.cell.dim == 0);
  CHECK(got.dim_estimate == 0.0);
  CHECK(!got.cell.low_confidence);
  CHECK(got.cell.rational);
  REQUIRE(got.cell.slopes.size() == 1);
  CHECK(got.cell.slopes[0].p == std::vector<long long>{1, 1});
  REQUIRE(got.cell.samples.size() == 1);
  CHECK(angular_distance(Direction{got.cell.samples[0]}, dirn({1, 1})) <= 2e-3);

  DirectionComponent tiny{2, blob(dirn({0, -1}), 5, 1e-3, 43), std::vector<double>(5, 50.0)};
  auto small = classify_component(tiny);
  CHECK(small.cell.kind == SphericalCell::Kind::Vertex);
  CHECK(small.cell.low_confidence);

  DirectionComponent steep{2, blob(dirn({24, 1}), 60, 1e-4, 44), std::vector<double>(60, 50.0)};
  auto irr = classify_component(steep);
  CHECK(irr.cell.kind == SphericalCell::Kind::Vertex);
  CHECK(!irr.cell.rational);
  CHECK(irr.cell.slopes.empty());

  CHECK(code_is([&] { classify_component(DirectionComponent{2, {}, {}}); },
                ErrorCode::BadArgument));
}

TEST_CASE("half circles classify as arcs with rational endpoints") {
  std::vector<Direction> pts;
  for (int i = 0; i <= 300; ++i) {
    double a = -std::numbers::pi / 2 + std::numbers::pi * i / 300.0;
    pts.push_back(dirn({std::cos(a), std::sin(a)}));
  }
  auto got = classify_component({2, pts, std::vector<double>(pts.size(), 50.0)});
  CHECK(got.cell.kind == SphericalCell::Kind::Arc);
  CHECK(got.cell.dim == 1);
  CHECK(got.dim_estimate == 1.0);
  CHECK(got.cell.rational);
  std::set<std::vector<long long>> ends;
  for (const auto& s : got.cell.slopes) ends.insert(s.p);
  CHECK(ends == std::set<std::vector<long long>>{{0, -1}, {0, 1}});
  REQUIRE(got.cell.samples.size() == 3);
  CHECK(std::abs(std::abs(got.cell.samples[0][1]) - 1.0) <= 1e-4);
  CHECK(std::abs(std::abs(got.cell.samples[1][1]) - 1.0) <= 1e-4);
  CHECK(got.cell.samples[2][0] >= 0.999);

  // the same arc tilted slightly out of a coordinate plane in S^2
  std::vector<Direction> tilted;
  SplitMix64 rng(11);
  for (int i = 0; i <= 300; ++i) {
    double a = -std::numbers::pi / 2 + std::numbers::pi * i / 300.0;
    tilted.push_back(dirn({std::cos(a), std::sin(a), rng.uniform(-3e-3, 3e-3)}));
  }
  auto still = classify_component({3, tilted, std::vector<double>(tilted.size(), 50.0)});
  CHECK(still.cell.kind == SphericalCell::Kind::Arc);
}

TEST_CASE("patches classify as two dimensional cells") {
  std::vector<Direction> pts;
  for (int i = 0; i < 45; ++i) {
    for (int j = 0; j < 45; ++j) {
      pts.push_back(dirn({1.0, -0.45 + 0.9 * i / 44.0, -0.45 + 0.9 * j / 44.0}));
    }
  }
  auto got = classify_component({3, pts, std::vector<double>(pts.size(), 50.0)});
  CHECK(got.cell.kind == SphericalCell::Kind::Cell);
  CHECK(got.cell.dim == 2);
  CHECK(got.dim_estimate >= 1.75);
  CHECK(got.dim_estimate <= 2.25);
  CHECK(!got.cell.rational);
  CHECK(!got.cell.low_confidence);

  auto sparse = classify_component(
      {3, std::vector<Direction>(pts.begin(), pts.begin() + 50), std::vector<double>(50, 50.0)});
  CHECK(sparse.cell.low_confidence);
}

TEST_CASE("box counting dimension of reference sets") {
  std::vector<Direction> blobs;
  for (int c = 0; c < 3; ++c) {
    Direction center = c == 0 ? dirn({1, 0}) : (c == 1 ? dirn({0, 1}) : dirn({-1, 0}));
    auto b = blob(center, 40, 1e-4, 500 + c);
    blobs.insert(blobs.end(), b.begin(), b.end());
  }
  double d0 = box_counting_dim(blobs, {0.5, 0.25, 0.125});
  CHECK(std::abs(d0) <= 0.1);

  std::vector<Direction> circle;
  for (int i = 0; i < 10000; ++i) {
    double a = 2 * std::numbers::pi * i / 10000.0;
    circle.push_back(dirn({std::cos(a), std::sin(a)}));
  }
  double d1 = box_counting_dim(circle, {0.2, 0.1, 0.05, 0.025});
  CHECK(std::abs(d1 - 1.0) <= 0.2);

  std::vector<Direction> patch;
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 100; ++j) {
      patch.push_back(dirn({1.0, -0.45 + 0.9 * i / 99.0, -0.45 + 0.9 * j / 99.0}));
    }
  }
  double d2 = box_counting_dim(patch, {0.1, 0.05, 0.025});
  CHECK(std::abs(d2 - 2.0) <= 0.25);

  std::vector<Direction> few(blobs.begin(), blobs.begin() + 99);
  CHECK(code_is([&] { box_counting_dim(few, {0.5, 0.25, 0.125}); }, ErrorCode::BadArgument));
  CHECK(code_is([&] { box_counting_dim(blobs, {0.5, 0.25}); }, ErrorCode::BadArgument));
  CHECK(code_is([&] { box_counting_dim(blobs, {0.5, 0.25, 0.25}); }, ErrorCode::DegenerateScales));
  CHECK(code_is([&] { box_counting_dim(blobs, {0.5, 0.25, 0.0}); }, ErrorCode::DegenerateScales));
  CHECK(code_is([&] { box_counting_dim(blobs, {0.5, 0.25, -0.1}); }, ErrorCode::DegenerateScales));
}

TEST_CASE("limit set estimate recovers the tropical line") {
  auto spec = implicit_spec({pe("1+z1+z2", 2)}, 2);
  auto est = estimate_limit_set(spec, kLineConfig);

  CHECK(est.complex.n == 2);
  CHECK(est.radii.size() == 3);
  CHECK(est.eps > 0);
  REQUIRE(est.complex.cells.size() == 3);
  REQUIRE(est.cell_dims.size() == 3);
  REQUIRE(est.persistent.size() == 3);
  std::vector<Direction> expected = {dirn({-1, 0}), dirn({0, -1}), dirn({1, 1})};
  for (size_t i = 0; i < est.complex.cells.size(); ++i) {
    const auto& cell = est.complex.cells[i];
    CHECK(cell.kind == SphericalCell::Kind::Vertex);
    CHECK(cell.rational);
    CHECK(!cell.low_confidence);
    CHECK(est.persistent[i]);
    CHECK(angular_distance(Direction{cell.samples[0]}, expected[i]) <= 1e-2);
  }
  CHECK(slope_set(est.complex) ==
        std::set<std::vector<long long>>{{-1, 0}, {0, -1}, {1, 1}});
  for (const auto& e : est.cloud.entries) CHECK(e.R == est.radii.back());
  CHECK(est.oracle_checked);
  CHECK(est.oracle_agrees);
  CHECK(est.oracle.cells.size() == 3);
}

TEST_CASE("hyperbola estimate gives two exact vertices") {
  auto spec = implicit_spec({pe("z1*z2-1", 2)}, 2);
  auto est = estimate_limit_set(spec, kHyperbolaConfig);

  REQUIRE(est.complex.cells.size() == 2);
  for (const auto& cell : est.complex.cells) {
    CHECK(cell.kind == SphericalCell::Kind::Vertex);
    CHECK(cell.rational);
  }
  CHECK(slope_set(est.complex) == std::set<std::vector<long long>>{{-1, 1}, {1, -1}});
  CHECK(angular_distance(Direction{est.complex.cells[0].samples[0]}, dirn({-1, 1})) <= 1e-6);
  CHECK(angular_distance(Direction{est.complex.cells[1].samples[0]}, dirn({1, -1})) <= 1e-6);
  CHECK(est.oracle_checked);
  CHECK(est.oracle_agrees);
}

TEST_CASE("exponential graph estimate contains an arc and the leftward vertex") {
  auto spec = parametrized_spec({pe("t1", 1), pe("exp(t1)", 1)}, 2);
  auto est = estimate_limit_set(spec, kGraphConfig);

  // The arc may split where the point density thins out, so look at the
  // union of arc endpoints: its extremes are the true endpoints (0, +-1).
  bool any_arc = false;
  bool leftward = false;
  double to_north = std::numbers::pi;
  double to_south = std::numbers::pi;
  for (const auto& cell : est.complex.cells) {
    if (cell.kind == SphericalCell::Kind::Arc) {
      any_arc = true;
      for (int end = 0; end < 2; ++end) {
        to_north =
            std::min(to_north, angular_distance(Direction{cell.samples[end]}, dirn({0, 1})));
        to_south =
            std::min(to_south, angular_distance(Direction{cell.samples[end]}, dirn({0, -1})));
      }
    }
    if (cell.kind == SphericalCell::Kind::Vertex &&
        angular_distance(Direction{cell.samples[0]}, dirn({-1, 0})) <= 5e-2) {
      leftward = true;
    }
  }
  CHECK(any_arc);
  CHECK(leftward);
  CHECK(to_north <= 5e-2);
  CHECK(to_south <= 5e-2);

  // Hausdorff agreement with the known limit set: the closed right
  // half-circle plus the single direction (-1, 0).
  for (const auto& e : est.cloud.entries) {
    double d = std::min(dist_to_right_half(e.d), angular_distance(e.d, dirn({-1, 0})));
    CHECK(d <= 5e-2);
  }
  // The parametrization reaches the pole (1, 0) only logarithmically, so the
  // tight-density probes stay away from it and the pole neighborhood gets a
  // looser radius of its own.
  std::vector<Direction> probes = {dirn({-1, 0})};
  for (int i = 0; i <= 16; ++i) {
    double a = 0.35 + (std::numbers::pi / 2 - 0.35) * i / 16.0;
    probes.push_back(dirn({std::cos(a), std::sin(a)}));
    probes.push_back(dirn({std::cos(a), -std::sin(a)}));
  }
  for (const auto& p : probes) {
    double best = std::numbers::pi;
    for (const auto& e : est.cloud.entries) best = std::min(best, angular_distance(p, e.d));
    CHECK(best <= 5e-2);
  }
  double to_pole = std::numbers::pi;
  for (const auto& e : est.cloud.entries)
    to_pole = std::min(to_pole, angular_distance(e.d, dirn({1, 0})));
  CHECK(to_pole <= 0.25);

  CHECK(!est.oracle_checked);
  CHECK(*std::max_element(est.cell_dims.begin(), est.cell_dims.end()) == 1.0);
}

TEST_CASE("verdicts on the reference varieties") {
  auto line = estimate_limit_set(implicit_spec({pe("1+z1+z2", 2)}, 2), kLineConfig);
  auto vline = algebraicity_verdict(line, 1);
  CHECK(vline.decision == Decision::AlgebraicConsistent);
  CHECK(vline.dim_estimate == 0.0);
  CHECK(vline.balance.balanced);
  CHECK(vline.homogeneous);
  CHECK(vline.oracle_checked);
  CHECK(vline.oracle_agrees);
  CHECK(vline.shells == 3);

  auto hyp = estimate_limit_set(implicit_spec({pe("z1*z2-1", 2)}, 2), kHyperbolaConfig);
  CHECK(algebraicity_verdict(hyp, 1).decision == Decision::AlgebraicConsistent);

  auto graph =
      estimate_limit_set(parametrized_spec({pe("t1", 1), pe("exp(t1)", 1)}, 2), kGraphConfig);
  auto vgraph = algebraicity_verdict(graph, 1);
  CHECK(vgraph.decision == Decision::NotAlgebraic);
  CHECK(vgraph.dim_estimate == 1.0);
  CHECK(!vgraph.oracle_checked);

  CHECK(code_is([&] { algebraicity_verdict(line, 0); }, ErrorCode::BadArgument));
  CHECK(code_is([&] { algebraicity_verdict(line, 2); }, ErrorCode::BadArgument));
  auto shallow = line;
  shallow.radii = {10, 100};
  CHECK(code_is([&] { algebraicity_verdict(shallow, 1); }, ErrorCode::BadArgument));
}

TEST_CASE("verdict navigates shaky and ambiguous estimates") {
  auto rational_vertex = vertex_cell_at(dirn({1, 0}), {1, 0}, true);

  auto drifting = synthetic_estimate({rational_vertex}, {0.0}, {false}, 2);
  CHECK(algebraicity_verdict(drifting, 1).decision == Decision::Inconclusive);

  auto irrational = synthetic_estimate(
      {vertex_cell_at(dirn({24, 1}), {}, false)}, {0.0}, {true}, 2);
  CHECK(algebraicity_verdict(irrational, 1).decision == Decision::NotAlgebraic);

  SphericalCell patch;
  patch.kind = SphericalCell::Kind::Cell;
  patch.dim = 2;
  patch.rational = false;
  patch.samples = {dirn({1, 0, 0}).v, dirn({1, 0.3, 0.2}).v, dirn({1, -0.2, 0.25}).v};
  auto ambiguous = synthetic_estimate(
      {vertex_cell_at(dirn({-1, 0, 0}), {-1, 0, 0}, true), patch}, {0.0, 1.5}, {true, true}, 3);
  CHECK(algebraicity_verdict(ambiguous, 2).decision == Decision::Inconclusive);

  SphericalCell arc;
  arc.kind = SphericalCell::Kind::Arc;
  arc.dim = 1;
  arc.slopes = {RationalSlope{{0, 1, 0}}, RationalSlope{{0, -1, 0}}};
  arc.generators = arc.slopes;
  arc.samples = {dirn({0, 1, 0}).v, dirn({0, -1, 0}).v, dirn({1, 0, 0}).v};
  auto curve = synthetic_estimate({arc}, {1.0}, {true}, 3);
  CHECK(algebraicity_verdict(curve, 1).decision == Decision::NotAlgebraic);
  CHECK(algebraicity_verdict(curve, 2).decision == Decision::AlgebraicConsistent);
}

TEST_CASE("verdict json lists decision cells balance and diagnostics") {
  auto est = estimate_limit_set(implicit_spec({pe("1+z1+z2", 2)}, 2), kLineConfig);
  auto verdict = algebraicity_verdict(est, 1);
  auto j = nlohmann::json::parse(to_json_string(verdict));

  CHECK(j["decision"] == "algebraic-consistent");
  CHECK(j["dim_estimate"] == 0.0);
  REQUIRE(j["cells"].size() == 3);
  CHECK(j["cells"][0]["kind"] == "vertex");
  CHECK(j["cells"][0]["dim"] == 0);
  CHECK(j["cells"][0]["rational"] == true);
  CHECK(j["cells"][0]["low_confidence"] == false);
  CHECK(j["cells"][0]["slopes"][0] == std::vector<long long>{-1, 0});
  CHECK(j["cells"][0]["samples"][0].size() == 2);
  CHECK(j["balance"]["balanced"] == true);
  CHECK(j["balance"]["span_dim"] == 2);
  CHECK(j["diagnostics"]["shells"] == 3);
  CHECK(j["diagnostics"]["points_per_shell"] == 400);
  CHECK(j["diagnostics"]["oracle_checked"] == true);
  CHECK(j["diagnostics"]["oracle_agrees"] == true);
  CHECK(j["diagnostics"]["eps_point"] == 2e-2);
  CHECK(j["diagnostics"]["tol_arc"] == 1e-2);

  CHECK(std::string(decision_name(Decision::NotAlgebraic)) == "not-algebraic");
  CHECK(std::string(decision_name(Decision::Inconclusive)) == "inconclusive");
}

TEST_CASE("newton bound certification of polynomials") {
  auto line = pe("1+z1+z2", 2);
  auto est = estimate_limit_set(implicit_spec({line}, 2), kLineConfig);
  auto cert = certify_newton_bound(line, est.complex, 4);
  REQUIRE(cert.slopes.size() == 3);
  CHECK(cert.offsets == std::vector<double>{0.0, 0.0, 1.0});
  CHECK(!cert.refuted);
  CHECK(!cert.tail_nonzero);
  CHECK(cert.certified);
  CHECK(is_compact(cert.bound.body));
  RatMat triangle = {rv({0, 0}), rv({0, 1}), rv({1, 0})};
  CHECK(cert.bound.body.points == triangle);

  auto hyp = pe("z1*z2-1", 2);
  auto hest = estimate_limit_set(implicit_spec({hyp}, 2), kHyperbolaConfig);
  auto hcert = certify_newton_bound(hyp, hest.complex, 3);
  CHECK(!is_compact(hcert.bound.body));
  CHECK(hcert.bound.compact_within_span);
  CHECK(!hcert.refuted);
  CHECK(hcert.certified);

  SphericalComplex expo;
  expo.n = 1;
  expo.cells = {vertex_cell_at(dirn({1}), {1}, true)};
  std::vector<size_t> counts;
  for (long long D : {4, 6, 8}) {
    auto ecert = certify_newton_bound(pe("exp(z1)", 1), expo, D);
    CHECK(ecert.offsets == std::vector<double>{static_cast<double>(D)});
    CHECK(ecert.refuted);
    CHECK(ecert.tail_nonzero);
    CHECK(!ecert.certified);
    counts.push_back(ecert.violations[0].size());
  }
  CHECK(counts == std::vector<size_t>{4, 6, 8});

  SphericalComplex with_arc = est.complex;
  with_arc.cells[0].kind = SphericalCell::Kind::Arc;
  CHECK(code_is([&] { certify_newton_bound(line, with_arc, 4); }, ErrorCode::BadArgument));
  CHECK(code_is([&] { certify_newton_bound(line, est.complex, 0); }, ErrorCode::BadArgument));
  CHECK(code_is([&] { certify_newton_bound(pe("z1^-1+z2", 2), est.complex, 4); },
                ErrorCode::NegativePowerInEntireContext));
}

TEST_CASE("property: random polynomial estimates match the exact tropical vertices") {
  SplitMix64 rng(424242);
  for (int trial = 0; trial < 25; ++trial) {
    int terms = 2 + static_cast<int>(rng.next() % 5);
    std::set<std::pair<long long, long long>> support;
    while (static_cast<int>(support.size()) < terms) {
      support.insert({static_cast<long long>(rng.next() % 7) - 3,
                      static_cast<long long>(rng.next() % 7) - 3});
    }
    std::string text;
    for (const auto& [a, b] : support) {
      std::string term;
      if (a != 0) term += "z1^" + std::to_string(a);
      if (b != 0) term += (term.empty() ? "" : "*") + ("z2^" + std::to_string(b));
      if (term.empty()) term = "1";
      bool negative = rng.next() % 2 == 0;
      if (text.empty()) {
        text = negative ? "-" + term : term;
      } else {
        text += negative ? "-" + term : "+" + term;
      }
    }
    CAPTURE(text);
    auto f = pe(text.c_str(), 2);

    auto oracle = tropical_limit_set(to_laurent(f));
    std::vector<Direction> exact;
    for (const auto& cell : oracle.cells) exact.push_back(Direction{cell.samples.front()});

    EstimateConfig config = {15, 150, 3, 500, hash_mix(7, trial), 2, -1, -1};
    auto est = estimate_limit_set(implicit_spec({f}, 2), config);
    CHECK(est.oracle_agrees);

    double worst = 0;
    for (const auto& cell : est.complex.cells) {
      for (const auto& s : cell.samples) {
        double best = std::numbers::pi;
        for (const auto& x : exact) best = std::min(best, angular_distance(Direction{s}, x));
        worst = std::max(worst, best);
      }
    }
    for (const auto& x : exact) {
      double best = std::numbers::pi;
      for (const auto& cell : est.complex.cells) {
        for (const auto& s : cell.samples) {
          best = std::min(best, angular_distance(Direction{s}, x));
        }
      }
      worst = std::max(worst, best);
    }
    CHECK(worst <= 2e-2);
  }
}

TEST_CASE("verdict is stable under schedule refinement") {
  auto run = [](const VarietySpec& spec, EstimateConfig config, int shells) {
    config.shells = shells;
    return algebraicity_verdict(estimate_limit_set(spec, config), 1).decision;
  };

  auto line = implicit_spec({pe("1+z1+z2", 2)}, 2);
  EstimateConfig lc = {10, 100, 3, 300, 13, 2, -1, -1};
  CHECK(run(line, lc, 3) == Decision::AlgebraicConsistent);
  CHECK(run(line, lc, 5) == Decision::AlgebraicConsistent);

  auto hyp = implicit_spec({pe("z1*z2-1", 2)}, 2);
  EstimateConfig hc = {5, 50, 3, 300, 13, 2, -1, -1};
  CHECK(run(hyp, hc, 3) == Decision::AlgebraicConsistent);
  CHECK(run(hyp, hc, 5) == Decision::AlgebraicConsistent);

  auto graph = parametrized_spec({pe("t1", 1), pe("exp(t1)", 1)}, 2);
  EstimateConfig gc = {15, 150, 3, 500, 13, 2, -1, -1};
  CHECK(run(graph, gc, 3) == Decision::NotAlgebraic);
  CHECK(run(graph, gc, 5) == Decision::NotAlgebraic);
}

TEST_CASE("dimension estimate does not drop as the linking radius shrinks") {
  auto spec = parametrized_spec({pe("t1", 1), pe("exp(t1)", 1)}, 2);
  auto base = estimate_limit_set(spec, kGraphConfig);
  double prev = -1;
  for (double eps : {base.eps, base.eps / 2, base.eps / 4}) {
    EstimateConfig config = kGraphConfig;
    config.eps = eps;
    auto est = estimate_limit_set(spec, config);
    double top = *std::max_element(est.cell_dims.begin(), est.cell_dims.end());
    CHECK(top >= prev - 1e-9);
    prev = top;
  }
}

TEST_CASE("monomial factors do not change the verdict") {
  EstimateConfig config = kLineConfig;
  auto plain = estimate_limit_set(implicit_spec({pe("1+z1+z2", 2)}, 2), config);
  auto scaled = estimate_limit_set(implicit_spec({pe("z1+z1^2+z1*z2", 2)}, 2), config);

  CHECK(slope_set(plain.complex) == slope_set(scaled.complex));
  auto v1 = algebraicity_verdict(plain, 1);
  auto v2 = algebraicity_verdict(scaled, 1);
  CHECK(v1.decision == v2.decision);
  CHECK(v1.dim_estimate == v2.dim_estimate);
  CHECK(v2.oracle_checked);
  CHECK(v2.oracle_agrees);
}
