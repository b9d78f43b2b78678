#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "qcurv/greenfn.hpp"

using namespace qcurv;
using Catch::Approx;

namespace {

ModelPtr torus(int n) {
  ModelSpec s;
  s.kind = ModelKind::torus;
  s.n = n;
  return make_model(s);
}
ModelPtr sphere(int lmax) {
  ModelSpec s;
  s.kind = ModelKind::sphere;
  s.l_max = lmax;
  return make_model(s);
}

double eval_at(const ModelPtr& m, const Field& f, const std::array<int, 4>& idx) {
  return f.to_physical().values()[m->torus_flat(idx)];
}

}  // namespace

TEST_CASE("torus Green coefficient at the first mode is 1/pi^2", "[greenfn]") {
  auto m = torus(16);
  Field g = green_function(m, Point::torus(0, 0, 0, 0));
  Field spec = g.to_spectral();
  auto* c = reinterpret_cast<const std::complex<double>*>(spec.values().data());
  // storage index (1,0,0,0) with the half axis last
  const int n = 16, nh = 9;
  std::size_t idx = ((std::size_t(1) * n + 0) * n + 0) * nh + 0;
  REQUIRE(c[idx].real() == Approx(1.0 / kPiSq).epsilon(1e-12));
  REQUIRE(std::abs(c[idx].imag()) < 1e-15);
}

TEST_CASE("Green functions have zero mean at every resolution", "[greenfn]") {
  for (int n : {16, 32}) {
    auto m = torus(n);
    Field g = green_function(m, Point::torus(1, 2, 3, 4));
    REQUIRE(std::abs(integrate(m, g)) < 1e-10);
  }
  for (int lmax : {32, 64}) {
    auto m = sphere(lmax);
    Field g = green_function(m, Point::pole());
    REQUIRE(std::abs(integrate(m, g)) < 1e-10);
  }
}

TEST_CASE("torus Green function is symmetric in its two points", "[greenfn]") {
  auto m = torus(16);
  Point p = Point::torus(2, 0, 5, 1), q = Point::torus(9, 14, 3, 7);
  Field gp = green_function(m, p);
  Field gq = green_function(m, q);
  REQUIRE(eval_at(m, gp, q.index) == Approx(eval_at(m, gq, p.index)).epsilon(1e-10));
}

TEST_CASE("sphere points other than the pole are rejected", "[greenfn]") {
  auto m = sphere(32);
  REQUIRE_THROWS_AS(green_function(m, Point::sphere_node(5)), std::invalid_argument);
}

TEST_CASE("torus expansion has vanishing linear terms", "[greenfn]") {
  auto m = torus(32);
  Field g = green_function(m, Point::torus(0, 0, 0, 0));
  GreenExpansion fit = expansion_fit(m, g, Point::torus(0, 0, 0, 0));
  for (double a : fit.a) REQUIRE(std::abs(a) < 1e-6);
  // off-grid-point center: lattice reflection symmetry still applies
  GreenExpansion fit2 = expansion_fit(m, green_function(m, Point::torus(5, 9, 2, 30)),
                                      Point::torus(5, 9, 2, 30));
  for (double a : fit2.a) REQUIRE(std::abs(a) < 1e-6);
  REQUIRE(fit.s0 == Approx(fit2.s0).epsilon(1e-10));
}

TEST_CASE("sphere expansion has vanishing linear terms by symmetry", "[greenfn]") {
  auto m = sphere(64);
  Field g = green_function(m, Point::pole());
  GreenExpansion fit = expansion_fit(m, g, Point::pole());
  for (double a : fit.a) REQUIRE(a == 0.0);
  REQUIRE(fit.a_sym[0][0] == fit.a_sym[1][1]);
}

TEST_CASE("torus expansion constant is stable across resolutions", "[greenfn]") {
  const std::pair<double, double> window{0.125, 0.25};
  auto m1 = torus(24);
  auto m2 = torus(48);
  GreenExpansion f1 =
      expansion_fit(m1, green_function(m1, Point::torus(0, 0, 0, 0)),
                    Point::torus(0, 0, 0, 0), window);
  GreenExpansion f2 =
      expansion_fit(m2, green_function(m2, Point::torus(0, 0, 0, 0)),
                    Point::torus(0, 0, 0, 0), window);
  REQUIRE(relative_error(f1.s0, f2.s0) < 1e-3);
}

TEST_CASE("fit residual is small at reference resolution", "[greenfn]") {
  auto m = sphere(128);
  Field g = green_function(m, Point::pole());
  GreenExpansion fit = expansion_fit(m, g, Point::pole());
  REQUIRE(fit.residual <= 1e-3 * std::abs(fit.s0));
}

TEST_CASE("near-diagonal log coefficient is -2", "[greenfn]") {
  FitOptions fo;
  fo.fit_log_term = true;
  auto t = torus(32);
  GreenExpansion ft = expansion_fit(t, green_function(t, Point::torus(0, 0, 0, 0)),
                                    Point::torus(0, 0, 0, 0), {0.125, 0.25}, fo);
  REQUIRE(*ft.log_coef == Approx(-2.0).epsilon(0.01));
  auto s = sphere(64);
  GreenExpansion fs =
      expansion_fit(s, green_function(s, Point::pole()), Point::pole(), {0.2, 0.6}, fo);
  REQUIRE(*fs.log_coef == Approx(-2.0).epsilon(0.01));
}

TEST_CASE("fit window preconditions", "[greenfn]") {
  auto m = torus(32);
  Field g = green_function(m, Point::torus(0, 0, 0, 0));
  Point p = Point::torus(0, 0, 0, 0);
  REQUIRE_THROWS_AS(expansion_fit(m, g, p, {0.01, 0.2}), std::invalid_argument);
  REQUIRE_THROWS_AS(expansion_fit(m, g, p, {0.125, 0.3}), std::invalid_argument);
  auto s = sphere(16);
  Field gs = green_function(s, Point::pole());
  // narrow window: fewer than 8 colatitude nodes
  REQUIRE_THROWS_WITH(expansion_fit(s, gs, Point::pole(), {0.3, 0.35}),
                      Catch::Matchers::ContainsSubstring("window too narrow"));
}

TEST_CASE("conformal Green shift vanishes for v = 0", "[greenfn]") {
  auto m = sphere(64);
  GreenShiftReport rep = green_conformal_check(m, Field::zero(m), Point::pole(),
                                               {0.1, 0.3});
  REQUIRE(rep.sup_mod_const < 1e-9);
  REQUIRE(std::abs(rep.s0_discrepancy) < 1e-9);
}

TEST_CASE("constant conformal factor shifts the Green function by a constant",
          "[greenfn]") {
  auto m = sphere(64);
  const double c = 0.17;
  GreenShiftReport rep =
      green_conformal_check(m, Field::constant(m, c), Point::pole(), {0.1, 0.3});
  REQUIRE(rep.sup_mod_const < 1e-10);
  REQUIRE(rep.const_shift == Approx(c).margin(1e-9));
  REQUIRE(std::abs(rep.s0_discrepancy) < 1e-6);
}

TEST_CASE("random zonal factors: Gt = G - v modulo constants, St0 = S0 + v(p)",
          "[greenfn]") {
  auto m = sphere(256);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Field v = band_limited_field(m, 300 + seed);
    v *= 0.1 / v.max_abs();
    GreenShiftReport rep = green_conformal_check(m, v, Point::pole());
    REQUIRE(rep.sup_mod_const < 1e-6);
    REQUIRE(std::abs(rep.s0_discrepancy) < 1e-3);
  }
}

TEST_CASE("conformal combination of Green data is invariant", "[greenfn]") {
  // 2 int Q~ G~ dV~ - 16 pi^2 S~0 = 2 int Q G dV - 16 pi^2 S0 - int v P v
  auto m = sphere(256);
  Field v = band_limited_field(m, 77);
  v *= 0.1 / v.max_abs();
  auto tilted = with_conformal_factor(m, v);

  Field g = green_function(m, Point::pole());
  GreenExpansion fit_b = expansion_fit(m, g, Point::pole(), {0.04, 0.12});
  double rhs = 2.0 * integrate(m, hadamard(q_field(m).q, g)) - 16.0 * kPiSq * fit_b.s0 -
               energy_pairing(m, v);

  Field gt = green_function(tilted, Point::pole());
  Field gt_base(m, gt.values());
  GreenExpansion fit_t = expansion_fit(m, gt_base, Point::pole(), {0.04, 0.12});
  double vp = m->zonal_series_at(v.to_spectral().values(), 0.0);
  double s0_t = fit_t.s0 + 2.0 * vp;
  double lhs =
      2.0 * integrate(tilted, hadamard(q_field(tilted).q, gt)) - 16.0 * kPiSq * s0_t;
  REQUIRE(lhs == Approx(rhs).margin(0.2));
}
