#include <catch_amalgamated.hpp>

#include <cmath>

#include "qcurv/variational.hpp"

using namespace qcurv;
using Catch::Approx;

namespace {

ModelPtr torus(int n = 16) {
  ModelSpec s;
  s.kind = ModelKind::torus;
  s.n = n;
  return make_model(s);
}
ModelPtr sphere(int lmax = 32) {
  ModelSpec s;
  s.kind = ModelKind::sphere;
  s.l_max = lmax;
  return make_model(s);
}

}  // namespace

TEST_CASE("II at zero on the round sphere", "[variational]") {
  auto m = sphere();
  Field qt = Field::constant(m, 3.0);
  double got = II_value(m, qt, Field::zero(m));
  REQUIRE(relative_error(got, -kEightPiSq * std::log(kEightPiSq)) < 1e-12);
  REQUIRE(got == Approx(-344.97).margin(0.02));
}

TEST_CASE("functionals are invariant under constant shifts", "[variational]") {
  auto m = sphere();
  Field qt = Field::constant(m, 3.0);
  Field u = band_limited_field(m, 12);
  for (double c : {0.7, -1.3}) {
    Field uc = u;
    uc.shift(c);
    REQUIRE(std::abs(II_value(m, qt, uc) - II_value(m, qt, u)) <
            1e-10 * std::abs(II_value(m, qt, u)));
    REQUIRE(std::abs(II_eps_value(m, qt, 2.0, uc) - II_eps_value(m, qt, 2.0, u)) <
            1e-10 * std::abs(II_eps_value(m, qt, 2.0, u)));
  }
}

TEST_CASE("vanishing prescribed curvature is rejected", "[variational]") {
  auto m = sphere();
  REQUIRE_THROWS_AS(II_value(m, Field::zero(m), Field::zero(m)), std::invalid_argument);
}

TEST_CASE("regularized functional interpolates", "[variational]") {
  auto m = sphere();
  Field qt = Field::constant(m, 3.0);
  Field u = band_limited_field(m, 3);
  REQUIRE(relative_error(II_eps_value(m, qt, 0.0, u), II_value(m, qt, u)) < 1e-12);
  double expect = -(kEightPiSq - 1.0) * std::log(kEightPiSq);
  REQUIRE(relative_error(II_eps_value(m, qt, 1.0, Field::zero(m)), expect) < 1e-13);
}

TEST_CASE("eps difference identity in the int Q u = 0 gauge", "[variational]") {
  auto m = sphere();
  Field qt = Field::constant(m, 3.0);
  Field u = band_limited_field(m, 21);  // mean-zero, and Q is constant
  double mass = functional_mass(m, qt, u);
  double lhs = II_eps_value(m, qt, 0.5, u) - II_eps_value(m, qt, 2.5, u);
  double rhs = (0.5 - 2.5) * std::log(mass);
  REQUIRE(lhs == Approx(rhs).margin(1e-10 * std::abs(rhs)));
}

TEST_CASE("gradient vanishes at the constant solution", "[variational]") {
  auto m = sphere();
  Field g = II_eps_gradient(m, Field::constant(m, 3.0), 1.0, Field::zero(m));
  REQUIRE(g.max_abs() < 1e-10);
}

TEST_CASE("gradient matches finite differences at order two", "[variational]") {
  auto m = torus();
  Field qt = map_field(Field::zero(m), [](double) { return 0.0; });
  {
    std::vector<double> vals(m->sample_count());
    for (std::size_t i = 0; i < vals.size(); ++i)
      vals[i] = kEightPiSq * (1.0 + 0.3 * std::cos(2.0 * kPi * m->torus_coord(i)[0]));
    qt = Field(m, std::move(vals));
  }
  const double eps = 2.0;
  Field u = band_limited_field(m, 4);
  u *= 0.3 / u.max_abs();
  Field phi = band_limited_field(m, 5);
  phi *= 6.5 / phi.max_abs();  // large direction keeps the cubic term above roundoff
  Field grad = II_eps_gradient(m, qt, eps, u);
  const double exact = integrate(m, hadamard(grad, phi));
  auto fd = [&](double t) {
    Field up = u, um = u;
    Field tphi = phi;
    tphi *= t;
    up += tphi;
    um -= tphi;
    return (II_eps_value(m, qt, eps, up) - II_eps_value(m, qt, eps, um)) / (2.0 * t);
  };
  double e1 = std::abs(fd(1e-4) - exact);
  double e2 = std::abs(fd(1e-5) - exact);
  double order = std::log10(e1 / e2);
  REQUIRE(order >= 1.9);
}

TEST_CASE("gradient has zero mean", "[variational]") {
  auto m = sphere();
  Field qt = Field::constant(m, 3.0);
  for (std::uint64_t s = 0; s < 5; ++s) {
    Field u = band_limited_field(m, 40 + s);
    Field g = II_eps_gradient(m, qt, 1.5, u);
    REQUIRE(std::abs(integrate(m, g)) < 1e-11 * std::max(1.0, g.max_abs()));
  }
}

TEST_CASE("descent reaches the constant minimizer on the round sphere",
          "[variational]") {
  auto m = sphere();
  Field qt = Field::constant(m, 3.0);
  MinimizeOptions opts;
  opts.seed = 7;
  MinimizeResult res = minimize_II_eps(m, qt, 1.0, opts);
  REQUIRE(res.converged);
  REQUIRE(res.grad_norm <= opts.tol);
  double expect = -(kEightPiSq - 1.0) * std::log(kEightPiSq);
  REQUIRE(relative_error(res.value, expect) < 1e-9);
  REQUIRE(res.u.max_abs() < 1e-6);
  REQUIRE(relative_error(res.value, II_eps_value(m, qt, 1.0, res.u)) < 1e-12);
  Field un = normalized_minimizer(res);
  REQUIRE(relative_error(functional_mass(m, qt, un), kEightPiSq) < 1e-10);
}

TEST_CASE("eps = 0 is rejected by the minimizer", "[variational]") {
  auto m = sphere();
  REQUIRE_THROWS_AS(minimize_II_eps(m, Field::constant(m, 3.0), 0.0),
                    std::invalid_argument);
}

TEST_CASE("descent is deterministic", "[variational]") {
  auto m = sphere(16);
  Field qt = Field::constant(m, 3.0);
  MinimizeOptions opts;
  opts.seed = 3;
  opts.tol = 1e-7;
  MinimizeResult a = minimize_II_eps(m, qt, 2.0, opts);
  MinimizeResult b = minimize_II_eps(m, qt, 2.0, opts);
  REQUIRE(a.iterations == b.iterations);
  REQUIRE(a.value == b.value);
  REQUIRE(a.grad_norm == b.grad_norm);
}

TEST_CASE("Euler-Lagrange residual at a converged minimizer", "[variational]") {
  auto m = sphere();
  Field qt = Field::constant(m, 3.0);
  MinimizeOptions opts;
  opts.seed = 1;
  MinimizeResult res = minimize_II_eps(m, qt, 1.0, opts);
  REQUIRE(res.converged);
  Field un = normalized_minimizer(res);
  Field residual = II_eps_gradient(m, qt, 1.0, un);
  REQUIRE(0.5 * residual.max_abs() <= 10.0 * opts.tol);
}

TEST_CASE("conformal functional identity", "[variational]") {
  // II_{g~}(u) = II_g(u + v) - int v P v, with g~ assembled by covariance
  auto m = sphere();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Field v = 0.2 * band_limited_field(m, 600 + seed);
    Field u = band_limited_field(m, 700 + seed);
    auto tilted = with_conformal_factor(m, v);
    Field qt_b = Field::constant(m, 2.0);
    Field qt_t(tilted, qt_b.values());
    Field ut(tilted, u.values());
    double lhs = II_value(tilted, qt_t, ut);
    Field upv = u + v;
    double rhs = II_value(m, qt_b, upv) - energy_pairing(m, v);
    REQUIRE(relative_error(lhs, rhs) < 1e-8);
  }
}

TEST_CASE("deficit of the zero field is the log volume", "[variational]") {
  for (auto m : {torus(), sphere()}) {
    REQUIRE(adams_deficit(m, Field::zero(m)) ==
            Approx(std::log(m->volume())).margin(1e-10));
  }
}

TEST_CASE("deficit is shift invariant", "[variational]") {
  auto m = sphere();
  Field u = band_limited_field(m, 9);
  Field uc = u;
  uc.shift(2.3);
  REQUIRE(adams_deficit(m, uc) == Approx(adams_deficit(m, u)).margin(1e-10));
}

TEST_CASE("adams scan reports finite stable deficits", "[variational]") {
  auto m = sphere();
  AdamsReport rep = adams_check(m, 100, 5);
  REQUIRE(std::isfinite(rep.max_deficit));
  REQUIRE(rep.max_deficit_doubled >= rep.max_deficit);
  REQUIRE(rep.max_deficit_doubled <= 1.05 * rep.max_deficit);
  REQUIRE(rep.ladder.size() == 5);
  for (double d : rep.ladder) {
    REQUIRE(std::isfinite(d));
    REQUIRE(d <= rep.deficit_at_zero + 1.0);
  }
}

TEST_CASE("adams scan runs on the torus", "[variational]") {
  auto m = torus();
  AdamsReport rep = adams_check(m, 10, 3);
  REQUIRE(rep.deficit_at_zero == Approx(0.0).margin(1e-12));  // unit volume
  REQUIRE(std::isfinite(rep.max_deficit));
  for (double d : rep.ladder) REQUIRE(std::isfinite(d));
}

TEST_CASE("diagnostics of a constant minimizer report the trivial profile",
          "[variational]") {
  auto m = sphere();
  Field qt = Field::constant(m, 3.0);
  MinimizeOptions opts;
  opts.seed = 2;
  MinimizeResult res = minimize_II_eps(m, qt, 1.0, opts);
  std::vector<double> qs = {1.0};
  std::vector<double> radii = {0.3, 0.5};
  BlowupDiagnostics diag = blowup_diagnostics(m, res, qt, qs, radii);
  REQUIRE(diag.r_scale == Approx(std::exp(-diag.m)).epsilon(1e-15));
  REQUIRE(diag.lambda == Approx(0.25).margin(1e-12));
  // constant field: the rescaled profile is zero, so the gap is max |w| on B1
  REQUIRE(diag.profile_gap == Approx(std::log(1.0 + 0.25)).margin(0.02));
}

TEST_CASE("gradient-mass scaling of a smooth torus minimizer", "[variational]") {
  auto m = torus(16);
  std::vector<double> vals(m->sample_count());
  for (std::size_t i = 0; i < vals.size(); ++i)
    vals[i] = kEightPiSq * (1.0 + 0.3 * std::cos(2.0 * kPi * m->torus_coord(i)[0]));
  Field qt(m, std::move(vals));
  MinimizeOptions opts;
  opts.seed = 11;
  MinimizeResult res = minimize_II_eps(m, qt, 4.0, opts);
  REQUIRE(res.converged);
  std::vector<double> qs = {1.0};
  std::vector<double> radii = {0.125, 0.1875, 0.25};
  BlowupDiagnostics diag = blowup_diagnostics(m, res, qt, qs, radii);
  REQUIRE(diag.slopes.size() == 1);
  REQUIRE(diag.slopes[0].slope >= 3.0 - 0.1);
}

TEST_CASE("synthetic bubble matches the closed-form profile", "[variational]") {
  ModelSpec s;
  s.kind = ModelKind::sphere;
  s.l_max = 1024;
  auto m = make_model(s);
  const double lambda = 0.25, r0 = 1e-2;
  std::vector<double> vals(m->sample_count());
  for (int i = 0; i < m->theta_points(); ++i) {
    double th = m->theta()[i];
    vals[i] = std::log(1.0 / r0) - std::log(1.0 + lambda * th * th / (r0 * r0));
  }
  Field u(m, std::move(vals));
  MinimizeResult synthetic{u.to_spectral().to_physical()};
  synthetic.converged = true;
  synthetic.eps = 1.0;
  Field qt = Field::constant(m, 3.0);
  std::vector<double> qs = {};
  std::vector<double> radii = {};
  BlowupDiagnostics diag = blowup_diagnostics(m, synthetic, qt, qs, radii);
  REQUIRE(diag.profile_gap <= 0.05);
  REQUIRE(diag.m == Approx(std::log(1.0 / r0)).margin(0.01));
}

TEST_CASE("diagnostics reject unresolved radii and non-converged results",
          "[variational]") {
  auto m = torus(16);
  Field qt = Field::constant(m, kEightPiSq);
  MinimizeResult fake{Field::zero(m)};
  fake.converged = true;
  std::vector<double> qs = {1.0};
  std::vector<double> bad_radii = {1.0 / 64.0};
  REQUIRE_THROWS_AS(blowup_diagnostics(m, fake, qt, qs, bad_radii), std::invalid_argument);
  fake.converged = false;
  std::vector<double> radii = {0.25};
  REQUIRE_THROWS_AS(blowup_diagnostics(m, fake, qt, qs, radii), std::invalid_argument);
}
