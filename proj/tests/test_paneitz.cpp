#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "qcurv/geometry.hpp"
#include "qcurv/paneitz.hpp"

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

// int |grad u|^2 from the spectral side, for the coercivity check.
double grad_sq(const ModelPtr& m, const Field& u) {
  const Field spec = u.to_spectral();
  KahanSum s;
  if (m->is_torus()) {
    const int n = m->axis_points();
    const int nh = n / 2 + 1;
    auto* c = reinterpret_cast<const std::complex<double>*>(spec.values().data());
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < nh; ++l, ++idx) {
            double k2 = double(m->fold(i)) * m->fold(i) + double(m->fold(j)) * m->fold(j) +
                        double(m->fold(k)) * m->fold(k) + double(l) * l;
            double gamma = (l == 0 || 2 * l == n) ? 1.0 : 2.0;
            s.add(gamma * 4.0 * kPiSq * k2 * std::norm(c[idx]));
          }
  } else {
    for (int l = 0; l <= m->l_max(); ++l)
      s.add(double(l) * (l + 3.0) * spec.values()[l] * spec.values()[l]);
  }
  return s.value();
}

}  // namespace

TEST_CASE("flat multiplier is 16 pi^4 |k|^4", "[paneitz]") {
  auto m = torus();
  REQUIRE(paneitz_multiplier(*m, {1, 0, 0, 0}) == Approx(1558.5454565440993).epsilon(1e-13));
  REQUIRE(paneitz_multiplier(*m, {1, 1, 0, 0}) ==
          Approx(4.0 * 1558.5454565440993).epsilon(1e-13));
}

TEST_CASE("sphere multipliers l(l+1)(l+2)(l+3)", "[paneitz]") {
  auto m = sphere();
  REQUIRE(paneitz_multiplier(*m, 0) == 0.0);
  REQUIRE(paneitz_multiplier(*m, 1) == 24.0);
  REQUIRE(paneitz_multiplier(*m, 2) == 120.0);
  for (int l = 0; l <= 20; ++l)
    REQUIRE(paneitz_multiplier(*m, l) == double(l) * (l + 1) * (l + 2) * (l + 3));
}

TEST_CASE("constants lie in the kernel", "[paneitz]") {
  for (auto m : {torus(), sphere()}) {
    Field pu = apply_paneitz(m, Field::constant(m, 2.5));
    REQUIRE(pu.max_abs() < 1e-12);
  }
}

TEST_CASE("single mode is scaled by its multiplier", "[paneitz]") {
  auto m = torus();
  const double a = 0.7;
  std::vector<double> vals(m->sample_count());
  for (std::size_t i = 0; i < vals.size(); ++i)
    vals[i] = a * std::cos(2.0 * kPi * m->torus_coord(i)[0]);
  Field u(m, std::move(vals));
  Field pu = apply_paneitz(m, u);
  const double mu = paneitz_multiplier(*m, {1, 0, 0, 0});
  double dev = 0.0;
  for (std::size_t i = 0; i < pu.values().size(); ++i)
    dev = std::max(dev, std::abs(pu.values()[i] - mu * u.values()[i]));
  REQUIRE(dev < 1e-9 * mu * a);
}

TEST_CASE("operator is self-adjoint", "[paneitz]") {
  for (auto m : {torus(), sphere()}) {
    Field u = band_limited_field(m, 1);
    Field w = band_limited_field(m, 2);
    double a = integrate(m, hadamard(apply_paneitz(m, u), w));
    double b = integrate(m, hadamard(apply_paneitz(m, w), u));
    REQUIRE(relative_error(a, b) < 1e-10);
  }
}

TEST_CASE("energy pairing is positive with equality only for constants", "[paneitz]") {
  for (auto m : {torus(), sphere()}) {
    REQUIRE(energy_pairing(m, Field::constant(m, 4.0)) < 1e-14);
    for (std::uint64_t s = 0; s < 50; ++s) {
      Field u = band_limited_field(m, 100 + s, /*unit_energy=*/false);
      REQUIRE(energy_pairing(m, u) > 0.0);
    }
  }
}

TEST_CASE("energy pairing dominates the gradient term", "[paneitz]") {
  // int u P u >= lambda int |grad u|^2 with lambda = min mu / (Laplace eigenvalue)
  auto t = torus();
  auto s = sphere();
  const double lambda_t = 4.0 * kPiSq;  // 16 pi^4 |k|^4 / (4 pi^2 |k|^2), |k|^2 = 1
  const double lambda_s = 6.0;          // (l+1)(l+2) at l = 1
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Field ut = band_limited_field(t, 10 + seed, false);
    REQUIRE(energy_pairing(t, ut) >= lambda_t * grad_sq(t, ut) * (1.0 - 1e-12));
    Field us = band_limited_field(s, 10 + seed, false);
    REQUIRE(energy_pairing(s, us) >= lambda_s * grad_sq(s, us) * (1.0 - 1e-12));
  }
}

TEST_CASE("diagonal quadratic form on a torus mode", "[paneitz]") {
  auto m = torus();
  const double a = 1.3;
  std::vector<double> vals(m->sample_count());
  for (std::size_t i = 0; i < vals.size(); ++i)
    vals[i] = a * std::cos(2.0 * kPi * m->torus_coord(i)[1]);
  Field u(m, std::move(vals));
  const double mu = paneitz_multiplier(*m, {0, 1, 0, 0});
  REQUIRE(relative_error(energy_pairing(m, u), 0.5 * a * a * mu) < 1e-12);
}

TEST_CASE("solve inverts apply on mean-zero data", "[paneitz]") {
  for (auto m : {torus(), sphere()}) {
    Field f = band_limited_field(m, 77);
    Field u = solve_paneitz(m, f);
    Field back = apply_paneitz(m, u);
    double dev = 0.0;
    for (std::size_t i = 0; i < f.values().size(); ++i)
      dev = std::max(dev, std::abs(back.values()[i] - f.values()[i]));
    REQUIRE(dev < 1e-9 * std::max(1.0, f.max_abs()));
    REQUIRE(std::abs(integrate(m, u)) < 1e-10);
  }
}

TEST_CASE("solve rejects non-mean-zero sources", "[paneitz]") {
  auto m = torus();
  REQUIRE_THROWS_WITH(solve_paneitz(m, Field::constant(m, 1.0)),
                      Catch::Matchers::ContainsSubstring("zero mean"));
}

TEST_CASE("single-mode inversion divides by the multiplier", "[paneitz]") {
  auto m = sphere();
  std::vector<double> coef(m->l_max() + 1, 0.0);
  coef[3] = 2.0;
  Field f = Field(m, std::move(coef), Repr::spectral).to_physical();
  Field u = solve_paneitz(m, f);
  double mu = paneitz_multiplier(*m, 3);
  double dev = 0.0;
  for (std::size_t i = 0; i < u.values().size(); ++i)
    dev = std::max(dev, std::abs(mu * u.values()[i] - f.values()[i]));
  REQUIRE(dev < 1e-10 * f.max_abs());
}

TEST_CASE("background Q fields carry total 8 pi^2", "[paneitz]") {
  auto t = torus();
  QData qt = q_field(t);
  REQUIRE(qt.q.values()[0] == kEightPiSq);
  REQUIRE(qt.k_total == kEightPiSq);
  auto s = sphere();
  QData qs = q_field(s);
  REQUIRE(qs.q.values()[7] == 3.0);
  REQUIRE(relative_error(qs.k_total, kEightPiSq) < 1e-9);
}

TEST_CASE("conformal Q transformation", "[paneitz]") {
  auto m = sphere();
  SECTION("zero factor leaves Q unchanged") {
    Field q = conformal_q(m, Field::zero(m));
    for (double v : q.values()) REQUIRE(v == Approx(3.0).margin(1e-11));
  }
  SECTION("constant factor scales by e^{-4c}") {
    const double c = 0.2;
    Field q = conformal_q(m, Field::constant(m, c));
    for (double v : q.values())
      REQUIRE(v == Approx(3.0 * std::exp(-4.0 * c)).epsilon(1e-12));
  }
  SECTION("total curvature is conformally invariant") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Field v = 0.15 * band_limited_field(m, 200 + seed);
      auto tilted = with_conformal_factor(m, v);
      QData qd = q_field(tilted);
      REQUIRE(relative_error(qd.k_total, kEightPiSq) < 1e-8);
    }
  }
}

TEST_CASE("covariant pairing matches the background pairing", "[paneitz]") {
  auto m = sphere();
  Field v = 0.2 * band_limited_field(m, 31);
  auto tilted = with_conformal_factor(m, v);
  Field u = band_limited_field(m, 32);
  Field w = band_limited_field(m, 33);
  Field ut(tilted, u.values());
  Field wt(tilted, w.values());
  double lhs = integrate(tilted, hadamard(apply_paneitz(tilted, ut), wt));
  double rhs = integrate(m, hadamard(apply_paneitz(m, u), w));
  REQUIRE(relative_error(lhs, rhs) < 1e-9);
}

TEST_CASE("operator integrates to zero against the conformal volume", "[paneitz]") {
  auto m = torus();
  Field v = 0.1 * band_limited_field(m, 8);
  auto tilted = with_conformal_factor(m, v);
  Field u(tilted, band_limited_field(m, 9).values());
  double total = integrate(tilted, apply_paneitz(tilted, u));
  REQUIRE(std::abs(total) < 1e-9);
}
