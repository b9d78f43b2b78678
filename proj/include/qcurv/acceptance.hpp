#ifndef QCURV_ACCEPTANCE_HPP
#define QCURV_ACCEPTANCE_HPP

// Verification suite: one check per numbered criterion, each returning a
// PASS/FAIL outcome with the measured numbers. Runs through the public
// library surface only; also exposed by the CLI `accept` subcommand so every
// criterion is reproducible from the command line.

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qcurv/blowup.hpp"
#include "qcurv/geometry.hpp"
#include "qcurv/greenfn.hpp"
#include "qcurv/paneitz.hpp"
#include "qcurv/variational.hpp"

namespace qcurv::acceptance {

struct Outcome {
  bool pass = true;
  std::string detail;
};

namespace detail {

using namespace qcurv;

inline ModelPtr torus(int n) {
  ModelSpec s;
  s.kind = ModelKind::torus;
  s.n = n;
  return make_model(s);
}
inline ModelPtr sphere(int lmax) {
  ModelSpec s;
  s.kind = ModelKind::sphere;
  s.l_max = lmax;
  return make_model(s);
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

// --- 1: bubble mass ---------------------------------------------------------
inline Outcome criterion_bubble_mass() {
  Outcome o;
  const double inf = std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (double q : {1.0, 3.0, 12.0}) {
    double lambda = std::sqrt(3.0 * q) / 12.0;
    worst = std::max(worst, relative_error(q * bubble_mass(lambda, inf), kEightPiSq));
  }
  o.pass = worst <= 1e-8;
  o.detail = "max rel err " + fmt(worst) + " (tol 1e-08)";
  return o;
}

// --- 2: bubble energy asymptotic --------------------------------------------
inline Outcome criterion_bubble_energy() {
  Outcome o;
  std::vector<double> Ls = {10.0, 30.0, 100.0}, gaps, logt;
  std::ostringstream ss;
  bool bound_ok = true;
  for (double L : Ls) {
    double gap =
        std::abs(bubble_energy(1.0, L) - 16.0 * kPiSq * std::log(1.0 + L * L) -
                 kEightPiSq / 3.0);
    double bound = 40.0 * std::log(L) / (L * L);
    gaps.push_back(gap);
    logt.push_back(std::log(std::log(L) / (L * L)));
    if (gap > bound) bound_ok = false;
    ss << "L=" << L << " gap " << fmt(gap) << (gap <= bound ? " <= " : " > ") << fmt(bound)
       << "; ";
  }
  std::vector<double> lg;
  for (double g : gaps) lg.push_back(std::log(g));
  double rate = fitted_slope(logt, lg);
  bool decreasing = gaps[0] > gaps[1] && gaps[1] > gaps[2];
  ss << "fitted rate in logL/L^2 = " << fmt(rate) << " (needs >= 1.8)";
  o.pass = bound_ok && decreasing && rate >= 1.8;
  o.detail = ss.str();
  return o;
}

// --- 3: capacity -------------------------------------------------------------
inline Outcome criterion_capacity() {
  Outcome o;
  std::mt19937_64 rng(20240901);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  double worst_ab = 0.0, worst_energy = 0.0;
  std::vector<CapacityProblem> probs;
  for (int i = 0; i < 100; ++i) {
    CapacityProblem p{0.05 + 0.45 * std::abs(uni(rng)), 1.0 + std::abs(uni(rng)),
                      uni(rng), uni(rng), uni(rng), uni(rng)};
    probs.push_back(p);
    CapacitySolution s = capacity_solve(p);
    worst_ab = std::max(worst_ab, std::abs(s.closed_A - s.A) /
                                      std::max(std::abs(s.A), 1e-6));
    worst_ab = std::max(worst_ab, std::abs(s.closed_B - s.B) /
                                      std::max(std::abs(s.B), 1e-6));
    auto integrand = [&](double rho) {
      double lap = 2.0 * s.A / (rho * rho) + 8.0 * s.B;
      return lap * lap * rho * rho * rho;
    };
    double quad = kTwoPiSq * adaptive_integrate(integrand, p.r, p.R, 1e-13);
    worst_energy = std::max(worst_energy,
                            std::abs(s.energy - quad) / std::max(std::abs(quad), 1e-6));
  }
  double worst_oracle = 0.0;
  for (int i = 0; i < 5; ++i) {
    double exact = capacity_solve(probs[i]).energy;
    double rel = std::abs(capacity_oracle(probs[i], 2000) - exact) /
                 std::max(std::abs(exact), 1e-6);
    worst_oracle = std::max(worst_oracle, rel);
  }
  double e2000 = std::abs(capacity_oracle(probs[0], 2000) -
                          capacity_solve(probs[0]).energy);
  double e4000 = std::abs(capacity_oracle(probs[0], 4000) -
                          capacity_solve(probs[0]).energy);
  bool converges = e4000 < e2000;
  o.pass = worst_ab <= 1e-9 && worst_energy <= 1e-9 && worst_oracle <= 1e-3 && converges;
  o.detail = "closed-form dev " + fmt(worst_ab) + " (1e-09), energy dev " +
             fmt(worst_energy) + " (1e-09), oracle dev " + fmt(worst_oracle) +
             " (1e-03), doubling " + fmt(e2000) + " -> " + fmt(e4000);
  return o;
}

// --- 4: Paneitz spectrum and positivity -------------------------------------
inline Outcome criterion_paneitz() {
  Outcome o;
  auto s = sphere(64);
  for (int l = 0; l <= 20; ++l) {
    if (paneitz_multiplier(*s, l) != double(l) * (l + 1) * (l + 2) * (l + 3)) {
      o.pass = false;
      o.detail = "multiplier mismatch at degree " + std::to_string(l);
      return o;
    }
  }
  auto t = torus(16);
  double min_energy = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 500; ++i) {
    min_energy = std::min(min_energy, energy_pairing(s, band_limited_field(s, 40000 + i, false)));
    min_energy = std::min(min_energy, energy_pairing(t, band_limited_field(t, 50000 + i, false)));
  }
  double const_energy = std::max(energy_pairing(s, Field::constant(s, 2.0)),
                                 energy_pairing(t, Field::constant(t, 2.0)));
  o.pass = min_energy > 0.0 && const_energy < 1e-14;
  o.detail = "multipliers exact to degree 20; min energy over 1000 fields " +
             fmt(min_energy) + ", constants " + fmt(const_energy);
  return o;
}

// --- 5: conformal laws -------------------------------------------------------
inline Outcome criterion_conformal_laws() {
  Outcome o;
  auto m = sphere(64);
  double worst_k = 0.0, worst_ii = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Field v = band_limited_field(m, 7000 + seed);
    v *= 0.1 / v.max_abs();
    auto tilted = with_conformal_factor(m, v);
    worst_k = std::max(worst_k, relative_error(q_field(tilted).k_total, kEightPiSq));
    Field u = band_limited_field(m, 7100 + seed);
    Field qt_b = Field::constant(m, 2.5);
    Field qt_t(tilted, qt_b.values());
    Field ut(tilted, u.values());
    double lhs = II_value(tilted, qt_t, ut);
    Field upv = u + v;
    double rhs = II_value(m, qt_b, upv) - energy_pairing(m, v);
    worst_ii = std::max(worst_ii, relative_error(lhs, rhs));
  }
  auto fine = sphere(256);
  double worst_sup = 0.0, worst_s0 = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Field v = band_limited_field(fine, 7200 + seed);
    v *= 0.1 / v.max_abs();
    GreenShiftReport rep = green_conformal_check(fine, v, Point::pole());
    worst_sup = std::max(worst_sup, rep.sup_mod_const);
    worst_s0 = std::max(worst_s0, std::abs(rep.s0_discrepancy));
  }
  o.pass = worst_k <= 1e-8 && worst_ii <= 1e-8 && worst_sup <= 1e-6 && worst_s0 <= 1e-3;
  o.detail = "k-invariance " + fmt(worst_k) + " (1e-08), functional identity " +
             fmt(worst_ii) + " (1e-08), Green shift sup " + fmt(worst_sup) +
             " (1e-06), S0 shift " + fmt(worst_s0) + " (1e-03)";
  return o;
}

// --- 6: Green expansion stability --------------------------------------------
inline Outcome criterion_green_expansion() {
  Outcome o;
  const std::pair<double, double> window{0.125, 0.25};
  double s0[2], worst_a = 0.0;
  double ref_residual = 0.0, ref_bound = 0.0;
  int idx = 0;
  for (int n : {32, 64}) {
    auto m = torus(n);
    Field g = green_function(m, Point::torus(0, 0, 0, 0));
    GreenExpansion fit = expansion_fit(m, g, Point::torus(0, 0, 0, 0), window);
    for (double a : fit.a) worst_a = std::max(worst_a, std::abs(a));
    s0[idx++] = fit.s0;
    if (n == 64) {
      GreenExpansion ref = expansion_fit(m, g, Point::torus(0, 0, 0, 0));
      ref_residual = ref.residual;
      ref_bound = 1e-3 * std::abs(ref.s0);
    }
  }
  double drift = relative_error(s0[0], s0[1]);
  o.pass = worst_a <= 1e-6 && drift <= 1e-3 && ref_residual <= ref_bound;
  o.detail = "max |a_i| " + fmt(worst_a) + " (1e-06), S0 " + fmt(s0[0]) + " vs " +
             fmt(s0[1]) + ", rel drift " + fmt(drift) +
             " (1e-03), reference-window residual " + fmt(ref_residual) + " (" +
             fmt(ref_bound) + ")";
  return o;
}

// --- 7: variational machinery -------------------------------------------------
inline Outcome criterion_variational() {
  Outcome o;
  std::ostringstream ss;
  // finite-difference order of the gradient
  auto t = torus(16);
  std::vector<double> qvals(t->sample_count());
  for (std::size_t i = 0; i < qvals.size(); ++i)
    qvals[i] = kEightPiSq * (1.0 + 0.3 * std::cos(2.0 * kPi * t->torus_coord(i)[0]));
  Field qt_t(t, std::move(qvals));
  Field u = band_limited_field(t, 4);
  u *= 0.3 / u.max_abs();
  Field phi = band_limited_field(t, 5);
  phi *= 6.5 / phi.max_abs();
  Field grad = II_eps_gradient(t, qt_t, 2.0, u);
  double exact = integrate(t, hadamard(grad, phi));
  auto fd = [&](double h) {
    Field up = u, um = u, tphi = phi;
    tphi *= h;
    up += tphi;
    um -= tphi;
    return (II_eps_value(t, qt_t, 2.0, up) - II_eps_value(t, qt_t, 2.0, um)) / (2.0 * h);
  };
  double order = std::log10(std::abs(fd(1e-4) - exact) / std::abs(fd(1e-5) - exact));
  ss << "FD order " << fmt(order) << " (>= 1.9); ";
  bool ok = order >= 1.9;

  // ten seeds at eps = 1 on the round sphere
  auto s = sphere(32);
  Field qt_s = Field::constant(s, 3.0);
  double worst_val = 0.0, worst_u = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MinimizeOptions opts;
    opts.seed = seed;
    MinimizeResult res = minimize_II_eps(s, qt_s, 1.0, opts);
    if (!res.converged) ok = false;
    worst_val = std::max(
        worst_val, relative_error(res.value, -(kEightPiSq - 1.0) * std::log(kEightPiSq)));
    worst_u = std::max(worst_u, res.u.max_abs());
  }
  ss << "10-seed value dev " << fmt(worst_val) << " (1e-06), sup|u| " << fmt(worst_u)
     << "; ";
  ok = ok && worst_val <= 1e-6 && worst_u <= 1e-6;

  // monotone minima along the eps ladder 4, 2, 1, 0.5
  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  ss << "ladder ";
  for (double eps : {4.0, 2.0, 1.0, 0.5}) {
    MinimizeOptions opts;
    opts.seed = 0;
    MinimizeResult res = minimize_II_eps(s, qt_s, eps, opts);
    if (!res.converged) ok = false;
    if (res.value > prev + 1e-10) monotone = false;
    prev = res.value;
    ss << fmt(res.value) << " ";
  }
  ss << (monotone ? "(non-increasing)" : "(NOT monotone)");
  o.pass = ok && monotone;
  o.detail = ss.str();
  return o;
}

// --- 8: Euler-Lagrange consistency ---------------------------------------------
inline Outcome criterion_euler_lagrange() {
  Outcome o;
  auto s = sphere(32);
  Field qt = Field::constant(s, 3.0);
  double worst = 0.0;
  const double tol = 1e-8;
  for (double eps : {4.0, 2.0, 1.0, 0.5}) {
    MinimizeOptions opts;
    opts.seed = 0;
    opts.tol = tol;
    MinimizeResult res = minimize_II_eps(s, qt, eps, opts);
    if (!res.converged) {
      o.pass = false;
      o.detail = "descent failed to converge at eps " + fmt(eps);
      return o;
    }
    Field un = normalized_minimizer(res);
    Field residual = II_eps_gradient(s, qt, eps, un);
    worst = std::max(worst, 0.5 * residual.max_abs());
  }
  o.pass = worst <= 10.0 * tol;
  o.detail = "sup residual " + fmt(worst) + " (tol " + fmt(10.0 * tol) + ")";
  return o;
}

// --- 9: test-function expansion -------------------------------------------------
inline Outcome criterion_testfn() {
  Outcome o;
  std::ostringstream ss;
  // (a) flat constant case: gap rate >= 3.5 in L
  TaylorData flat;
  flat.s0 = 0.3;
  std::vector<double> logL, loggap;
  for (double L : {10.0, 20.0, 40.0}) {
    TestFnParams p = TestFnParams::from_q(3.0, 1e-3, L, flat);
    TestFnExpansion e = testfn_mass_expansion(p);
    logL.push_back(std::log(L));
    loggap.push_back(std::log(std::abs(e.gap)));
  }
  double rate = -fitted_slope(logL, loggap);
  bool ok = rate >= 3.5;
  ss << "constant-case L-rate " << fmt(rate) << " (>= 3.5); ";

  // (b) Richardson extraction of the eps^2 coefficient at fixed L = 100
  TaylorData t;
  t.s0 = 0.4;
  t.a = {0.15, -0.1, 0.2, 0.05};
  t.b = {0.1, 0.15, -0.2, 0.1};
  const double diag_a[4] = {0.3, -0.2, 0.25, 0.1};
  const double diag_b[4] = {0.2, 0.3, -0.1, 0.15};
  for (int i = 0; i < 4; ++i) {
    t.a_sym[i][i] = diag_a[i];
    t.b_sym[i][i] = diag_b[i];
  }
  t.a_sym[0][1] = t.a_sym[1][0] = 0.12;  // off-diagonal terms average out
  t.b_sym[2][3] = t.b_sym[3][2] = -0.08;
  const std::array<double, 3> epss = {4e-3, 2e-3, 1e-3};
  std::array<double, 3> gaps{};
  double coeff_true = 0.0;
  for (int i = 0; i < 3; ++i) {
    TestFnParams p = TestFnParams::from_q(3.0, epss[i], 100.0, t);
    TestFnExpansion e = testfn_mass_expansion(p);
    coeff_true = e.eps2_coefficient;
    gaps[i] = e.numeric_log_mass -
              (e.predicted_log_mass - e.eps2_coefficient * epss[i] * epss[i]);
  }
  // least-squares fit of gap = g0 + c eps^2 over the three x = eps^2 points
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < 3; ++i) {
    double x = epss[i] * epss[i];
    sx += x;
    sy += gaps[i];
    sxx += x * x;
    sxy += x * gaps[i];
  }
  double coeff_fit = (3.0 * sxy - sx * sy) / (3.0 * sxx - sx * sx);
  double dev = relative_error(coeff_fit, coeff_true);
  ss << "Richardson coeff " << fmt(coeff_fit) << " vs " << fmt(coeff_true) << ", dev "
     << fmt(dev) << " (2e-02)";
  o.pass = ok && dev <= 0.02;
  o.detail = ss.str();
  return o;
}

// --- 10: criteria algebra ---------------------------------------------------------
inline Outcome criterion_criteria_algebra() {
  Outcome o;
  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  double worst = 0.0, worst_cor = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::array<double, 4> a, b, zero{0, 0, 0, 0};
    std::array<std::array<double, 4>, 4> as{}, bs{}, zsym{};
    double lap_s = 0, lap_q = 0;
    for (int i = 0; i < 4; ++i) {
      a[i] = uni(rng);
      b[i] = uni(rng);
      for (int j = i; j < 4; ++j) {
        as[i][j] = as[j][i] = uni(rng);
        bs[i][j] = bs[j][i] = uni(rng);
      }
      lap_s += as[i][i];
      lap_q += bs[i][i];
    }
    double qp = 0.5 + 3.0 * std::abs(uni(rng));
    auto m2 = criterion_main2(qp, a, lap_s, b, lap_q, 0.0);
    auto cf = criterion_conformal(a, as, zero, zsym, b, bs, qp);
    worst = std::max(worst, std::abs(m2.value - 2.0 * qp * cf.value) /
                                std::max(std::abs(m2.value), 1e-6));
    if (m2.satisfied != cf.satisfied) worst = std::max(worst, 1.0);
    // b = 0 is the constant-curvature corollary
    auto cor = criterion_conformal(a, as, zero, zsym, zero, zsym, qp);
    double expect = 0.0;
    for (int i = 0; i < 4; ++i) expect += 0.5 * as[i][i] + 2.0 * a[i] * a[i];
    worst_cor = std::max(worst_cor, std::abs(cor.value - expect));
  }
  o.pass = worst <= 1e-12 && worst_cor <= 1e-12;
  o.detail = "flat dictionary dev " + fmt(worst) + " (1e-12; main2 = 2 Qt conformal), "
             "corollary dev " + fmt(worst_cor);
  return o;
}

// --- 11: moments --------------------------------------------------------------------
inline Outcome criterion_moments() {
  Outcome o;
  double worst = 0.0;
  for (int i = 0; i < 4; ++i) {
    worst = std::max(worst, std::abs(s3_moment({i, i}) - 0.25));
    worst = std::max(worst, std::abs(s3_moment({i, i, i, i}) - 0.125));
    for (int j = 0; j < 4; ++j)
      if (i != j) {
        worst = std::max(worst, std::abs(s3_moment({i, j})));
        worst = std::max(worst, std::abs(s3_moment({i, i, j, j}) - 1.0 / 24.0));
      }
  }
  o.pass = worst <= 1e-6;
  o.detail = "max moment dev " + fmt(worst) + " (1e-06)";
  return o;
}

// --- 12: Adams-Fontana ----------------------------------------------------------------
inline Outcome criterion_adams() {
  Outcome o;
  auto m = sphere(64);
  AdamsReport rep = adams_check(m, 1000, 17);
  bool finite = std::isfinite(rep.max_deficit) && std::isfinite(rep.max_deficit_doubled);
  double drift = std::abs(rep.max_deficit_doubled - rep.max_deficit) /
                 std::abs(rep.max_deficit);
  bool ladder_ok = rep.ladder.size() == 5;
  double ladder_max = -std::numeric_limits<double>::infinity();
  for (double d : rep.ladder) {
    if (!std::isfinite(d)) ladder_ok = false;
    ladder_max = std::max(ladder_max, d);
  }
  ladder_ok = ladder_ok && ladder_max <= rep.deficit_at_zero + 1.0;
  o.pass = finite && drift <= 0.05 && ladder_ok;
  o.detail = "max deficit " + fmt(rep.max_deficit) + ", doubling drift " + fmt(drift) +
             " (5e-02), ladder max " + fmt(ladder_max) + " (bound " +
             fmt(rep.deficit_at_zero + 1.0) + ")";
  return o;
}

}  // namespace detail

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

inline const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list = {
      {1, "bubble-mass", detail::criterion_bubble_mass},
      {2, "bubble-energy-asymptotic", detail::criterion_bubble_energy},
      {3, "capacity", detail::criterion_capacity},
      {4, "paneitz-spectrum-positivity", detail::criterion_paneitz},
      {5, "conformal-laws", detail::criterion_conformal_laws},
      {6, "green-expansion-stability", detail::criterion_green_expansion},
      {7, "variational-machinery", detail::criterion_variational},
      {8, "euler-lagrange-consistency", detail::criterion_euler_lagrange},
      {9, "testfn-expansion", detail::criterion_testfn},
      {10, "criteria-algebra", detail::criterion_criteria_algebra},
      {11, "s3-moments", detail::criterion_moments},
      {12, "adams-fontana", detail::criterion_adams},
  };
  return list;
}

/// Runs criterion `only` (0 = all), printing one line each; returns the
/// number of failures.
inline int run_criteria(int only = 0, std::FILE* out = stdout) {
  int failures = 0;
  for (const auto& c : criteria()) {
    if (only && c.id != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::fprintf(out, "[%s] criterion %02d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id,
                 c.name, o.detail.c_str());
    std::fflush(out);
    if (!o.pass) ++failures;
  }
  return failures;
}

}  // namespace qcurv::acceptance

#endif  // QCURV_ACCEPTANCE_HPP
