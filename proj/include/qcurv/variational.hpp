#ifndef QCURV_VARIATIONAL_HPP
#define QCURV_VARIATIONAL_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qcurv/geometry.hpp"
#include "qcurv/greenfn.hpp"
#include "qcurv/paneitz.hpp"
#include "qcurv/util.hpp"

namespace qcurv {

// ---------------------------------------------------------------------------
// The functionals
//   II(u)     = int u P u + 4 int Q u - (int Q) log int Qt e^{4u}
//   II_eps(u) = int <u,u> + 4 (1 - eps/8pi^2) int Q u - (8pi^2-eps) log int Qt e^{4u}
// with int Q dV = 8 pi^2 on both models.
// ---------------------------------------------------------------------------

inline double functional_mass(const ModelPtr& model, const Field& qt, const Field& u) {
  Field e4u = map_field(u, [](double x) { return std::exp(4.0 * x); });
  return integrate(model, hadamard(qt, e4u));
}

inline double II_value(const ModelPtr& model, const Field& qt, const Field& u) {
  const QData qd = q_field(model);
  const double mass = functional_mass(model, qt, u);
  if (!(mass > 0.0)) throw std::invalid_argument("II_value: non-positive mass int Qt e^{4u}");
  return energy_pairing(model, u) + 4.0 * integrate(model, hadamard(qd.q, u)) -
         qd.k_total * std::log(mass);
}

inline double II_eps_value(const ModelPtr& model, const Field& qt, double eps,
                           const Field& u) {
  if (eps < 0.0 || eps >= kEightPiSq)
    throw std::invalid_argument("II_eps_value: eps must lie in [0, 8 pi^2)");
  const QData qd = q_field(model);
  const double mass = functional_mass(model, qt, u);
  if (!(mass > 0.0))
    throw std::invalid_argument("II_eps_value: non-positive mass int Qt e^{4u}");
  return energy_pairing(model, u) +
         4.0 * (1.0 - eps / kEightPiSq) * integrate(model, hadamard(qd.q, u)) -
         (kEightPiSq - eps) * std::log(mass);
}

/// L2(dV) gradient 2 P u + 4(1-eps/8pi^2) Q - 4(8pi^2-eps) Qt e^{4u} / mass.
/// Its mean vanishes identically because int Q dV = 8 pi^2.
inline Field II_eps_gradient(const ModelPtr& model, const Field& qt, double eps,
                             const Field& u) {
  if (eps < 0.0 || eps >= kEightPiSq)
    throw std::invalid_argument("II_eps_gradient: eps must lie in [0, 8 pi^2)");
  const QData qd = q_field(model);
  const double mass = functional_mass(model, qt, u);
  if (!(mass > 0.0))
    throw std::invalid_argument("II_eps_gradient: non-positive mass int Qt e^{4u}");
  Field g = apply_paneitz(model, u);
  auto& gv = g.mutable_values();
  const auto& qv = qd.q.values();
  const Field qtp = qt.to_physical();
  const Field up = u.to_physical();
  const double c1 = 4.0 * (1.0 - eps / kEightPiSq);
  const double c2 = 4.0 * (kEightPiSq - eps) / mass;
  for (std::size_t i = 0; i < gv.size(); ++i)
    gv[i] = 2.0 * gv[i] + c1 * qv[i] - c2 * qtp.values()[i] * std::exp(4.0 * up.values()[i]);
  return g;
}

// ---------------------------------------------------------------------------
// Constrained minimization of II_eps over mean-zero fields
// ---------------------------------------------------------------------------

struct MinimizeOptions {
  double tol = 1e-8;        // on the L2 norm of the gradient
  int max_iter = 20000;
  std::uint64_t seed = 0;   // seeds the band-limited start
  bool keep_trace = false;
};

struct TraceRow {
  int iter;
  double value;
  double grad_norm;
  double step;
};

struct MinimizeResult {
  Field u;             // mean-zero minimizer (working gauge)
  double value = 0.0;  // II_eps(u)
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  double eps = 0.0;
  double mass = 0.0;   // int Qt e^{4u} of the mean-zero u
  std::vector<TraceRow> trace;
};

/// The reported minimizer in the int Qt e^{4u} = 8 pi^2 normalization:
/// the mean-zero gauge iterate shifted by a constant.
inline Field normalized_minimizer(const MinimizeResult& r) {
  Field u = r.u;
  u.shift(0.25 * std::log(kEightPiSq / r.mass));
  return u;
}

namespace detail {

/// Spectral workspace for the descent: coefficients as flat double arrays
/// (interleaved re/im on the torus), with per-entry multiplier and Parseval
/// weight so inner products and energies are plain weighted sums.
struct DescentSpace {
  ModelPtr model;
  std::vector<double> mu_e, gamma_e;
  std::size_t nspec = 0;

  explicit DescentSpace(ModelPtr m) : model(std::move(m)) {
    const auto& mu = multiplier_table(model).values();
    if (model->is_torus()) {
      const int n = model->axis_points();
      const int nh = n / 2 + 1;
      nspec = 2 * model->half_count();
      mu_e.resize(nspec);
      gamma_e.resize(nspec);
      for (std::size_t i = 0; i < model->half_count(); ++i) {
        int l = int(i % nh);
        double g = (l == 0 || 2 * l == n) ? 1.0 : 2.0;
        mu_e[2 * i] = mu_e[2 * i + 1] = mu[i];
        gamma_e[2 * i] = gamma_e[2 * i + 1] = g;
      }
    } else {
      nspec = mu.size();
      mu_e.assign(mu.begin(), mu.end());
      gamma_e.assign(nspec, 1.0);
    }
  }

  void to_phys(const std::vector<double>& spec, std::vector<double>& phys) const {
    phys.resize(model->sample_count());
    if (model->is_torus())
      model->backward({reinterpret_cast<const std::complex<double>*>(spec.data()),
                       model->half_count()},
                      phys.data());
    else
      model->sphere_backward(spec, phys.data());
  }
  void to_spec(const std::vector<double>& phys, std::vector<double>& spec) const {
    spec.resize(nspec);
    if (model->is_torus())
      model->forward(phys, reinterpret_cast<std::complex<double>*>(spec.data()));
    else
      model->sphere_forward(phys, spec.data());
  }
  double dot(const std::vector<double>& a, const std::vector<double>& b) const {
    KahanSum s;
    for (std::size_t i = 0; i < nspec; ++i) s.add(gamma_e[i] * a[i] * b[i]);
    return s.value();
  }
  void zero_constant_mode(std::vector<double>& spec) const {
    if (model->is_torus()) {
      spec[0] = 0.0;
      spec[1] = 0.0;
    } else {
      spec[0] = 0.0;
    }
  }
};

}  // namespace detail

/// Preconditioned descent for II_eps over the mean-zero gauge: direction
/// -(P+tau)^{-1} grad with tau = (smallest nonzero multiplier) * 1e-3,
/// Armijo backtracking (c1 = 1e-4, halving, initial step 1). When the
/// predicted decrease falls below the floating-point noise of the value, the
/// line search switches to requiring a strict gradient-norm decrease, which
/// keeps the marginal high-degree modes contracting.
inline MinimizeResult minimize_II_eps(const ModelPtr& model, const Field& qt, double eps,
                                      const MinimizeOptions& opts = {}) {
  if (!(eps > 0.0) || eps >= kEightPiSq)
    throw std::invalid_argument("minimize_II_eps: eps must lie in (0, 8 pi^2)");
  if (qt.model_ptr() != model)
    throw std::invalid_argument("minimize_II_eps: model mismatch");

  const detail::DescentSpace ws(model);
  const double tau = detail::multiplier_table(model).smallest_nonzero() * 1e-3;
  const QData qd = q_field(model);
  const Field qtp = qt.to_physical();

  // Background-weighted samples so spectral projections give exact
  // directional derivatives: d/dt II(u + t phi) = sum gamma g_spec phi_spec.
  const std::size_t nsamp = model->sample_count();
  std::vector<double> qweighted(nsamp), qtweighted(nsamp);
  for (std::size_t i = 0; i < nsamp; ++i) {
    double e4v = model->has_conformal() ? model->conformal_exp4()[i] : 1.0;
    qweighted[i] = qd.q.values()[i] * e4v;
    qtweighted[i] = qtp.values()[i] * e4v;
  }

  std::vector<double> uspec(ws.nspec, 0.0), uphys, gspec, work, trialspec, trialphys;
  {
    Field u0 = band_limited_field(model, opts.seed);
    ws.to_spec(u0.values(), uspec);
    ws.zero_constant_mode(uspec);
  }
  ws.to_phys(uspec, uphys);

  auto mass_of = [&](const std::vector<double>& phys) {
    KahanSum s;
    for (std::size_t i = 0; i < nsamp; ++i)
      s.add(model->weight(i) * qtweighted[i] * std::exp(4.0 * phys[i]));
    return s.value();
  };
  auto value_of = [&](const std::vector<double>& spec, const std::vector<double>& phys,
                      double mass) {
    KahanSum e;
    for (std::size_t i = 0; i < ws.nspec; ++i)
      e.add(ws.gamma_e[i] * ws.mu_e[i] * spec[i] * spec[i]);
    KahanSum qu;
    for (std::size_t i = 0; i < nsamp; ++i) qu.add(model->weight(i) * qweighted[i] * phys[i]);
    return e.value() + 4.0 * (1.0 - eps / kEightPiSq) * qu.value() -
           (kEightPiSq - eps) * std::log(mass);
  };
  auto gradient_of = [&](const std::vector<double>& spec, const std::vector<double>& phys,
                         double mass, std::vector<double>& out) {
    work.resize(nsamp);
    const double c1 = 4.0 * (1.0 - eps / kEightPiSq);
    const double c2 = 4.0 * (kEightPiSq - eps) / mass;
    for (std::size_t i = 0; i < nsamp; ++i)
      work[i] = c1 * qweighted[i] - c2 * qtweighted[i] * std::exp(4.0 * phys[i]);
    ws.to_spec(work, out);
    for (std::size_t i = 0; i < ws.nspec; ++i) out[i] += 2.0 * ws.mu_e[i] * spec[i];
    ws.zero_constant_mode(out);
  };

  MinimizeResult res{Field::zero(model)};
  res.eps = eps;

  double mass = mass_of(uphys);
  if (!(mass > 0.0))
    throw std::invalid_argument("minimize_II_eps: non-positive mass at start");
  double val = value_of(uspec, uphys, mass);
  gradient_of(uspec, uphys, mass, gspec);
  double gn = std::sqrt(ws.dot(gspec, gspec));

  std::vector<double> dir(ws.nspec), gtrial;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    if (opts.keep_trace) res.trace.push_back({it, val, gn, 0.0});
    if (gn <= opts.tol) {
      res.converged = true;
      break;
    }
    for (std::size_t i = 0; i < ws.nspec; ++i) dir[i] = -gspec[i] / (ws.mu_e[i] + tau);
    ws.zero_constant_mode(dir);
    const double gd = ws.dot(gspec, dir);
    const double noise = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(val);

    double step = 1.0;
    bool accepted = false;
    double trial_mass = 0.0, trial_val = 0.0;
    while (step > 1e-16) {
      trialspec.resize(ws.nspec);
      for (std::size_t i = 0; i < ws.nspec; ++i) trialspec[i] = uspec[i] + step * dir[i];
      ws.to_phys(trialspec, trialphys);
      trial_mass = mass_of(trialphys);
      if (trial_mass > 0.0) {
        if (std::abs(step * gd) >= noise) {
          trial_val = value_of(trialspec, trialphys, trial_mass);
          if (trial_val <= val + 1e-4 * step * gd) {
            accepted = true;
            break;
          }
        } else {
          gradient_of(trialspec, trialphys, trial_mass, gtrial);
          double gn2 = std::sqrt(ws.dot(gtrial, gtrial));
          if (gn2 <= 0.999 * gn) {
            trial_val = value_of(trialspec, trialphys, trial_mass);
            accepted = true;
            break;
          }
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stagnated at the floating-point floor
    uspec.swap(trialspec);
    uphys.swap(trialphys);
    mass = trial_mass;
    val = trial_val;
    gradient_of(uspec, uphys, mass, gspec);
    gn = std::sqrt(ws.dot(gspec, gspec));
    if (opts.keep_trace) res.trace.back().step = step;
  }
  if (gn <= opts.tol) res.converged = true;

  res.u = Field(model, uphys);
  res.value = val;
  res.grad_norm = gn;
  res.iterations = it;
  res.mass = mass;
  return res;
}

// ---------------------------------------------------------------------------
// Empirical Adams-Fontana deficit
//   C_emp(u) = log int e^{4u} - (1/8pi^2) int u P u - 4 ubar
// ---------------------------------------------------------------------------

inline double adams_deficit(const ModelPtr& model, const Field& u) {
  Field e4u = map_field(u, [](double x) { return std::exp(4.0 * x); });
  const double lhs = std::log(integrate(model, e4u));
  const double energy = energy_pairing(model, u);
  const double ubar = mean_value(model, u);
  return lhs - energy / kEightPiSq - 4.0 * ubar;
}

struct AdamsReport {
  double deficit_at_zero = 0.0;  // log volume
  double max_deficit = 0.0;
  double max_deficit_doubled = 0.0;  // over twice the sample count
  std::vector<double> ladder;        // bubble-pullback concentration sequence
  int samples = 0;
};

/// Projects the Moebius conformal factor of dilation t (sphere) or a
/// concentrated bubble profile (torus) onto the model and returns the field.
inline Field concentration_field(const ModelPtr& model, double t) {
  if (model->is_torus()) {
    const double lambda = 0.25;
    const double r0 = 0.25 / t;  // concentration scale
    const double m = std::log(1.0 / r0);
    std::vector<double> vals(model->sample_count());
    for (std::size_t i = 0; i < vals.size(); ++i) {
      auto x = model->torus_coord(i);
      double r2 = 0.0;
      for (int a = 0; a < 4; ++a) {
        double d = x[a] - 0.5;
        d -= std::round(d);
        r2 += d * d;
      }
      vals[i] = m - std::log(1.0 + lambda * r2 / (r0 * r0));
    }
    return Field(model, std::move(vals));
  }
  auto theta = model->theta();
  std::vector<double> vals(model->sample_count());
  for (int i = 0; i < model->theta_points(); ++i) {
    double rho = std::tan(0.5 * theta[i]);
    vals[i] = std::log(t) + std::log(1.0 + rho * rho) - std::log(1.0 + t * t * rho * rho);
  }
  return Field(model, std::move(vals));
}

inline AdamsReport adams_check(const ModelPtr& model, int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("adams_check: samples >= 1");
  AdamsReport rep;
  rep.samples = samples;
  rep.deficit_at_zero = adams_deficit(model, Field::zero(model));
  double m1 = -std::numeric_limits<double>::infinity(), m2 = m1;
  for (int i = 0; i < 2 * samples; ++i) {
    Field u = band_limited_field(model, seed * 1000003ULL + std::uint64_t(i));
    double d = adams_deficit(model, u);
    if (i < samples) m1 = std::max(m1, d);
    m2 = std::max(m2, d);
  }
  rep.max_deficit = m1;
  rep.max_deficit_doubled = m2;
  for (double t : {2.0, 4.0, 8.0, 16.0, 32.0}) {
    Field u = concentration_field(model, t);
    // project to the model band so energy and exponential see the same field
    Field up = u.to_spectral().to_physical();
    rep.ladder.push_back(adams_deficit(model, up));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Blow-up diagnostics: maximum point, rescaled profile vs the bubble, and
// the Lemma 2.3 gradient-mass scaling table.
// ---------------------------------------------------------------------------

struct BlowupDiagnostics {
  Point x_max;
  double m = 0.0;        // max u
  double r_scale = 0.0;  // e^{-m}
  double lambda = 0.0;   // sqrt(3 Qt(x_max))/12
  double profile_gap = 0.0;
  struct Row {
    double q;
    double radius;
    double integral;
  };
  std::vector<Row> table;
  struct Slope {
    double q;
    double slope;
  };
  std::vector<Slope> slopes;
};

namespace detail {

/// Evaluate a torus field at an arbitrary point from its half-complex
/// spectrum.
class TorusEvaluator {
 public:
  TorusEvaluator(const ModelPtr& model, const Field& u) : model_(model) {
    spec_ = u.to_spectral().values();
  }
  double operator()(const std::array<double, 4>& x) const {
    const int n = model_->axis_points();
    const int nh = n / 2 + 1;
    auto* c = reinterpret_cast<const std::complex<double>*>(spec_.data());
    std::complex<double> acc_self(0.0, 0.0);
    double acc_pair = 0.0;
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < nh; ++l, ++idx) {
            if (c[idx] == std::complex<double>(0.0, 0.0)) continue;
            double phase = 2.0 * kPi * (model_->fold(i) * x[0] + model_->fold(j) * x[1] +
                                        model_->fold(k) * x[2] + l * x[3]);
            std::complex<double> e(std::cos(phase), std::sin(phase));
            if (l == 0 || 2 * l == n)
              acc_self += c[idx] * e;
            else
              acc_pair += 2.0 * (c[idx] * e).real();
          }
    return acc_self.real() + acc_pair;
  }

 private:
  ModelPtr model_;
  std::vector<double> spec_;
};

/// Fraction of the S^3 fiber at colatitude theta lying inside the geodesic
/// ball of radius r around the point at colatitude theta_c.
inline double sphere_cap_fraction(double theta, double theta_c, double r) {
  const double st = std::sin(theta) * std::sin(theta_c);
  if (st < 1e-14) {
    double d = std::abs(theta - theta_c);
    return d <= r ? 1.0 : 0.0;
  }
  double c = (std::cos(r) - std::cos(theta) * std::cos(theta_c)) / st;
  if (c >= 1.0) return 0.0;
  if (c <= -1.0) return 1.0;
  double psi = std::acos(c);
  return (psi - std::sin(psi) * std::cos(psi)) / kPi;
}

}  // namespace detail

inline BlowupDiagnostics blowup_diagnostics(const ModelPtr& model, const MinimizeResult& result,
                                            const Field& qt, std::span<const double> q_list,
                                            std::span<const double> radii) {
  if (!result.converged)
    throw std::invalid_argument("blowup_diagnostics: converged result required");
  if (result.u.model_ptr() != model || qt.model_ptr() != model)
    throw std::invalid_argument("blowup_diagnostics: model mismatch");
  const double spacing =
      model->is_torus() ? 1.0 / model->axis_points() : kPi / model->theta_points();
  for (double r : radii)
    if (r < spacing)
      throw std::invalid_argument("blowup_diagnostics: radius below grid resolution");

  const Field up = result.u.to_physical();
  const Field qtp = qt.to_physical();
  BlowupDiagnostics diag;

  std::size_t imax = 0;
  for (std::size_t i = 1; i < up.values().size(); ++i)
    if (up.values()[i] > up.values()[imax]) imax = i;
  diag.m = up.values()[imax];
  diag.r_scale = std::exp(-diag.m);
  const double qp = qtp.values()[imax];
  if (!(qp > 0.0))
    throw std::invalid_argument("blowup_diagnostics: Qt must be positive at the maximum");
  diag.lambda = std::sqrt(3.0 * qp) / 12.0;

  // rescaled profile u(x_max + r_scale y) - m against w(|y|) on the unit ball
  const int nrad = 12;
  double gap = 0.0;
  if (model->is_torus()) {
    const int n = model->axis_points();
    std::size_t f = imax;
    std::array<int, 4> idx;
    for (int a = 3; a >= 0; --a) {
      idx[a] = int(f % n);
      f /= n;
    }
    diag.x_max = Point::torus(idx[0], idx[1], idx[2], idx[3]);
    std::array<double, 4> xc = {double(idx[0]) / n, double(idx[1]) / n, double(idx[2]) / n,
                                double(idx[3]) / n};
    detail::TorusEvaluator eval(model, result.u);
    std::vector<std::array<double, 4>> dirs;
    for (int a = 0; a < 4; ++a)
      for (double s : {1.0, -1.0}) {
        std::array<double, 4> d{0, 0, 0, 0};
        d[a] = s;
        dirs.push_back(d);
      }
    for (int mask = 0; mask < 16; ++mask) {
      std::array<double, 4> d;
      for (int a = 0; a < 4; ++a) d[a] = (mask >> a) & 1 ? 0.5 : -0.5;
      dirs.push_back(d);
    }
    for (int ir = 1; ir <= nrad; ++ir) {
      double rho = double(ir) / nrad;
      double w = -std::log(1.0 + diag.lambda * rho * rho);
      for (const auto& d : dirs) {
        std::array<double, 4> x;
        for (int a = 0; a < 4; ++a) x[a] = xc[a] + diag.r_scale * rho * d[a];
        gap = std::max(gap, std::abs(eval(x) - diag.m - w));
      }
    }
  } else {
    diag.x_max = Point::sphere_node(int(imax));
    const auto uspec = result.u.to_spectral().values();
    const double theta_c = model->theta()[imax];
    for (int ir = 1; ir <= 4 * nrad; ++ir) {
      double rho = double(ir) / (4 * nrad);
      double w = -std::log(1.0 + diag.lambda * rho * rho);
      double th = theta_c + diag.r_scale * rho;  // radial ray away from the pole cap
      double vprime = model->zonal_series_at(uspec, th) - diag.m;
      gap = std::max(gap, std::abs(vprime - w));
      if (theta_c - diag.r_scale * rho > 0.0) {
        double v2 = model->zonal_series_at(uspec, theta_c - diag.r_scale * rho) - diag.m;
        gap = std::max(gap, std::abs(v2 - w));
      }
    }
  }
  diag.profile_gap = gap;

  // |grad u|^q over balls around x_max
  std::vector<double> gradsq(model->sample_count(), 0.0);
  if (model->is_torus()) {
    const int n = model->axis_points();
    const int nh = n / 2 + 1;
    const Field uspec = result.u.to_spectral();
    std::vector<double> dspec(model->spectral_count());
    std::vector<double> dphys(model->sample_count());
    for (int axis = 0; axis < 4; ++axis) {
      auto* src = reinterpret_cast<const std::complex<double>*>(uspec.values().data());
      auto* dst = reinterpret_cast<std::complex<double>*>(dspec.data());
      std::size_t idx = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < nh; ++l, ++idx) {
              int kk[4] = {model->fold(i), model->fold(j), model->fold(k), l};
              // drop the unpaired Nyquist frequency of odd derivatives
              if (std::abs(kk[axis]) * 2 == n)
                dst[idx] = 0.0;
              else
                dst[idx] = std::complex<double>(0.0, 2.0 * kPi * kk[axis]) * src[idx];
            }
      model->backward({reinterpret_cast<const std::complex<double>*>(dspec.data()),
                       model->half_count()},
                      dphys.data());
      for (std::size_t i = 0; i < gradsq.size(); ++i) gradsq[i] += dphys[i] * dphys[i];
    }
  } else {
    const auto uspec = result.u.to_spectral().values();
    for (int i = 0; i < model->theta_points(); ++i) {
      KahanSum s;
      for (int l = 0; l <= model->l_max(); ++l) s.add(uspec[l] * model->zonal_dtheta(l, i));
      gradsq[i] = s.value() * s.value();
    }
  }
  // conformal metric: |grad u|_g^2 = e^{-2v} |grad u|_0^2, dV_g = e^{4v} dV_0
  for (double q : q_list) {
    std::vector<double> logr, logI;
    for (double r : radii) {
      KahanSum s;
      if (model->is_torus()) {
        const int n = model->axis_points();
        std::array<int, 4> idx = diag.x_max.index;
        std::array<double, 4> xc = {double(idx[0]) / n, double(idx[1]) / n,
                                    double(idx[2]) / n, double(idx[3]) / n};
        for (std::size_t i = 0; i < gradsq.size(); ++i) {
          auto x = model->torus_coord(i);
          double r2 = 0.0;
          for (int a = 0; a < 4; ++a) {
            double d = x[a] - xc[a];
            d -= std::round(d);
            r2 += d * d;
          }
          if (r2 > r * r) continue;
          double g2 = gradsq[i];
          double wgt = model->weight(i);
          if (model->has_conformal()) {
            double v = model->conformal_factor()[i];
            wgt *= std::exp((4.0 - q) * v);
          }
          s.add(wgt * std::pow(g2, 0.5 * q));
        }
      } else {
        const double theta_c = model->theta()[diag.x_max.theta_node];
        for (int i = 0; i < model->theta_points(); ++i) {
          double frac = detail::sphere_cap_fraction(model->theta()[i], theta_c, r);
          if (frac == 0.0) continue;
          double wgt = model->weight(i) * frac;
          if (model->has_conformal()) {
            double v = model->conformal_factor()[i];
            wgt *= std::exp((4.0 - q) * v);
          }
          s.add(wgt * std::pow(gradsq[i], 0.5 * q));
        }
      }
      diag.table.push_back({q, r, s.value()});
      if (s.value() > 0.0) {
        logr.push_back(std::log(r));
        logI.push_back(std::log(s.value()));
      }
    }
    if (logr.size() >= 2) diag.slopes.push_back({q, fitted_slope(logr, logI)});
  }
  return diag;
}

}  // namespace qcurv

#endif  // QCURV_VARIATIONAL_HPP
