#ifndef QCURV_GREENFN_HPP
#define QCURV_GREENFN_HPP

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "qcurv/geometry.hpp"
#include "qcurv/paneitz.hpp"

namespace qcurv {

// ---------------------------------------------------------------------------
// Green function of the Paneitz operator:
//   P_g G_p + 2 Q_g = 16 pi^2 delta_p,   int_M G_p dV_g = 0.
// The delta is represented spectrally (all modes equal), so G is the
// band-limited solution; the Q term makes the source exactly mean-free.
// ---------------------------------------------------------------------------

inline Field green_function(const ModelPtr& model, const Point& p) {
  const auto& mu = detail::multiplier_table(model).values();
  if (model->is_torus()) {
    if (p.is_pole || p.theta_node >= 0)
      throw std::invalid_argument("green_function: torus points are grid indices");
    const int n = model->axis_points();
    const int nh = n / 2 + 1;
    std::vector<double> vcoef;
    if (model->has_conformal()) {
      Field v(model, std::vector<double>(model->conformal_factor().begin(),
                                         model->conformal_factor().end()));
      vcoef = v.to_spectral().values();
    }
    std::vector<double> spec(model->spectral_count(), 0.0);
    auto* c = reinterpret_cast<std::complex<double>*>(spec.data());
    auto* vc = vcoef.empty() ? nullptr
                             : reinterpret_cast<const std::complex<double>*>(vcoef.data());
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < nh; ++l, ++idx) {
            if (mu[idx] == 0.0) continue;
            double phase = -2.0 * kPi *
                           (double(model->fold(i)) * p.index[0] + double(model->fold(j)) * p.index[1] +
                            double(model->fold(k)) * p.index[2] + double(l) * p.index[3]) /
                           n;
            std::complex<double> src =
                2.0 * kEightPiSq * std::complex<double>(std::cos(phase), std::sin(phase));
            if (vc) src -= mu[idx] * vc[idx];
            c[idx] = src / mu[idx];
          }
    Field g = Field(model, std::move(spec), Repr::spectral).to_physical();
    if (model->has_conformal()) g.shift(-integrate(model, g) / model->volume());
    return g;
  }
  if (!p.is_pole)
    throw std::invalid_argument(
        "green_function: sphere Green functions are zonal about the declared pole");
  std::vector<double> vcoef;
  if (model->has_conformal()) {
    Field v(model, std::vector<double>(model->conformal_factor().begin(),
                                       model->conformal_factor().end()));
    vcoef = v.to_spectral().values();
  }
  std::vector<double> coef(model->l_max() + 1, 0.0);
  for (int l = 1; l <= model->l_max(); ++l) {
    double src = 2.0 * kEightPiSq * model->zonal_at_pole(l);
    if (!vcoef.empty()) src -= mu[l] * vcoef[l];
    coef[l] = src / mu[l];
  }
  Field g = Field(model, std::move(coef), Repr::spectral).to_physical();
  if (model->has_conformal()) g.shift(-integrate(model, g) / model->volume());
  return g;
}

// ---------------------------------------------------------------------------
// Local expansion fit: G = -2 log r + S0 + a_i x^i + a_ij x^i x^j + O(r^{2+a})
// ---------------------------------------------------------------------------

struct GreenExpansion {
  double s0 = 0.0;
  std::array<double, 4> a{0, 0, 0, 0};
  std::array<std::array<double, 4>, 4> a_sym{};  // symmetric quadratic form
  std::pair<double, double> window{0.0, 0.0};
  double residual = 0.0;       // RMS misfit over the window
  std::size_t samples = 0;
  std::optional<double> log_coef;  // fitted coefficient of log r, if requested
};

struct FitOptions {
  bool fit_log_term = false;  // add log r as a regressor (near-diagonal check)
};

inline std::pair<double, double> default_fit_window(const ManifoldModel& model) {
  if (model.is_torus()) {
    // r in [4/n, 1/8], widened to stay non-empty at coarse resolutions and
    // capped by the quarter injectivity scale.
    double rmin = std::min(4.0 / model.axis_points(), 0.125);
    double rmax = std::min(std::max(0.125, 2.0 * rmin), 0.25);
    return {rmin, rmax};
  }
  return {0.15, kPi / 4.0};
}

namespace detail {

struct FitSamples {
  std::vector<std::array<double, 4>> x;  // displacement from p
  std::vector<double> r;
  std::vector<double> g;
};

inline FitSamples gather_fit_samples(const ModelPtr& model, const Field& g, const Point& p,
                                     std::pair<double, double> window) {
  FitSamples s;
  const Field gp = g.to_physical();
  if (model->is_torus()) {
    const int n = model->axis_points();
    const std::array<double, 4> xp = {double(p.index[0]) / n, double(p.index[1]) / n,
                                      double(p.index[2]) / n, double(p.index[3]) / n};
    const auto& vals = gp.values();
    for (std::size_t f = 0; f < vals.size(); ++f) {
      std::array<double, 4> x = model->torus_coord(f);
      double r2 = 0.0;
      for (int a = 0; a < 4; ++a) {
        double d = x[a] - xp[a];
        d -= std::round(d);
        x[a] = d;
        r2 += d * d;
      }
      double r = std::sqrt(r2);
      if (r < window.first || r > window.second) continue;
      s.x.push_back(x);
      s.r.push_back(r);
      s.g.push_back(vals[f]);
    }
  } else {
    auto theta = model->theta();
    const auto& vals = gp.values();
    for (int i = 0; i < model->theta_points(); ++i) {
      double r = theta[i];
      if (r < window.first || r > window.second) continue;
      s.x.push_back({r, 0.0, 0.0, 0.0});
      s.r.push_back(r);
      s.g.push_back(vals[i]);
    }
  }
  return s;
}

inline std::size_t distinct_radii(const std::vector<double>& r) {
  std::vector<double> sorted = r;
  std::sort(sorted.begin(), sorted.end());
  std::size_t count = 0;
  double last = -1.0;
  for (double v : sorted) {
    if (count == 0 || v > last + 1e-12) {
      ++count;
      last = v;
    }
  }
  return count;
}

}  // namespace detail

/// Least-squares fit of G + 2 log r against {1, x^i, x^i x^j} over grid
/// samples in the window. On the sphere the zonal symmetry reduces the basis
/// to {1, r^2}: a_i = 0 and a_sym is a multiple of the identity.
inline GreenExpansion expansion_fit(const ModelPtr& model, const Field& g, const Point& p,
                                    std::pair<double, double> window,
                                    const FitOptions& opts = {}) {
  if (g.model_ptr() != model) throw std::invalid_argument("expansion_fit: model mismatch");
  const double spacing = model->is_torus() ? 1.0 / model->axis_points()
                                           : kPi / model->theta_points();
  const double inj4 = model->is_torus() ? 0.25 : kPi / 4.0;
  if (window.first < 2.0 * spacing)
    throw std::invalid_argument("expansion_fit: r_min below twice the grid spacing");
  if (window.second > inj4 + 1e-12)
    throw std::invalid_argument("expansion_fit: r_max exceeds a quarter injectivity scale");
  detail::FitSamples s = detail::gather_fit_samples(model, g, p, window);
  if (detail::distinct_radii(s.r) < 8)
    throw std::invalid_argument("expansion_fit: window too narrow (< 8 radial samples)");

  const bool torus = model->is_torus();
  const int quad_cols = torus ? 10 : 1;
  const int lin_cols = torus ? 4 : 0;
  const int ncols = 1 + lin_cols + quad_cols + (opts.fit_log_term ? 1 : 0);
  Eigen::MatrixXd A(s.x.size(), ncols);
  Eigen::VectorXd b(s.x.size());
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    int c = 0;
    A(i, c++) = 1.0;
    if (torus) {
      for (int a = 0; a < 4; ++a) A(i, c++) = s.x[i][a];
      for (int a = 0; a < 4; ++a)
        for (int d = a; d < 4; ++d) A(i, c++) = s.x[i][a] * s.x[i][d];
    } else {
      A(i, c++) = s.r[i] * s.r[i];
    }
    if (opts.fit_log_term) A(i, c++) = std::log(s.r[i]);
    b(i) = s.g[i] + (opts.fit_log_term ? 0.0 : 2.0 * std::log(s.r[i]));
  }
  Eigen::VectorXd sol = A.colPivHouseholderQr().solve(b);

  GreenExpansion out;
  out.window = window;
  out.samples = s.x.size();
  out.s0 = sol(0);
  if (torus) {
    for (int a = 0; a < 4; ++a) out.a[a] = sol(1 + a);
    int c = 5;
    for (int a = 0; a < 4; ++a)
      for (int d = a; d < 4; ++d) {
        double m = sol(c++);
        if (a == d)
          out.a_sym[a][a] = m;
        else
          out.a_sym[a][d] = out.a_sym[d][a] = 0.5 * m;
      }
  } else {
    double cquad = sol(1);
    for (int a = 0; a < 4; ++a) out.a_sym[a][a] = cquad;
  }
  if (opts.fit_log_term) out.log_coef = sol(ncols - 1);
  out.residual = std::sqrt((A * sol - b).squaredNorm() / double(s.x.size()));
  return out;
}

inline GreenExpansion expansion_fit(const ModelPtr& model, const Field& g, const Point& p) {
  return expansion_fit(model, g, p, default_fit_window(*model));
}

// ---------------------------------------------------------------------------
// Conformal shift check: with gt = e^{2v} g, the Green function transforms as
// Gt = G - v and the expansion constant as St0 = S0 + v(p). The mean-zero
// normalization in gt differs from G - v by a constant, so both comparisons
// are made modulo that constant, which is reported separately.
// ---------------------------------------------------------------------------

struct GreenShiftReport {
  double sup_mod_const = 0.0;   // inf_c ||Gt - (G - v) - c||_inf
  double const_shift = 0.0;     // the best constant c
  double s0_background = 0.0;   // S0 of g
  double s0_conformal = 0.0;    // St0 of gt, in gt normal coordinates
  double s0_discrepancy = 0.0;  // St0 - (S0 + v(p)), modulo const_shift
  double v_at_p = 0.0;
};

inline GreenShiftReport green_conformal_check(const ModelPtr& model, const Field& v,
                                              const Point& p,
                                              std::pair<double, double> window = {0.04, 0.12}) {
  if (model->is_torus() || model->has_conformal())
    throw std::invalid_argument("green_conformal_check: background sphere model required");
  if (!p.is_pole)
    throw std::invalid_argument("green_conformal_check: sphere point must be the pole");
  if (v.model_ptr() != model)
    throw std::invalid_argument("green_conformal_check: model mismatch");

  const Field g = green_function(model, p);
  ModelPtr tilted = with_conformal_factor(model, v);
  const Field gt_on_tilted = green_function(tilted, p);

  // same colatitude nodes on both models; compare raw values
  const std::vector<double>& gv = g.values();
  const std::vector<double> gtv = gt_on_tilted.values();
  const std::vector<double> vv = v.to_physical().values();
  double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
  std::vector<double> diff(gv.size());
  for (std::size_t i = 0; i < gv.size(); ++i) {
    diff[i] = gtv[i] - (gv[i] - vv[i]);
    dmin = std::min(dmin, diff[i]);
    dmax = std::max(dmax, diff[i]);
  }

  GreenShiftReport rep;
  rep.const_shift = 0.5 * (dmax + dmin);
  rep.sup_mod_const = 0.5 * (dmax - dmin);

  const double vp = model->zonal_series_at(v.to_spectral().values(), 0.0);
  rep.v_at_p = vp;
  Field gt_on_base(model, std::vector<double>(gtv));  // same nodes, background fit
  GreenExpansion fit_t = expansion_fit(model, gt_on_base, p, window);
  GreenExpansion fit_b = expansion_fit(model, g, p, window);
  rep.s0_background = fit_b.s0;
  // dist_gt = e^{v(p)} dist_g near p, so the gt-coordinate constant term is
  // the background fit constant plus 2 v(p).
  rep.s0_conformal = fit_t.s0 + 2.0 * vp;
  rep.s0_discrepancy = rep.s0_conformal - (rep.s0_background + vp) - rep.const_shift;
  return rep;
}

}  // namespace qcurv

#endif  // QCURV_GREENFN_HPP
