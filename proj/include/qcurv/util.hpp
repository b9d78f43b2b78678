#ifndef QCURV_UTIL_HPP
#define QCURV_UTIL_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcurv {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kPiSq = kPi * kPi;
inline constexpr double kTwoPiSq = 2.0 * kPiSq;       // |S^3|
inline constexpr double kEightPiSq = 8.0 * kPiSq;     // critical total Q-curvature
inline constexpr double kSphereVolume = 8.0 * kPiSq / 3.0;  // |S^4|

/// Compensated (Kahan) summation; fixed left-to-right order for determinism.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

inline double kahan_total(std::span<const double> xs) {
  KahanSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

/// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
};

inline GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1 required");
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev initial guess, refined by Newton on P_n(x) = 0.
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.x[n - 1 - i] = x;
    r.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

/// Adaptive panel integration with an embedded Gauss pair (8 vs 16 points).
/// Bisects until the pair agrees to `tol` (absolute) on each panel, or the
/// disagreement reaches the roundoff floor of the panel's absolute mass.
class AdaptiveGauss {
 public:
  AdaptiveGauss() : g8_(gauss_legendre(8)), g16_(gauss_legendre(16)) {}

  double integrate(const std::function<double(double)>& f, double a, double b,
                   double tol = 1e-10, int max_depth = 32) const {
    return rec(f, a, b, tol, max_depth);
  }

 private:
  struct Panel {
    double value;
    double abs_mass;
  };
  Panel panel(const GaussRule& g, const std::function<double(double)>& f, double a,
              double b) const {
    double h = 0.5 * (b - a), m = 0.5 * (a + b);
    KahanSum s;
    double mass = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      double term = g.w[i] * f(m + h * g.x[i]);
      s.add(term);
      mass += std::abs(term);
    }
    return {h * s.value(), std::abs(h) * mass};
  }
  double rec(const std::function<double(double)>& f, double a, double b, double tol,
             int depth) const {
    Panel c = panel(g8_, f, a, b);
    Panel d = panel(g16_, f, a, b);
    double err = std::abs(d.value - c.value);
    double floor = 64.0 * std::numeric_limits<double>::epsilon() * (d.abs_mass + 1e-300);
    if (err <= std::max(tol, floor) || depth <= 0) return d.value;
    double m = 0.5 * (a + b);
    return rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1);
  }
  GaussRule g8_, g16_;
};

inline const AdaptiveGauss& shared_adaptive_gauss() {
  static const AdaptiveGauss g;
  return g;
}

inline double adaptive_integrate(const std::function<double(double)>& f, double a,
                                 double b, double tol = 1e-10) {
  return shared_adaptive_gauss().integrate(f, a, b, tol);
}

/// Least-squares slope of y against x.
inline double fitted_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fitted_slope: need matching arrays, size >= 2");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

inline double relative_error(double got, double want) {
  double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

}  // namespace qcurv

#endif  // QCURV_UTIL_HPP
