#ifndef QCURV_PANEITZ_HPP
#define QCURV_PANEITZ_HPP

#include <array>
#include <cmath>
#include <complex>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "qcurv/geometry.hpp"
#include "qcurv/util.hpp"

namespace qcurv {

// ---------------------------------------------------------------------------
// Multipliers. Background Paneitz operator is diagonal on the spectral basis:
// torus mode k: 16 pi^4 |k|^4 (flat background, P = Delta^2);
// sphere degree l: l(l+1)(l+2)(l+3), the positive convention with constant
// kernel. The literal sign reading l(l+3)(l(l+3)-2) fails the covariance and
// k-invariance checks; see tests.
// ---------------------------------------------------------------------------

inline double paneitz_multiplier(const ManifoldModel& model, const std::array<int, 4>& k) {
  if (!model.is_torus())
    throw std::invalid_argument("paneitz_multiplier: integer 4-mode is a torus quantity");
  double k2 = 0.0;
  for (int a = 0; a < 4; ++a) k2 += double(k[a]) * k[a];
  return 16.0 * kPiSq * kPiSq * k2 * k2;
}

inline double paneitz_multiplier(const ManifoldModel& model, int ell) {
  if (model.is_torus())
    throw std::invalid_argument("paneitz_multiplier: degree is a sphere quantity");
  return double(ell) * (ell + 1.0) * (ell + 2.0) * (ell + 3.0);
}

/// Immutable per-mode multiplier table for one model.
class SpectralMultiplier {
 public:
  explicit SpectralMultiplier(ModelPtr model) : model_(std::move(model)) {
    if (model_->is_torus()) {
      const int n = model_->axis_points();
      const int nh = n / 2 + 1;
      mu_.resize(model_->half_count());
      std::size_t idx = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < nh; ++l, ++idx) {
              std::array<int, 4> kk = {model_->fold(i), model_->fold(j), model_->fold(k), l};
              mu_[idx] = paneitz_multiplier(*model_, kk);
            }
    } else {
      mu_.resize(model_->l_max() + 1);
      for (int l = 0; l <= model_->l_max(); ++l) mu_[l] = paneitz_multiplier(*model_, l);
    }
  }
  const ModelPtr& model() const { return model_; }
  std::span<const double> values() const { return mu_; }
  double smallest_nonzero() const {
    return model_->is_torus() ? 16.0 * kPiSq * kPiSq : 24.0;
  }

 private:
  ModelPtr model_;
  std::vector<double> mu_;
};

namespace detail {

/// Shared multiplier table per live model instance.
inline const SpectralMultiplier& multiplier_table(const ModelPtr& model) {
  static std::mutex mu;
  static std::vector<std::pair<std::weak_ptr<const ManifoldModel>, std::shared_ptr<SpectralMultiplier>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  for (auto it = cache.begin(); it != cache.end();) {
    if (it->first.expired())
      it = cache.erase(it);
    else if (it->first.lock() == model)
      return *it->second;
    else
      ++it;
  }
  cache.emplace_back(model, std::make_shared<SpectralMultiplier>(model));
  return *cache.back().second;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Field helpers
// ---------------------------------------------------------------------------

inline Field hadamard(const Field& a, const Field& b) {
  if (a.model_ptr() != b.model_ptr()) throw std::invalid_argument("hadamard: model mismatch");
  Field pa = a.to_physical();
  const Field pb = b.to_physical();
  auto& va = pa.mutable_values();
  const auto& vb = pb.values();
  for (std::size_t i = 0; i < va.size(); ++i) va[i] *= vb[i];
  return pa;
}

template <typename F>
Field map_field(const Field& a, F&& f) {
  Field pa = a.to_physical();
  for (auto& v : pa.mutable_values()) v = f(v);
  return pa;
}

/// Multiply the spectral coefficients of u by a function of the multiplier,
/// returning a physical field. The constant mode is handled by `on_constant`.
/// The constant part is split off before transforming; otherwise its roundoff
/// leaks into high modes and gets amplified by the fourth-order multipliers.
template <typename Fn>
Field spectral_op(const ModelPtr& model, const Field& u, Fn&& factor, double on_constant) {
  if (u.model_ptr() != model) throw std::invalid_argument("spectral_op: model mismatch");
  const auto& mu = detail::multiplier_table(model).values();
  Field shifted = u.to_physical();
  KahanSum ms;
  for (std::size_t i = 0; i < shifted.values().size(); ++i)
    ms.add(model->weight(i) * shifted.values()[i]);
  const double mean0 = ms.value() / model->background_volume();
  shifted.shift(-mean0);
  Field spec = shifted.to_spectral();
  auto& vals = spec.mutable_values();
  if (model->is_torus()) {
    auto* c = reinterpret_cast<std::complex<double>*>(vals.data());
    for (std::size_t i = 0; i < model->half_count(); ++i)
      c[i] *= (mu[i] == 0.0) ? on_constant : factor(mu[i]);
  } else {
    for (std::size_t l = 0; l < vals.size(); ++l)
      vals[l] *= (mu[l] == 0.0) ? on_constant : factor(mu[l]);
  }
  Field out = spec.to_physical();
  if (on_constant != 0.0) out.shift(on_constant * mean0);
  return out;
}

// ---------------------------------------------------------------------------
// Operator application / inversion
// ---------------------------------------------------------------------------

/// P_g u. On a conformal metric g = e^{2v} g0 this is e^{-4v} P_{g0} u by
/// covariance; curvature of g is never assembled.
inline Field apply_paneitz(const ModelPtr& model, const Field& u) {
  Field pu = spectral_op(model, u, [](double m) { return m; }, 0.0);
  if (model->has_conformal()) {
    auto e4 = model->conformal_exp4();
    auto& v = pu.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] /= e4[i];
  }
  return pu;
}

/// Unique mean-zero solution of P_g u = f; requires int f dV_g = 0.
inline Field solve_paneitz(const ModelPtr& model, const Field& f) {
  if (f.model_ptr() != model) throw std::invalid_argument("solve_paneitz: model mismatch");
  Field rhs = f.to_physical();
  const double mass = integrate(model, rhs);
  const double nrm = std::sqrt(std::max(integrate(model, hadamard(rhs, rhs)), 0.0));
  if (std::abs(mass) > 1e-8 * std::max(nrm, 1e-300))
    throw std::invalid_argument(
        "solve_paneitz: right-hand side must have zero mean (constants are not in the "
        "range of P; solvability requires int f dV_g = 0)");
  if (model->has_conformal()) {
    // P_g u = f  <=>  P_{g0} u = e^{4v} f
    auto e4 = model->conformal_exp4();
    auto& v = rhs.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= e4[i];
  }
  return spectral_op(model, rhs, [](double m) { return 1.0 / m; }, 0.0);
}

// ---------------------------------------------------------------------------
// Q-curvature
// ---------------------------------------------------------------------------

struct QData {
  Field q;
  double k_total = 0.0;
};

/// Background Q-curvature field. Round sphere: Q = 3. Unit torus: the
/// effective constant 8 pi^2, the convention that puts the flat model into
/// the same critical-total class (2Q integrates to 16 pi^2 at volume one).
inline double background_q(const ManifoldModel& model) {
  return model.is_torus() ? kEightPiSq : 3.0;
}

/// Q-curvature of the conformal metric e^{2v} g_background via the
/// transformation law 2 Q = e^{-4v} (P v + 2 Q_0).
inline Field conformal_q(const ModelPtr& model, const Field& v) {
  Field pv = spectral_op(model, v, [](double m) { return m; }, 0.0);
  const double q0 = background_q(*model);
  Field vp = v.to_physical();
  auto& out = pv.mutable_values();
  const auto& vv = vp.values();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::exp(-4.0 * vv[i]) * (out[i] + 2.0 * q0) * 0.5;
  return pv;
}

inline QData q_field(const ModelPtr& model) {
  if (model->has_conformal()) {
    Field v(model, std::vector<double>(model->conformal_factor().begin(),
                                       model->conformal_factor().end()));
    Field q = conformal_q(model, v);
    return QData{q, integrate(model, q)};
  }
  Field q = Field::constant(model, background_q(*model));
  double k = model->is_torus() ? kEightPiSq : integrate(model, q);
  return QData{std::move(q), k};
}

// ---------------------------------------------------------------------------
// Energy pairing
// ---------------------------------------------------------------------------

/// int u P_g u dV_g, evaluated as the diagonal quadratic form in the
/// background basis (equal by integration by parts and covariance).
inline double energy_pairing(const ModelPtr& model, const Field& u) {
  if (u.model_ptr() != model) throw std::invalid_argument("energy_pairing: model mismatch");
  const auto& mu = detail::multiplier_table(model).values();
  const Field spec = u.to_spectral();
  const auto& vals = spec.values();
  KahanSum s;
  if (model->is_torus()) {
    const int n = model->axis_points();
    const int nh = n / 2 + 1;
    auto* c = reinterpret_cast<const std::complex<double>*>(vals.data());
    for (std::size_t i = 0; i < model->half_count(); ++i) {
      int l = int(i % nh);
      double gamma = (l == 0 || 2 * l == n) ? 1.0 : 2.0;
      s.add(gamma * mu[i] * std::norm(c[i]));
    }
  } else {
    for (std::size_t l = 0; l < vals.size(); ++l) s.add(mu[l] * vals[l] * vals[l]);
  }
  return s.value();
}

/// Cross pairing int u P_g w dV_g.
inline double energy_pairing(const ModelPtr& model, const Field& u, const Field& w) {
  const auto& mu = detail::multiplier_table(model).values();
  const Field su = u.to_spectral(), sw = w.to_spectral();
  KahanSum s;
  if (model->is_torus()) {
    const int n = model->axis_points();
    const int nh = n / 2 + 1;
    auto* cu = reinterpret_cast<const std::complex<double>*>(su.values().data());
    auto* cw = reinterpret_cast<const std::complex<double>*>(sw.values().data());
    for (std::size_t i = 0; i < model->half_count(); ++i) {
      int l = int(i % nh);
      double gamma = (l == 0 || 2 * l == n) ? 1.0 : 2.0;
      s.add(gamma * mu[i] * (cu[i].real() * cw[i].real() + cu[i].imag() * cw[i].imag()));
    }
  } else {
    for (std::size_t l = 0; l < su.values().size(); ++l)
      s.add(mu[l] * su.values()[l] * sw.values()[l]);
  }
  return s.value();
}

// ---------------------------------------------------------------------------
// Seeded band-limited random fields (lowest 8 degrees / |k|^2 <= 8),
// normalized to unit Paneitz energy.
// ---------------------------------------------------------------------------

inline Field band_limited_field(const ModelPtr& model, std::uint64_t seed,
                                bool unit_energy = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (model->is_torus()) {
    const int n = model->axis_points();
    const int nh = n / 2 + 1;
    std::vector<double> spec(model->spectral_count(), 0.0);
    auto* c = reinterpret_cast<std::complex<double>*>(spec.data());
    auto put = [&](const std::array<int, 4>& k, std::complex<double> z) {
      // store z at k and conj(z) at -k wherever the half layout keeps them
      auto store = [&](std::array<int, 4> kk, std::complex<double> zz) {
        if (kk[3] < 0 || kk[3] > n / 2) return;
        std::size_t idx = 0;
        for (int a = 0; a < 3; ++a) {
          int i = kk[a] % n;
          if (i < 0) i += n;
          idx = idx * n + std::size_t(i);
        }
        idx = idx * nh + std::size_t(kk[3]);
        c[idx] = zz;
      };
      store(k, z);
      store({-k[0], -k[1], -k[2], -k[3]}, std::conj(z));
    };
    for (int i0 = -2; i0 <= 2; ++i0)
      for (int i1 = -2; i1 <= 2; ++i1)
        for (int i2 = -2; i2 <= 2; ++i2)
          for (int i3 = -2; i3 <= 2; ++i3) {
            int k2 = i0 * i0 + i1 * i1 + i2 * i2 + i3 * i3;
            if (k2 == 0 || k2 > 8) continue;
            std::array<int, 4> k = {i0, i1, i2, i3};
            // canonical representative: first nonzero component positive
            int first = i0 != 0 ? i0 : i1 != 0 ? i1 : i2 != 0 ? i2 : i3;
            if (first < 0) continue;
            double re = gauss(rng), im = gauss(rng);
            put(k, std::complex<double>(re, im) * 0.5);
          }
    Field f(model, std::move(spec), Repr::spectral);
    Field phys = f.to_physical();
    if (unit_energy) {
      double e = energy_pairing(model, f);
      phys *= 1.0 / std::sqrt(e);
    }
    return phys;
  }
  std::vector<double> coef(model->l_max() + 1, 0.0);
  for (int l = 1; l <= std::min(8, model->l_max()); ++l) coef[l] = gauss(rng);
  Field f(model, std::move(coef), Repr::spectral);
  Field phys = f.to_physical();
  if (unit_energy) {
    double e = energy_pairing(model, f);
    phys *= 1.0 / std::sqrt(e);
  }
  return phys;
}

}  // namespace qcurv

#endif  // QCURV_PANEITZ_HPP
