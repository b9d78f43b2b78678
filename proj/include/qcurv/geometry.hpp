#ifndef QCURV_GEOMETRY_HPP
#define QCURV_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "qcurv/util.hpp"

namespace qcurv {

enum class ModelKind { torus, sphere };
enum class Repr { physical, spectral };

/// A sample point on a model: a grid index on the torus, or the zonal pole /
/// a colatitude node on the sphere.
struct Point {
  bool is_pole = false;
  std::array<int, 4> index{0, 0, 0, 0};
  int theta_node = -1;

  static Point pole() {
    Point p;
    p.is_pole = true;
    return p;
  }
  static Point torus(int i0, int i1, int i2, int i3) {
    Point p;
    p.index = {i0, i1, i2, i3};
    return p;
  }
  static Point sphere_node(int i) {
    Point p;
    p.theta_node = i;
    return p;
  }
};

struct ModelSpec {
  ModelKind kind = ModelKind::torus;
  int n = 16;      // torus: grid points per axis
  int l_max = 64;  // sphere: max zonal degree
  int n_theta = 0; // sphere: colatitude nodes (0 -> 2*l_max)
  std::vector<double> conformal_values;  // optional factor v, physical samples
};

class Field;

/// One of the two model geometries: the unit flat 4-torus (uniform grid,
/// 4-D Fourier basis) or the round 4-sphere restricted to zonal functions
/// (Gauss-Legendre colatitude nodes, normalized Gegenbauer C_l^{3/2} basis).
/// Immutable after construction.
class ManifoldModel : public std::enable_shared_from_this<ManifoldModel> {
 public:
  static std::shared_ptr<const ManifoldModel> make(const ModelSpec& spec);

  ~ManifoldModel() {
    if (plan_r2c_) fftw_destroy_plan(plan_r2c_);
    if (plan_c2r_) fftw_destroy_plan(plan_c2r_);
    if (buf_real_) fftw_free(buf_real_);
    if (buf_cplx_) fftw_free(buf_cplx_);
  }
  ManifoldModel(const ManifoldModel&) = delete;
  ManifoldModel& operator=(const ManifoldModel&) = delete;

  ModelKind kind() const { return kind_; }
  bool is_torus() const { return kind_ == ModelKind::torus; }
  int axis_points() const { return n_; }
  int l_max() const { return lmax_; }
  int theta_points() const { return ntheta_; }

  std::size_t sample_count() const {
    return is_torus() ? std::size_t(n_) * n_ * n_ * n_ : std::size_t(ntheta_);
  }
  std::size_t spectral_count() const {
    // torus: interleaved re/im of the half-complex r2c layout
    return is_torus() ? 2 * half_count() : std::size_t(lmax_ + 1);
  }
  std::size_t half_count() const {
    return std::size_t(n_) * n_ * n_ * (n_ / 2 + 1);
  }

  bool has_conformal() const { return !conformal_.empty(); }
  std::span<const double> conformal_factor() const { return conformal_; }
  std::span<const double> conformal_exp4() const { return exp4v_; }

  double volume() const { return volume_; }
  double background_volume() const { return bg_volume_; }

  /// Background quadrature weight of sample i (includes no conformal factor).
  double weight(std::size_t i) const {
    return is_torus() ? 1.0 / double(sample_count()) : wquad_[i];
  }
  std::span<const double> sphere_weights() const { return wquad_; }
  std::span<const double> theta() const { return theta_; }
  std::span<const double> cos_theta() const { return tnodes_; }

  // ---- torus indexing ----
  std::size_t torus_flat(const std::array<int, 4>& idx) const {
    std::size_t f = 0;
    for (int a = 0; a < 4; ++a) {
      int i = idx[a] % n_;
      if (i < 0) i += n_;
      f = f * n_ + std::size_t(i);
    }
    return f;
  }
  std::array<double, 4> torus_coord(std::size_t flat) const {
    std::array<double, 4> x;
    for (int a = 3; a >= 0; --a) {
      x[a] = double(flat % n_) / n_;
      flat /= n_;
    }
    return x;
  }
  /// Signed integer frequency of storage index i along one axis.
  int fold(int i) const { return i <= n_ / 2 ? i : i - n_; }

  // ---- torus transforms (coefficients c with f(x) = sum_k c_k e^{2 pi i k.x}) ----
  void forward(std::span<const double> phys, std::complex<double>* spec) const {
    std::lock_guard<std::mutex> lock(fft_mutex_);
    std::memcpy(buf_real_, phys.data(), sizeof(double) * sample_count());
    fftw_execute(plan_r2c_);
    const double inv = 1.0 / double(sample_count());
    auto* b = reinterpret_cast<std::complex<double>*>(buf_cplx_);
    for (std::size_t i = 0; i < half_count(); ++i) spec[i] = b[i] * inv;
  }
  void backward(std::span<const std::complex<double>> spec, double* phys) const {
    std::lock_guard<std::mutex> lock(fft_mutex_);
    auto* b = reinterpret_cast<std::complex<double>*>(buf_cplx_);
    std::memcpy(b, spec.data(), sizeof(std::complex<double>) * half_count());
    fftw_execute(plan_c2r_);
    std::memcpy(phys, buf_real_, sizeof(double) * sample_count());
  }

  // ---- sphere tables ----
  double zonal(int ell, int node) const { return Z_[std::size_t(ell) * ntheta_ + node]; }
  double zonal_at_pole(int ell) const { return Zpole_[ell]; }
  double zonal_dtheta(int ell, int node) const {
    return dZ_[std::size_t(ell) * ntheta_ + node];
  }
  void sphere_forward(std::span<const double> phys, double* coef) const {
    for (int l = 0; l <= lmax_; ++l) {
      KahanSum s;
      const double* zr = &Z_[std::size_t(l) * ntheta_];
      for (int i = 0; i < ntheta_; ++i) s.add(wquad_[i] * phys[i] * zr[i]);
      coef[l] = s.value();
    }
  }
  void sphere_backward(std::span<const double> coef, double* phys) const {
    for (int i = 0; i < ntheta_; ++i) {
      KahanSum s;
      for (int l = 0; l <= lmax_; ++l) s.add(coef[l] * Z_[std::size_t(l) * ntheta_ + i]);
      phys[i] = s.value();
    }
  }
  /// Evaluate a zonal coefficient series at arbitrary colatitude.
  double zonal_series_at(std::span<const double> coef, double th) const {
    const double t = std::cos(th);
    double c0 = 1.0, c1 = 3.0 * t;  // C_l^{3/2} recurrence
    KahanSum s;
    s.add(coef[0] * c0 / znorm_[0]);
    if (lmax_ >= 1) s.add(coef[1] * c1 / znorm_[1]);
    for (int l = 1; l < lmax_; ++l) {
      double c2 = ((2.0 * l + 3.0) * t * c1 - (l + 2.0) * c0) / (l + 1.0);
      s.add(coef[l + 1] * c2 / znorm_[l + 1]);
      c0 = c1;
      c1 = c2;
    }
    return s.value();
  }

 private:
  ManifoldModel() = default;
  void init_torus(const ModelSpec& spec);
  void init_sphere(const ModelSpec& spec);
  void init_conformal(const ModelSpec& spec);

  ModelKind kind_ = ModelKind::torus;
  int n_ = 0, lmax_ = 0, ntheta_ = 0;
  double volume_ = 0.0, bg_volume_ = 0.0;
  std::vector<double> conformal_;  // v at background samples
  std::vector<double> exp4v_;      // e^{4v}

  // torus FFT machinery
  mutable std::mutex fft_mutex_;
  fftw_plan plan_r2c_ = nullptr, plan_c2r_ = nullptr;
  double* buf_real_ = nullptr;
  fftw_complex* buf_cplx_ = nullptr;

  // sphere tables
  std::vector<double> tnodes_, theta_, wquad_;  // cos nodes, colatitudes, S^4 weights
  std::vector<double> Z_, dZ_, Zpole_, znorm_;  // basis tables
};

using ModelPtr = std::shared_ptr<const ManifoldModel>;

/// A real-valued function on a model; grid values on the torus, zonal
/// colatitude values on the sphere. Spectral representation stores Fourier
/// coefficients (interleaved re/im of the half-complex layout) on the torus
/// and zonal coefficients on the sphere.
class Field {
 public:
  Field(ModelPtr model, std::vector<double> values, Repr repr = Repr::physical)
      : model_(std::move(model)), repr_(repr), values_(std::move(values)) {
    const std::size_t want = repr_ == Repr::physical ? model_->sample_count()
                                                     : model_->spectral_count();
    if (values_.size() != want)
      throw std::invalid_argument("Field: value count does not match model");
  }

  static Field constant(ModelPtr model, double c) {
    std::vector<double> v(model->sample_count(), c);
    return Field(std::move(model), std::move(v));
  }
  static Field zero(ModelPtr model) { return constant(std::move(model), 0.0); }

  const ManifoldModel& model() const { return *model_; }
  const ModelPtr& model_ptr() const { return model_; }
  Repr repr() const { return repr_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  bool same_model(const Field& other) const { return model_ == other.model_; }

  Field to_physical() const {
    if (repr_ == Repr::physical) return *this;
    std::vector<double> phys(model_->sample_count());
    if (model_->is_torus()) {
      auto* c = reinterpret_cast<const std::complex<double>*>(values_.data());
      model_->backward({c, model_->half_count()}, phys.data());
    } else {
      model_->sphere_backward(values_, phys.data());
    }
    return Field(model_, std::move(phys), Repr::physical);
  }

  Field to_spectral() const {
    if (repr_ == Repr::spectral) return *this;
    std::vector<double> spec(model_->spectral_count());
    if (model_->is_torus()) {
      model_->forward(values_, reinterpret_cast<std::complex<double>*>(spec.data()));
    } else {
      model_->sphere_forward(values_, spec.data());
    }
    return Field(model_, std::move(spec), Repr::spectral);
  }

  Field& operator+=(const Field& o) {
    check_binary(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_binary(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  Field& operator*=(double s) {
    for (auto& v : values_) v *= s;
    return *this;
  }
  Field& shift(double c) {
    if (repr_ != Repr::physical) throw std::logic_error("Field::shift: physical only");
    for (auto& v : values_) v += c;
    return *this;
  }
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }

  double max_abs() const {
    double m = 0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }
  double max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : values_) m = std::max(m, v);
    return m;
  }

 private:
  void check_binary(const Field& o) const {
    if (model_ != o.model_ || repr_ != o.repr_)
      throw std::invalid_argument("Field: model mismatch");
  }
  ModelPtr model_;
  Repr repr_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// ManifoldModel construction
// ---------------------------------------------------------------------------

inline void ManifoldModel::init_torus(const ModelSpec& spec) {
  if (spec.n < 8) throw std::invalid_argument("make_model: torus needs n >= 8 per axis");
  n_ = spec.n;
  bg_volume_ = 1.0;
  const int n = n_;
  buf_real_ = fftw_alloc_real(sample_count());
  buf_cplx_ = fftw_alloc_complex(half_count());
  int dims[4] = {n, n, n, n};
  plan_r2c_ = fftw_plan_dft_r2c(4, dims, buf_real_, buf_cplx_, FFTW_ESTIMATE);
  plan_c2r_ = fftw_plan_dft_c2r(4, dims, buf_cplx_, buf_real_, FFTW_ESTIMATE);
  if (!plan_r2c_ || !plan_c2r_) throw std::runtime_error("make_model: FFTW plan failed");
}

inline void ManifoldModel::init_sphere(const ModelSpec& spec) {
  if (spec.l_max < 8) throw std::invalid_argument("make_model: sphere needs l_max >= 8");
  lmax_ = spec.l_max;
  ntheta_ = spec.n_theta > 0 ? spec.n_theta : 2 * lmax_;
  if (ntheta_ < 2 * lmax_)
    throw std::invalid_argument("make_model: sphere needs n_theta >= 2*l_max");
  GaussRule gl = gauss_legendre(ntheta_);
  tnodes_ = gl.x;
  theta_.resize(ntheta_);
  wquad_.resize(ntheta_);
  for (int i = 0; i < ntheta_; ++i) {
    theta_[i] = std::acos(tnodes_[i]);
    wquad_[i] = kTwoPiSq * gl.w[i] * (1.0 - tnodes_[i] * tnodes_[i]);
  }
  bg_volume_ = kahan_total(wquad_);

  // Gegenbauer C_l^{3/2} tables with L2(S^4) normalization.
  znorm_.resize(lmax_ + 1);
  for (int l = 0; l <= lmax_; ++l)
    znorm_[l] = std::sqrt(kTwoPiSq * (l + 1.0) * (l + 2.0) / (l + 1.5));
  Z_.resize(std::size_t(lmax_ + 1) * ntheta_);
  dZ_.resize(std::size_t(lmax_ + 1) * ntheta_);
  Zpole_.resize(lmax_ + 1);
  std::vector<double> c0(ntheta_, 1.0), c1(ntheta_), c2(ntheta_);
  for (int i = 0; i < ntheta_; ++i) c1[i] = 3.0 * tnodes_[i];
  for (int l = 0; l <= lmax_; ++l) {
    const std::vector<double>& row = (l == 0) ? c0 : c1;
    for (int i = 0; i < ntheta_; ++i) Z_[std::size_t(l) * ntheta_ + i] = row[i] / znorm_[l];
    Zpole_[l] = (l + 1.0) * (l + 2.0) / 2.0 / znorm_[l];
    if (l >= 1 && l < lmax_) {
      for (int i = 0; i < ntheta_; ++i)
        c2[i] = ((2.0 * l + 3.0) * tnodes_[i] * c1[i] - (l + 2.0) * c0[i]) / (l + 1.0);
      c0.swap(c1);
      c1.swap(c2);
    }
  }
  // d/dtheta of the basis: dC_l^{3/2}/dt = 3 C_{l-1}^{5/2}, dt/dtheta = -sin(theta)
  std::vector<double> d0(ntheta_, 1.0), d1(ntheta_), d2(ntheta_);
  for (int i = 0; i < ntheta_; ++i) d1[i] = 5.0 * tnodes_[i];
  for (int l = 0; l <= lmax_; ++l) {
    for (int i = 0; i < ntheta_; ++i) {
      double dCdt = 0.0;
      if (l >= 1) dCdt = 3.0 * ((l - 1 == 0) ? d0[i] : d1[i]);
      double sinth = std::sqrt(std::max(0.0, 1.0 - tnodes_[i] * tnodes_[i]));
      dZ_[std::size_t(l) * ntheta_ + i] = -sinth * dCdt / znorm_[l];
    }
    if (l >= 2 && l - 1 < lmax_) {
      int m = l - 1;  // advance C^{5/2} recurrence to degree m+1
      for (int i = 0; i < ntheta_; ++i)
        d2[i] = ((2.0 * m + 5.0) * tnodes_[i] * d1[i] - (m + 4.0) * d0[i]) / (m + 1.0);
      d0.swap(d1);
      d1.swap(d2);
    }
  }
}

inline void ManifoldModel::init_conformal(const ModelSpec& spec) {
  if (spec.conformal_values.empty()) {
    volume_ = bg_volume_;
    return;
  }
  if (spec.conformal_values.size() != sample_count())
    throw std::invalid_argument("make_model: conformal factor sample count mismatch");
  conformal_ = spec.conformal_values;
  exp4v_.resize(conformal_.size());
  for (std::size_t i = 0; i < conformal_.size(); ++i) exp4v_[i] = std::exp(4.0 * conformal_[i]);
  KahanSum s;
  for (std::size_t i = 0; i < exp4v_.size(); ++i) s.add(weight(i) * exp4v_[i]);
  volume_ = s.value();
}

inline std::shared_ptr<const ManifoldModel> ManifoldModel::make(const ModelSpec& spec) {
  auto m = std::shared_ptr<ManifoldModel>(new ManifoldModel());
  m->kind_ = spec.kind;
  if (spec.kind == ModelKind::torus)
    m->init_torus(spec);
  else
    m->init_sphere(spec);
  m->init_conformal(spec);
  return m;
}

/// Zonal restriction on the sphere means the conformal factor is already a
/// function of colatitude only, which is what the sample layout stores; any
/// factor supplied per-node is zonal by construction. make_model with a
/// 4-D-varying sphere factor is therefore unrepresentable and rejected at the
/// sample-count check above. This helper builds the spec from a Field.
inline ModelPtr make_model(const ModelSpec& spec) { return ManifoldModel::make(spec); }

inline ModelPtr with_conformal_factor(const ModelPtr& base, const Field& v) {
  if (v.model_ptr() != base) throw std::invalid_argument("conformal factor: model mismatch");
  ModelSpec spec;
  spec.kind = base->kind();
  spec.n = base->axis_points();
  spec.l_max = base->l_max();
  spec.n_theta = base->theta_points();
  spec.conformal_values = v.to_physical().values();
  return ManifoldModel::make(spec);
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// Integral of f against dV_g, including the e^{4v} volume element when the
/// model carries a conformal factor.
inline double integrate(const ModelPtr& model, const Field& f) {
  if (f.model_ptr() != model) throw std::invalid_argument("integrate: model mismatch");
  const Field phys = f.to_physical();
  const auto& vals = phys.values();
  KahanSum s;
  if (model->has_conformal()) {
    auto e4 = model->conformal_exp4();
    for (std::size_t i = 0; i < vals.size(); ++i) s.add(model->weight(i) * vals[i] * e4[i]);
  } else {
    if (model->is_torus()) {
      const double w = 1.0 / double(model->sample_count());
      for (double v : vals) s.add(w * v);
    } else {
      auto w = model->sphere_weights();
      for (std::size_t i = 0; i < vals.size(); ++i) s.add(w[i] * vals[i]);
    }
  }
  return s.value();
}

inline double mean_value(const ModelPtr& model, const Field& f) {
  return integrate(model, f) / model->volume();
}

// ---------------------------------------------------------------------------
// S^3 moments
// ---------------------------------------------------------------------------

/// Product quadrature on S^3: Gauss-Chebyshev (2nd kind) in the first polar
/// angle, Gauss-Legendre in the second, uniform in the azimuth. Exact for
/// polynomials of total degree <= 2*order-1; total weight 2 pi^2.
struct S3Rule {
  std::vector<std::array<double, 4>> x;
  std::vector<double> w;
};

inline S3Rule s3_quadrature(int order = 16) {
  if (order < 2) throw std::invalid_argument("s3_quadrature: order >= 2");
  S3Rule rule;
  std::vector<double> u1(order), w1(order);
  for (int k = 1; k <= order; ++k) {
    double a = k * kPi / (order + 1);
    u1[k - 1] = std::cos(a);
    w1[k - 1] = kPi / (order + 1) * std::sin(a) * std::sin(a);
  }
  GaussRule g2 = gauss_legendre(order);
  const int nphi = 2 * order;
  rule.x.reserve(std::size_t(order) * order * nphi);
  rule.w.reserve(rule.x.capacity());
  for (int a = 0; a < order; ++a) {
    double s1 = std::sqrt(std::max(0.0, 1.0 - u1[a] * u1[a]));
    for (int b = 0; b < order; ++b) {
      double s2 = std::sqrt(std::max(0.0, 1.0 - g2.x[b] * g2.x[b]));
      for (int c = 0; c < nphi; ++c) {
        double phi = 2.0 * kPi * c / nphi;
        rule.x.push_back({u1[a], s1 * g2.x[b], s1 * s2 * std::cos(phi), s1 * s2 * std::sin(phi)});
        rule.w.push_back(w1[a] * g2.w[b] * (2.0 * kPi / nphi));
      }
    }
  }
  return rule;
}

inline const S3Rule& shared_s3_rule() {
  static const S3Rule r = s3_quadrature(16);
  return r;
}

/// Normalized S^3 moment (1/2pi^2) int prod x_{i} ds over the given axes.
inline double s3_moment(std::span<const int> axes) {
  if (axes.size() > 4)
    throw std::invalid_argument("s3_moment: multi-index length must be <= 4");
  for (int a : axes)
    if (a < 0 || a > 3) throw std::invalid_argument("s3_moment: axis out of range");
  const S3Rule& rule = shared_s3_rule();
  KahanSum s;
  for (std::size_t i = 0; i < rule.x.size(); ++i) {
    double p = rule.w[i];
    for (int a : axes) p *= rule.x[i][a];
    s.add(p);
  }
  return s.value() / kTwoPiSq;
}

inline double s3_moment(std::initializer_list<int> axes) {
  return s3_moment(std::span<const int>(axes.begin(), axes.size()));
}

}  // namespace qcurv

#endif  // QCURV_GEOMETRY_HPP
