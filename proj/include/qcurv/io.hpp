#ifndef QCURV_IO_HPP
#define QCURV_IO_HPP

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "qcurv/blowup.hpp"
#include "qcurv/geometry.hpp"
#include "qcurv/greenfn.hpp"
#include "qcurv/paneitz.hpp"
#include "qcurv/variational.hpp"

namespace qcurv {

using nlohmann::json;

/// Round-trip-safe numeric formatting (17 significant digits).
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline std::string kind_name(ModelKind k) {
  return k == ModelKind::torus ? "torus" : "sphere";
}

inline json to_json(const ModelPtr& model) {
  json j;
  j["kind"] = kind_name(model->kind());
  if (model->is_torus())
    j["resolution"] = model->axis_points();
  else
    j["resolution"] = {{"l_max", model->l_max()}, {"n_theta", model->theta_points()}};
  j["volume"] = model->volume();
  j["has_conformal_factor"] = model->has_conformal();
  return j;
}

inline json to_json(const Field& f) {
  json j = to_json(f.model_ptr());
  j.erase("volume");
  j.erase("has_conformal_factor");
  j["representation"] = f.repr() == Repr::physical ? "physical" : "spectral";
  j["values"] = f.values();
  return j;
}

inline json to_json(const GreenExpansion& e) {
  json j;
  j["S0"] = e.s0;
  j["a"] = e.a;
  std::vector<double> upper;
  for (int i = 0; i < 4; ++i)
    for (int k = i; k < 4; ++k) upper.push_back(e.a_sym[i][k]);
  j["a_sym"] = upper;  // row-major upper triangle, 10 entries
  j["window"] = {e.window.first, e.window.second};
  j["residual"] = e.residual;
  j["samples"] = e.samples;
  if (e.log_coef) j["log_coef"] = *e.log_coef;
  return j;
}

inline json to_json(const CapacityProblem& p) {
  return json{{"r", p.r}, {"R", p.R}, {"P1", p.P1}, {"P2", p.P2}, {"Q1", p.Q1}, {"Q2", p.Q2}};
}

inline json to_json(const CapacitySolution& s) {
  json j;
  j["A"] = s.A;
  j["B"] = s.B;
  j["C"] = s.C;
  j["D"] = s.D;
  j["rho"] = s.rho;
  j["energy"] = s.energy;
  j["closed_form_A"] = s.closed_A;
  j["closed_form_B"] = s.closed_B;
  j["boundary_residual"] = s.boundary_residual;
  return j;
}

inline json to_json(const MinimizeResult& r, bool include_field = false) {
  json j;
  j["value"] = r.value;
  j["grad_norm"] = r.grad_norm;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["eps"] = r.eps;
  j["mass"] = r.mass;
  j["normalizing_shift"] = 0.25 * std::log(kEightPiSq / r.mass);
  if (include_field) j["u"] = to_json(r.u);
  return j;
}

inline json to_json(const AdamsReport& r) {
  json j;
  j["deficit_at_zero"] = r.deficit_at_zero;
  j["max_deficit"] = r.max_deficit;
  j["max_deficit_doubled"] = r.max_deficit_doubled;
  j["ladder"] = r.ladder;
  j["samples"] = r.samples;
  return j;
}

inline json to_json(const Point& p) {
  json j;
  if (p.is_pole)
    j["pole"] = true;
  else if (p.theta_node >= 0)
    j["theta_node"] = p.theta_node;
  else
    j["index"] = p.index;
  return j;
}

inline json to_json(const BlowupDiagnostics& d) {
  json j;
  j["x_max"] = to_json(d.x_max);
  j["m"] = d.m;
  j["r_scale"] = d.r_scale;
  j["lambda"] = d.lambda;
  j["profile_gap"] = d.profile_gap;
  json table = json::array();
  for (const auto& row : d.table)
    table.push_back({{"q", row.q}, {"radius", row.radius}, {"integral", row.integral}});
  j["scaling_table"] = table;
  json slopes = json::array();
  for (const auto& s : d.slopes) slopes.push_back({{"q", s.q}, {"slope", s.slope}});
  j["slopes"] = slopes;
  return j;
}

inline json to_json(const LambdaReport& r) {
  json j;
  json entries = json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"point", to_json(e.p)},
                       {"S0", e.s0},
                       {"QG_integral", e.qg_integral},
                       {"lambda_value", e.lambda_value}});
  j["entries"] = entries;
  j["argmin_index"] = r.argmin_index;
  j["min_value"] = r.min_value;
  return j;
}

inline json to_json(const TestFnExpansion& e) {
  json j;
  j["numeric_log_mass"] = e.numeric_log_mass;
  j["predicted_log_mass"] = e.predicted_log_mass;
  j["gap"] = e.gap;
  j["eps2_coefficient"] = e.eps2_coefficient;
  return j;
}

inline json to_json(const GreenShiftReport& r) {
  json j;
  j["sup_mod_const"] = r.sup_mod_const;
  j["const_shift"] = r.const_shift;
  j["S0_background"] = r.s0_background;
  j["S0_conformal"] = r.s0_conformal;
  j["S0_discrepancy"] = r.s0_discrepancy;
  j["v_at_p"] = r.v_at_p;
  return j;
}

inline json to_json(const CriterionResult& r) {
  return json{{"value", r.value}, {"satisfied", r.satisfied}};
}

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

/// Multiplier table export: rows (mode, mu).
inline void write_multiplier_csv(std::ostream& os, const ModelPtr& model, int max_degree) {
  if (model->is_torus()) {
    os << "k0,k1,k2,k3,mu\n";
    for (int i0 = -max_degree; i0 <= max_degree; ++i0)
      for (int i1 = -max_degree; i1 <= max_degree; ++i1)
        for (int i2 = -max_degree; i2 <= max_degree; ++i2)
          for (int i3 = -max_degree; i3 <= max_degree; ++i3) {
            std::array<int, 4> k = {i0, i1, i2, i3};
            os << i0 << ',' << i1 << ',' << i2 << ',' << i3 << ','
               << fmt17(paneitz_multiplier(*model, k)) << '\n';
          }
  } else {
    os << "ell,mu\n";
    for (int l = 0; l <= max_degree; ++l)
      os << l << ',' << fmt17(paneitz_multiplier(*model, l)) << '\n';
  }
}

inline void write_trace_csv(std::ostream& os, const MinimizeResult& r) {
  os << "iter,value,grad_norm,step\n";
  for (const auto& row : r.trace)
    os << row.iter << ',' << fmt17(row.value) << ',' << fmt17(row.grad_norm) << ','
       << fmt17(row.step) << '\n';
}

}  // namespace qcurv

#endif  // QCURV_IO_HPP
