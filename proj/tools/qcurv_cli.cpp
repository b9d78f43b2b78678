// Batch front end for the Q-curvature laboratory. Every subcommand echoes its
// fully-resolved parameters into the output document and writes JSON or CSV.
// Exit codes: 0 success, 1 numerical failure (e.g. non-convergence, with the
// partial result serialized), 2 argument errors.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qcurv/acceptance.hpp"
#include "qcurv/io.hpp"

using namespace qcurv;
using nlohmann::json;

namespace {

struct OutputOptions {
  std::string format = "json";
  std::string out_path;
  bool reproducible = false;
};

void add_output_flags(CLI::App* cmd, OutputOptions& opts) {
  cmd->add_option("--format", opts.format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  cmd->add_option("--out", opts.out_path,
                  "Output path (default stdout; QCURV_OUT_DIR prefixes relative paths)");
  cmd->add_flag("--reproducible", opts.reproducible,
                "Suppress the timestamp field for byte-identical reruns");
}

std::string resolve_out_path(const std::string& path) {
  if (path.empty()) return path;
  const char* dir = std::getenv("QCURV_OUT_DIR");
  if (dir && !path.empty() && path.front() != '/') return std::string(dir) + "/" + path;
  return path;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void flatten(const json& j, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& rows) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), rows);
  } else if (j.is_number_float()) {
    rows.emplace_back(prefix, fmt17(j.get<double>()));
  } else {
    rows.emplace_back(prefix, csv_quote(j.dump()));
  }
}

int emit(const std::string& command, const json& params, const json& result,
         const OutputOptions& opts, int exit_code = 0) {
  json doc;
  doc["command"] = command;
  doc["params"] = params;
  if (!opts.reproducible) {
    doc["timestamp"] =
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
  }
  doc["result"] = result;

  std::ostringstream body;
  if (opts.format == "json") {
    body << doc.dump(2) << "\n";
  } else {
    for (auto it = params.begin(); it != params.end(); ++it)
      body << "# " << it.key() << " = " << it.value().dump() << "\n";
    body << "key,value\n";
    std::vector<std::pair<std::string, std::string>> rows;
    flatten(result, "", rows);
    for (auto& [k, v] : rows) body << k << "," << v << "\n";
  }
  const std::string path = resolve_out_path(opts.out_path);
  if (path.empty()) {
    std::cout << body.str();
  } else {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open output path " + path);
    f << body.str();
  }
  return exit_code;
}

struct ModelArgs {
  std::string kind = "torus";
  int n = 16;
  int lmax = 64;
  int ntheta = 0;
};

void add_model_flags(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("--kind", a.kind, "Model kind")
      ->check(CLI::IsMember({"torus", "sphere"}))
      ->capture_default_str();
  cmd->add_option("--n", a.n, "Torus grid points per axis")->capture_default_str();
  cmd->add_option("--lmax", a.lmax, "Sphere max zonal degree")->capture_default_str();
  cmd->add_option("--ntheta", a.ntheta, "Sphere colatitude nodes (default 2*lmax)");
}

ModelPtr build_model(const ModelArgs& a) {
  ModelSpec spec;
  spec.kind = a.kind == "torus" ? ModelKind::torus : ModelKind::sphere;
  spec.n = a.n;
  spec.l_max = a.lmax;
  spec.n_theta = a.ntheta;
  return make_model(spec);
}

json model_params(const ModelArgs& a) {
  json j;
  j["kind"] = a.kind;
  if (a.kind == "torus")
    j["n"] = a.n;
  else {
    j["lmax"] = a.lmax;
    j["ntheta"] = a.ntheta == 0 ? 2 * a.lmax : a.ntheta;
  }
  return j;
}

/// Prescribed-curvature presets: "const:<v>", or "cos:<amp>" for the
/// background constant modulated by cos(2 pi x_1) (torus) / cos(theta)
/// (sphere).
Field make_qt(const ModelPtr& model, const std::string& spec) {
  const double q0 = background_q(*model);
  if (spec.rfind("const:", 0) == 0) {
    double v = std::stod(spec.substr(6));
    return Field::constant(model, v);
  }
  if (spec.rfind("cos:", 0) == 0) {
    double amp = std::stod(spec.substr(4));
    std::vector<double> vals(model->sample_count());
    if (model->is_torus()) {
      for (std::size_t i = 0; i < vals.size(); ++i)
        vals[i] = q0 * (1.0 + amp * std::cos(2.0 * kPi * model->torus_coord(i)[0]));
    } else {
      for (int i = 0; i < model->theta_points(); ++i)
        vals[i] = q0 * (1.0 + amp * model->cos_theta()[i]);
    }
    return Field(model, std::move(vals));
  }
  if (spec == "background") return Field::constant(model, q0);
  throw CLI::ValidationError("--qt", "expected const:<v>, cos:<amp>, or background");
}

std::vector<double> parse_doubles(const std::string& s, std::size_t want = 0) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  if (want && out.size() != want)
    throw CLI::ValidationError("list", "expected " + std::to_string(want) + " values");
  return out;
}

std::array<double, 4> parse_vec4(const std::string& s) {
  auto v = parse_doubles(s, 4);
  return {v[0], v[1], v[2], v[3]};
}

std::array<std::array<double, 4>, 4> parse_sym(const std::string& s) {
  auto v = parse_doubles(s, 10);
  std::array<std::array<double, 4>, 4> m{};
  int c = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) {
      m[i][j] = m[j][i] = v[c++];
    }
  return m;
}

// ---------------------------------------------------------------------------
// sweep: flat key = value config with comma-separated grids
// ---------------------------------------------------------------------------

std::map<std::string, std::vector<std::string>> read_sweep_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw CLI::ValidationError("--config", "cannot open " + path);
  std::map<std::string, std::vector<std::string>> grid;
  std::string line;
  while (std::getline(f, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      auto last = s.find_last_not_of(" \t\r");
      s.erase(last == std::string::npos ? 0 : last + 1);
      return s;
    };
    std::string key = trim(line.substr(0, eq));
    std::string rest = trim(line.substr(eq + 1));
    if (key.empty() || rest.empty()) continue;
    std::vector<std::string> vals;
    std::stringstream ss(rest);
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(trim(tok));
    grid[key] = vals;
  }
  return grid;
}

int run_sweep(const std::string& config_path, const OutputOptions& opts) {
  auto grid = read_sweep_config(config_path);
  if (!grid.count("op") || grid["op"].size() != 1)
    throw CLI::ValidationError("--config", "sweep config needs a single 'op = <name>'");
  const std::string op = grid["op"][0];
  grid.erase("op");

  std::vector<std::string> keys;
  for (const std::string& lead : {"eps", "L", "lambda", "r", "R"})
    if (grid.count(lead)) keys.push_back(lead);
  for (auto& [k, v] : grid)
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  std::vector<std::size_t> idx(keys.size(), 0);

  auto get = [&](const std::string& key, double fallback,
                 const std::map<std::string, std::string>& row) {
    auto it = row.find(key);
    return it == row.end() ? fallback : std::stod(it->second);
  };

  std::ostringstream body;
  std::vector<std::string> out_cols;
  if (op == "bubble")
    out_cols = {"mass", "energy"};
  else if (op == "capacity")
    out_cols = {"A", "B", "energy"};
  else if (op == "testfn")
    out_cols = {"numeric", "predicted", "gap"};
  else if (op == "moments")
    out_cols = {"value"};
  else
    throw CLI::ValidationError("--config", "sweep op must be bubble|capacity|testfn|moments");
  for (std::size_t i = 0; i < keys.size(); ++i) body << keys[i] << ",";
  for (std::size_t i = 0; i < out_cols.size(); ++i)
    body << out_cols[i] << (i + 1 < out_cols.size() ? "," : "\n");

  bool done = keys.empty() ? grid.empty() : false;
  bool single_empty = keys.empty();
  while (!done) {
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < keys.size(); ++i) row[keys[i]] = grid[keys[i]][idx[i]];
    for (const auto& k : keys) body << row[k] << ",";
    if (op == "bubble") {
      double lambda = get("lambda", 0.25, row);
      std::string ls = row.count("L") ? row.at("L") : "inf";
      double L = ls == "inf" ? std::numeric_limits<double>::infinity() : std::stod(ls);
      double mass = bubble_mass(lambda, L);
      double energy = std::isinf(L) ? std::numeric_limits<double>::quiet_NaN()
                                    : bubble_energy(lambda, L);
      body << fmt17(mass) << "," << fmt17(energy) << "\n";
    } else if (op == "capacity") {
      CapacityProblem p{get("r", 0.1, row), get("R", 1.0, row), get("P1", 0, row),
                        get("P2", 0, row), get("Q1", 0, row), get("Q2", 0, row)};
      auto sol = capacity_solve(p);
      body << fmt17(sol.A) << "," << fmt17(sol.B) << "," << fmt17(sol.energy) << "\n";
    } else if (op == "testfn") {
      TaylorData t;
      t.s0 = get("s0", 0.0, row);
      auto p = TestFnParams::from_q(get("qp", 3.0, row), get("eps", 1e-3, row),
                                    get("L", 10.0, row), t);
      TestFnQuadOptions qo;
      qo.delta = get("delta", 0.5, row);
      auto e = testfn_mass_expansion(p, qo);
      body << fmt17(e.numeric_log_mass) << "," << fmt17(e.predicted_log_mass) << ","
           << fmt17(e.gap) << "\n";
    } else {  // moments
      std::vector<int> axes;
      if (row.count("index")) {
        std::stringstream ss(row.at("index"));
        std::string tok;
        while (std::getline(ss, tok, ';')) axes.push_back(std::stoi(tok));
      }
      body << fmt17(s3_moment(std::span<const int>(axes.data(), axes.size()))) << "\n";
    }
    if (single_empty) break;
    std::size_t k = 0;
    while (k < keys.size()) {
      if (++idx[k] < grid[keys[k]].size()) break;
      idx[k] = 0;
      ++k;
    }
    done = (k == keys.size());
  }

  const std::string path = resolve_out_path(opts.out_path);
  if (path.empty()) {
    std::cout << body.str();
  } else {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open output path " + path);
    f << body.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qcurv: numerics for the critical Q-curvature equation on model 4-manifolds"};
  app.require_subcommand(1);

  // --- model ---
  auto* cmd_model = app.add_subcommand("model", "Build a model and report volume and total Q");
  ModelArgs ma_model;
  OutputOptions out_model;
  add_model_flags(cmd_model, ma_model);
  add_output_flags(cmd_model, out_model);

  // --- paneitz ---
  auto* cmd_pan = app.add_subcommand("paneitz", "Multipliers of the Paneitz operator");
  ModelArgs ma_pan;
  OutputOptions out_pan;
  std::string pan_mode;
  int pan_ell = -1, pan_table = -1;
  add_model_flags(cmd_pan, ma_pan);
  add_output_flags(cmd_pan, out_pan);
  cmd_pan->add_option("--mode", pan_mode, "Torus mode k0,k1,k2,k3");
  cmd_pan->add_option("--ell", pan_ell, "Sphere degree");
  cmd_pan->add_option("--table", pan_table, "Emit CSV multiplier table up to this degree");

  // --- green ---
  auto* cmd_green = app.add_subcommand("green", "Green function and its local expansion");
  ModelArgs ma_green;
  OutputOptions out_green;
  std::string green_p = "0,0,0,0", green_window;
  bool green_fit_log = false;
  add_model_flags(cmd_green, ma_green);
  add_output_flags(cmd_green, out_green);
  cmd_green->add_option("--p", green_p, "Torus grid point i0,i1,i2,i3")->capture_default_str();
  cmd_green->add_option("--window", green_window, "Fit window rmin,rmax");
  cmd_green->add_flag("--fit-log", green_fit_log, "Also fit the log r coefficient");

  // --- minimize ---
  auto* cmd_min = app.add_subcommand("minimize", "Minimize II_eps by preconditioned descent");
  ModelArgs ma_min;
  OutputOptions out_min;
  double min_eps = 1.0, min_tol = 1e-8;
  int min_maxiter = 20000;
  std::uint64_t min_seed = 0;
  std::string min_qt = "background", min_trace;
  add_model_flags(cmd_min, ma_min);
  add_output_flags(cmd_min, out_min);
  cmd_min->add_option("--eps", min_eps, "Regularization eps in (0, 8 pi^2)")
      ->capture_default_str();
  cmd_min->add_option("--tol", min_tol, "Gradient norm tolerance")->capture_default_str();
  cmd_min->add_option("--max-iter", min_maxiter)->capture_default_str();
  cmd_min->add_option("--seed", min_seed)->capture_default_str();
  cmd_min->add_option("--qt", min_qt, "Prescribed curvature preset")->capture_default_str();
  cmd_min->add_option("--trace", min_trace, "Write iteration trace CSV to this path");

  // --- adams ---
  auto* cmd_adams = app.add_subcommand("adams", "Empirical Adams-Fontana deficit scan");
  ModelArgs ma_adams;
  ma_adams.kind = "sphere";
  OutputOptions out_adams;
  int adams_samples = 1000;
  std::uint64_t adams_seed = 0;
  add_model_flags(cmd_adams, ma_adams);
  add_output_flags(cmd_adams, out_adams);
  cmd_adams->add_option("--samples", adams_samples)->capture_default_str();
  cmd_adams->add_option("--seed", adams_seed)->capture_default_str();

  // --- bubble ---
  auto* cmd_bubble = app.add_subcommand("bubble", "Bubble profile mass and energy");
  OutputOptions out_bubble;
  double bubble_lambda = 0.25;
  std::string bubble_L = "inf";
  std::optional<double> bubble_qp;
  add_output_flags(cmd_bubble, out_bubble);
  cmd_bubble->add_option("--lambda", bubble_lambda, "Bubble parameter")->capture_default_str();
  cmd_bubble->add_option("--qp", bubble_qp, "Derive lambda from Qt(p) = qp");
  cmd_bubble->add_option("--L", bubble_L, "Ball radius (finite or 'inf')")
      ->capture_default_str();

  // --- capacity ---
  auto* cmd_cap = app.add_subcommand("capacity", "Annulus biharmonic capacity");
  OutputOptions out_cap;
  CapacityProblem cap_problem;
  int cap_oracle_n = 0;
  add_output_flags(cmd_cap, out_cap);
  cmd_cap->add_option("--r", cap_problem.r)->required();
  cmd_cap->add_option("--R", cap_problem.R)->required();
  cmd_cap->add_option("--P1", cap_problem.P1)->capture_default_str();
  cmd_cap->add_option("--P2", cap_problem.P2)->capture_default_str();
  cmd_cap->add_option("--Q1", cap_problem.Q1)->capture_default_str();
  cmd_cap->add_option("--Q2", cap_problem.Q2)->capture_default_str();
  cmd_cap->add_option("--oracle-n", cap_oracle_n, "Also run the finite-difference oracle");

  // --- testfn ---
  auto* cmd_testfn = app.add_subcommand("testfn", "Glued test function and mass expansion");
  OutputOptions out_testfn;
  double tf_qp = 3.0, tf_eps = 1e-3, tf_L = 10.0, tf_s0 = 0.0, tf_rscalar = 0.0;
  double tf_delta = 0.5;
  std::string tf_a, tf_asym, tf_b, tf_bsym;
  std::optional<double> tf_value_at;
  add_output_flags(cmd_testfn, out_testfn);
  cmd_testfn->add_option("--qp", tf_qp, "Qt(p)")->capture_default_str();
  cmd_testfn->add_option("--eps", tf_eps)->capture_default_str();
  cmd_testfn->add_option("--L", tf_L)->capture_default_str();
  cmd_testfn->add_option("--s0", tf_s0)->capture_default_str();
  cmd_testfn->add_option("--a", tf_a, "Linear S data a0,a1,a2,a3");
  cmd_testfn->add_option("--asym", tf_asym, "Quadratic S data, 10 upper-triangle values");
  cmd_testfn->add_option("--b", tf_b, "Linear Qt data");
  cmd_testfn->add_option("--bsym", tf_bsym, "Quadratic Qt data, 10 upper-triangle values");
  cmd_testfn->add_option("--r-scalar", tf_rscalar, "Scalar curvature at p")
      ->capture_default_str();
  cmd_testfn->add_option("--delta", tf_delta, "Outer annulus radius")->capture_default_str();
  cmd_testfn->add_option("--value-at", tf_value_at, "Also report phi_eps at this radius");

  // --- lambda ---
  auto* cmd_lambda = app.add_subcommand("lambda", "Threshold Lambda_g(Qt, p) map");
  ModelArgs ma_lambda;
  OutputOptions out_lambda;
  std::string lambda_qt = "background", lambda_points;
  add_model_flags(cmd_lambda, ma_lambda);
  add_output_flags(cmd_lambda, out_lambda);
  cmd_lambda->add_option("--qt", lambda_qt)->capture_default_str();
  cmd_lambda->add_option("--points", lambda_points,
                         "Semicolon-separated points (torus i,j,k,l; sphere node index or "
                         "'pole'); default a small sample");

  // --- criterion ---
  auto* cmd_crit = app.add_subcommand("criterion", "Existence criteria evaluators");
  OutputOptions out_crit;
  std::string crit_which = "main2";
  double crit_qp = 3.0, crit_lap_s = 0.0, crit_lap_q = 0.0, crit_r = 0.0;
  std::string crit_grad_s = "0,0,0,0", crit_grad_q = "0,0,0,0";
  std::optional<double> crit_dot;
  std::string crit_a = "0,0,0,0", crit_c = "0,0,0,0", crit_b = "0,0,0,0";
  std::string crit_asym, crit_csym, crit_bsym;
  add_output_flags(cmd_crit, out_crit);
  cmd_crit->add_option("--which", crit_which)->check(CLI::IsMember({"main2", "conformal"}));
  cmd_crit->add_option("--qp", crit_qp)->capture_default_str();
  cmd_crit->add_option("--grad-s", crit_grad_s)->capture_default_str();
  cmd_crit->add_option("--lap-s", crit_lap_s)->capture_default_str();
  cmd_crit->add_option("--grad-q", crit_grad_q)->capture_default_str();
  cmd_crit->add_option("--lap-q", crit_lap_q)->capture_default_str();
  cmd_crit->add_option("--r-scalar", crit_r)->capture_default_str();
  cmd_crit->add_option("--dot", crit_dot, "Override grad S . grad Qt");
  cmd_crit->add_option("--a", crit_a)->capture_default_str();
  cmd_crit->add_option("--asym", crit_asym);
  cmd_crit->add_option("--c", crit_c)->capture_default_str();
  cmd_crit->add_option("--csym", crit_csym);
  cmd_crit->add_option("--b", crit_b)->capture_default_str();
  cmd_crit->add_option("--bsym", crit_bsym);

  // --- moments ---
  auto* cmd_mom = app.add_subcommand("moments", "Normalized S^3 moments");
  OutputOptions out_mom;
  std::string mom_index;
  add_output_flags(cmd_mom, out_mom);
  cmd_mom->add_option("--index", mom_index, "Comma-separated axis indices, e.g. 0,0")
      ->required();

  // --- sweep ---
  auto* cmd_sweep = app.add_subcommand("sweep", "Parameter sweep from a key=value config");
  OutputOptions out_sweep;
  std::string sweep_config;
  add_output_flags(cmd_sweep, out_sweep);
  cmd_sweep->add_option("--config", sweep_config)->required();

  // --- accept ---
  auto* cmd_accept =
      app.add_subcommand("accept", "Run the acceptance criteria (0 = all)");
  int accept_id = 0;
  bool accept_list = false;
  cmd_accept->add_option("--criterion", accept_id, "Criterion number")
      ->capture_default_str();
  cmd_accept->add_flag("--list", accept_list, "List criteria");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_model->parsed()) {
      auto model = build_model(ma_model);
      auto qd = q_field(model);
      json result = to_json(model);
      result["k_total"] = qd.k_total;
      return emit("model", model_params(ma_model), result, out_model);
    }
    if (cmd_pan->parsed()) {
      auto model = build_model(ma_pan);
      json params = model_params(ma_pan);
      if (pan_table >= 0) {
        params["table"] = pan_table;
        std::ostringstream os;
        write_multiplier_csv(os, model, pan_table);
        const std::string path = resolve_out_path(out_pan.out_path);
        if (path.empty()) {
          std::cout << os.str();
        } else {
          std::ofstream f(path);
          f << os.str();
        }
        return 0;
      }
      json result;
      if (!pan_mode.empty()) {
        auto v = parse_doubles(pan_mode, 4);
        std::array<int, 4> k = {int(v[0]), int(v[1]), int(v[2]), int(v[3])};
        params["mode"] = k;
        result["mu"] = paneitz_multiplier(*model, k);
      } else if (pan_ell >= 0) {
        params["ell"] = pan_ell;
        result["mu"] = paneitz_multiplier(*model, pan_ell);
      } else {
        throw CLI::ValidationError("paneitz", "need --mode, --ell, or --table");
      }
      return emit("paneitz", params, result, out_pan);
    }
    if (cmd_green->parsed()) {
      auto model = build_model(ma_green);
      json params = model_params(ma_green);
      Point p = Point::pole();
      if (model->is_torus()) {
        auto v = parse_doubles(green_p, 4);
        p = Point::torus(int(v[0]), int(v[1]), int(v[2]), int(v[3]));
        params["p"] = p.index;
      } else {
        params["p"] = "pole";
      }
      auto window = default_fit_window(*model);
      if (!green_window.empty()) {
        auto w = parse_doubles(green_window, 2);
        window = {w[0], w[1]};
      }
      params["window"] = {window.first, window.second};
      params["fit_log"] = green_fit_log;
      Field g = green_function(model, p);
      FitOptions fo;
      fo.fit_log_term = green_fit_log;
      GreenExpansion fit = expansion_fit(model, g, p, window, fo);
      json result = to_json(fit);
      result["int_G"] = integrate(model, g);
      return emit("green", params, result, out_green);
    }
    if (cmd_min->parsed()) {
      auto model = build_model(ma_min);
      json params = model_params(ma_min);
      params["eps"] = min_eps;
      params["tol"] = min_tol;
      params["max_iter"] = min_maxiter;
      params["seed"] = min_seed;
      params["qt"] = min_qt;
      Field qt = make_qt(model, min_qt);
      MinimizeOptions mo;
      mo.tol = min_tol;
      mo.max_iter = min_maxiter;
      mo.seed = min_seed;
      mo.keep_trace = !min_trace.empty();
      MinimizeResult res = minimize_II_eps(model, qt, min_eps, mo);
      if (!min_trace.empty()) {
        std::ofstream tf(resolve_out_path(min_trace));
        write_trace_csv(tf, res);
      }
      return emit("minimize", params, to_json(res), out_min, res.converged ? 0 : 1);
    }
    if (cmd_adams->parsed()) {
      auto model = build_model(ma_adams);
      json params = model_params(ma_adams);
      params["samples"] = adams_samples;
      params["seed"] = adams_seed;
      AdamsReport rep = adams_check(model, adams_samples, adams_seed);
      return emit("adams", params, to_json(rep), out_adams);
    }
    if (cmd_bubble->parsed()) {
      double lambda = bubble_qp ? BubbleParams::from_q(*bubble_qp, 1.0).lambda : bubble_lambda;
      double L = bubble_L == "inf" ? std::numeric_limits<double>::infinity()
                                   : std::stod(bubble_L);
      json params;
      params["lambda"] = lambda;
      params["L"] = bubble_L;
      if (bubble_qp) params["qp"] = *bubble_qp;
      json result;
      result["mass"] = bubble_mass(lambda, L);
      if (!std::isinf(L)) {
        result["energy"] = bubble_energy(lambda, L);
        auto bp = bubble_profile(lambda, L);
        result["w_at_L"] = bp.w;
        result["laplacian_at_L"] = bp.laplacian;
      }
      return emit("bubble", params, result, out_bubble);
    }
    if (cmd_cap->parsed()) {
      json params = to_json(cap_problem);
      CapacitySolution sol = capacity_solve(cap_problem);
      json result = to_json(sol);
      if (cap_oracle_n > 0) {
        params["oracle_n"] = cap_oracle_n;
        result["oracle_energy"] = capacity_oracle(cap_problem, cap_oracle_n);
      }
      return emit("capacity", params, result, out_cap);
    }
    if (cmd_testfn->parsed()) {
      TaylorData t;
      t.s0 = tf_s0;
      t.r_scalar = tf_rscalar;
      if (!tf_a.empty()) t.a = parse_vec4(tf_a);
      if (!tf_asym.empty()) t.a_sym = parse_sym(tf_asym);
      if (!tf_b.empty()) t.b = parse_vec4(tf_b);
      if (!tf_bsym.empty()) t.b_sym = parse_sym(tf_bsym);
      TestFnParams p = TestFnParams::from_q(tf_qp, tf_eps, tf_L, t);
      json params;
      params["qp"] = tf_qp;
      params["eps"] = tf_eps;
      params["L"] = tf_L;
      params["s0"] = tf_s0;
      params["delta"] = tf_delta;
      params["r_scalar"] = tf_rscalar;
      json result;
      result["lambda"] = p.lambda;
      result["mu"] = p.mu();
      result["C_eps"] = p.c_eps();
      if (tf_value_at) result["phi_at_r"] = test_function(p, *tf_value_at);
      TestFnQuadOptions qo;
      qo.delta = tf_delta;
      result.update(to_json(testfn_mass_expansion(p, qo)));
      return emit("testfn", params, result, out_testfn);
    }
    if (cmd_lambda->parsed()) {
      auto model = build_model(ma_lambda);
      json params = model_params(ma_lambda);
      params["qt"] = lambda_qt;
      Field qt = make_qt(model, lambda_qt);
      std::vector<Point> points;
      if (lambda_points.empty()) {
        if (model->is_torus()) {
          const int n = model->axis_points();
          points = {Point::torus(0, 0, 0, 0), Point::torus(n / 4, 0, 0, 0),
                    Point::torus(n / 2, n / 2, 0, 0), Point::torus(1, 2, 3, 4)};
        } else {
          points = {Point::pole(), Point::sphere_node(model->theta_points() / 4),
                    Point::sphere_node(model->theta_points() / 2)};
        }
      } else {
        std::stringstream ss(lambda_points);
        std::string tok;
        while (std::getline(ss, tok, ';')) {
          if (tok == "pole") {
            points.push_back(Point::pole());
          } else if (model->is_torus()) {
            auto v = parse_doubles(tok, 4);
            points.push_back(Point::torus(int(v[0]), int(v[1]), int(v[2]), int(v[3])));
          } else {
            points.push_back(Point::sphere_node(std::stoi(tok)));
          }
        }
      }
      params["points"] = int(points.size());
      LambdaReport rep = lambda_map(model, qt, points);
      return emit("lambda", params, to_json(rep), out_lambda);
    }
    if (cmd_crit->parsed()) {
      json params;
      params["which"] = crit_which;
      params["qp"] = crit_qp;
      CriterionResult res;
      if (crit_which == "main2") {
        params["grad_s"] = crit_grad_s;
        params["lap_s"] = crit_lap_s;
        params["grad_q"] = crit_grad_q;
        params["lap_q"] = crit_lap_q;
        params["r_scalar"] = crit_r;
        res = criterion_main2(crit_qp, parse_vec4(crit_grad_s), crit_lap_s,
                              parse_vec4(crit_grad_q), crit_lap_q, crit_r, crit_dot);
      } else {
        std::array<std::array<double, 4>, 4> zsym{};
        params["a"] = crit_a;
        params["c"] = crit_c;
        params["b"] = crit_b;
        res = criterion_conformal(parse_vec4(crit_a),
                                  crit_asym.empty() ? zsym : parse_sym(crit_asym),
                                  parse_vec4(crit_c),
                                  crit_csym.empty() ? zsym : parse_sym(crit_csym),
                                  parse_vec4(crit_b),
                                  crit_bsym.empty() ? zsym : parse_sym(crit_bsym), crit_qp);
      }
      return emit("criterion", params, to_json(res), out_crit);
    }
    if (cmd_mom->parsed()) {
      std::vector<int> axes;
      for (double v : parse_doubles(mom_index)) axes.push_back(int(v));
      json params;
      params["index"] = axes;
      json result;
      result["value"] = s3_moment(std::span<const int>(axes.data(), axes.size()));
      return emit("moments", params, result, out_mom);
    }
    if (cmd_sweep->parsed()) {
      return run_sweep(sweep_config, out_sweep);
    }
    if (cmd_accept->parsed()) {
      if (accept_list) {
        for (const auto& c : qcurv::acceptance::criteria())
          std::printf("%02d %s\n", c.id, c.name);
        return 0;
      }
      return qcurv::acceptance::run_criteria(accept_id) == 0 ? 0 : 1;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
