#include "cli_support.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace qpnls::cli {

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace {

void require_keys(const json& j, const char* where,
                  std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw UsageError(std::string("config: unknown key \"") + item.key() +
                       "\" in " + where);
  }
}

template <typename T>
void pick(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::array<double, 3> omega_from_json(const json& v) {
  std::array<double, 3> w{0.0, 0.0, 0.0};
  if (v.is_number()) {
    w[0] = v.get<double>();
  } else if (v.is_array() && v.size() <= 3) {
    for (std::size_t a = 0; a < v.size(); ++a) w[a] = v[a].get<double>();
  } else {
    throw UsageError("config: \"omegas\" entries must be numbers or arrays "
                     "of up to 3 numbers");
  }
  return w;
}

}  // namespace

SolverConfig config_from_json(const json& j) {
  SolverConfig cfg;
  if (!j.is_object()) throw UsageError("config: top level must be an object");
  require_keys(j, "the top level",
               {"model", "gamma_exp", "tau", "tau0", "gamma0", "dioph_L",
                "omegas", "grid", "N0", "N_cap", "max_iters", "tol", "s0",
                "state_N", "regularization", "kam", "divisor_floor",
                "tame_cap", "warm_start"});

  if (j.contains("model")) {
    const json& m = j.at("model");
    require_keys(m, "\"model\"", {"d", "m", "epsilon", "plugin"});
    pick(m, "d", cfg.model.d);
    pick(m, "m", cfg.model.m);
    pick(m, "epsilon", cfg.model.epsilon);
    pick(m, "plugin", cfg.model.plugin);
  }

  pick(j, "gamma_exp", cfg.a);
  pick(j, "tau", cfg.tau);
  pick(j, "tau0", cfg.tau0);
  pick(j, "gamma0", cfg.gamma0);
  pick(j, "dioph_L", cfg.dioph_L);

  if (j.contains("omegas"))
    for (const json& v : j.at("omegas"))
      cfg.omegas.push_back(omega_from_json(v));

  if (j.contains("grid")) {
    const json& g = j.at("grid");
    require_keys(g, "\"grid\"", {"points", "lo", "hi"});
    pick(g, "points", cfg.grid_points);
    pick(g, "lo", cfg.grid_lo);
    pick(g, "hi", cfg.grid_hi);
  }

  pick(j, "N0", cfg.N0);
  pick(j, "N_cap", cfg.N_cap);
  pick(j, "max_iters", cfg.max_iters);
  pick(j, "tol", cfg.tol);
  pick(j, "s0", cfg.s0);
  pick(j, "state_N", cfg.state_N);

  if (j.contains("regularization")) {
    const json& r = j.at("regularization");
    require_keys(r, "\"regularization\"",
                 {"Nf", "J", "L", "divisor_floor", "min_det",
                  "residual_checks", "symplectic_samples", "seed"});
    pick(r, "Nf", cfg.reg.Nf);
    pick(r, "J", cfg.reg.J);
    pick(r, "L", cfg.reg.L);
    pick(r, "divisor_floor", cfg.reg.divisor_floor);
    pick(r, "min_det", cfg.reg.min_det);
    pick(r, "residual_checks", cfg.reg.residual_checks);
    pick(r, "symplectic_samples", cfg.reg.symplectic_samples);
    pick(r, "seed", cfg.reg.seed);
  }

  if (j.contains("kam")) {
    const json& k = j.at("kam");
    require_keys(k, "\"kam\"",
                 {"N0", "chi", "s0", "beta_exp", "alpha_exp", "max_iters",
                  "stop_tol", "series_cap", "series_rel_tol", "jsplit",
                  "smallness_gate", "project_structure"});
    pick(k, "N0", cfg.kam.N0);
    pick(k, "chi", cfg.kam.chi);
    pick(k, "s0", cfg.kam.s0);
    pick(k, "beta_exp", cfg.kam.beta_exp);
    pick(k, "alpha_exp", cfg.kam.alpha_exp);
    pick(k, "max_iters", cfg.kam.max_iters);
    pick(k, "stop_tol", cfg.kam.stop_tol);
    pick(k, "series_cap", cfg.kam.series_cap);
    pick(k, "series_rel_tol", cfg.kam.series_rel_tol);
    pick(k, "jsplit", cfg.kam.jsplit);
    pick(k, "smallness_gate", cfg.kam.smallness_gate);
    pick(k, "project_structure", cfg.kam.project_structure);
  }

  pick(j, "divisor_floor", cfg.divisor_floor);
  pick(j, "tame_cap", cfg.tame_cap);
  pick(j, "warm_start", cfg.warm_start);
  return cfg;
}

SolverConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("config: cannot open \"" + path + "\"");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw UsageError("config: \"" + path + "\": " + e.what());
  }
  return config_from_json(j);
}

json config_to_json(const SolverConfig& cfg) {
  json omegas = json::array();
  for (const auto& w : cfg.omegas) omegas.push_back({w[0], w[1], w[2]});
  return json{
      {"model",
       {{"d", cfg.model.d},
        {"m", cfg.model.m},
        {"epsilon", cfg.model.epsilon},
        {"plugin", cfg.model.plugin}}},
      {"gamma_exp", cfg.a},
      {"tau", cfg.tau},
      {"tau0", cfg.tau0},
      {"gamma0", cfg.gamma0},
      {"dioph_L", cfg.dioph_L},
      {"omegas", omegas},
      {"grid",
       {{"points", cfg.grid_points},
        {"lo", cfg.grid_lo},
        {"hi", cfg.grid_hi}}},
      {"N0", cfg.N0},
      {"N_cap", cfg.N_cap},
      {"max_iters", cfg.max_iters},
      {"tol", cfg.tol},
      {"s0", cfg.s0},
      {"state_N", cfg.state_N},
      {"regularization",
       {{"Nf", cfg.reg.Nf},
        {"J", cfg.reg.J},
        {"L", cfg.reg.L},
        {"divisor_floor", cfg.reg.divisor_floor},
        {"min_det", cfg.reg.min_det},
        {"residual_checks", cfg.reg.residual_checks},
        {"symplectic_samples", cfg.reg.symplectic_samples},
        {"seed", cfg.reg.seed}}},
      {"kam",
       {{"N0", cfg.kam.N0},
        {"chi", cfg.kam.chi},
        {"s0", cfg.kam.s0},
        {"beta_exp", cfg.kam.beta_exp},
        {"alpha_exp", cfg.kam.alpha_exp},
        {"max_iters", cfg.kam.max_iters},
        {"stop_tol", cfg.kam.stop_tol},
        {"series_cap", cfg.kam.series_cap},
        {"series_rel_tol", cfg.kam.series_rel_tol},
        {"jsplit", cfg.kam.jsplit},
        {"smallness_gate", cfg.kam.smallness_gate},
        {"project_structure", cfg.kam.project_structure}}},
      {"divisor_floor", cfg.divisor_floor},
      {"tame_cap", cfg.tame_cap},
      {"warm_start", cfg.warm_start}};
}

void write_residuals_csv(const std::string& path, const SolveResult& res) {
  std::ostringstream os;
  os << "omega_index,omega,n,N_next,residual_s0,increment_s0,tame_ratio,"
        "inversion_residual,min_floor_margin,kam_remainder,kam_iters,"
        "reality_drift\n";
  for (std::size_t k = 0; k < res.runs.size(); ++k)
    for (const NewtonRecord& r : res.runs[k].iterates)
      os << k << ',' << g17(res.runs[k].omega[0]) << ',' << r.n << ','
         << r.N_next << ',' << g17(r.residual_s0) << ','
         << g17(r.increment_s0) << ',' << g17(r.tame_ratio) << ','
         << g17(r.inversion_residual) << ',' << g17(r.min_floor_margin) << ','
         << g17(r.kam_remainder) << ',' << r.kam_iters << ','
         << g17(r.reality_drift) << '\n';
  write_text(path, os.str());
}

void write_kam_history_csv(const std::string& path,
                           const std::vector<KamIterate>& history) {
  std::ostringstream os;
  os << "nu,N,R_s0,R_sbeta,max_re_mu,psi_s0,homological_residual,"
        "hamiltonian_defect_R,realness_defect_R,sigma_consistency,"
        "eigenvalue_drift,drift_bound,diag_channel_norm,cross_channel_norm,"
        "quadratic_tripwire\n";
  for (const KamIterate& it : history)
    os << it.nu << ',' << it.N << ',' << g17(it.R_s0) << ','
       << g17(it.R_sbeta) << ',' << g17(it.max_re_mu) << ','
       << g17(it.psi_s0) << ',' << g17(it.homological_residual) << ','
       << g17(it.hamiltonian_defect_R) << ',' << g17(it.realness_defect_R)
       << ',' << g17(it.sigma_consistency) << ',' << g17(it.eigenvalue_drift)
       << ',' << g17(it.drift_bound) << ',' << g17(it.diag_channel_norm)
       << ',' << g17(it.cross_channel_norm) << ','
       << (it.quadratic_tripwire ? 1 : 0) << '\n';
  write_text(path, os.str());
}

void write_measure_csv(const std::string& path, const MeasureReport& rep,
                       const std::vector<CutoffAudit>& audits) {
  std::ostringstream os;
  os << "eps,gamma,iterates,excluded_fraction,fraction_S,fraction_O,"
        "fraction_P,cutoff_certified,cutoff_tested,audit_tested,"
        "audit_failures,audit_outside,audit_j_max\n";
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    const MeasureRow& r = rep.rows[k];
    os << g17(r.eps) << ',' << g17(r.gamma) << ',' << r.iterates << ','
       << g17(r.excluded_fraction) << ',' << g17(r.fraction_S) << ','
       << g17(r.fraction_O) << ',' << g17(r.fraction_P) << ','
       << r.cutoff_certified << ',' << r.cutoff_tested;
    if (k < audits.size())
      os << ',' << audits[k].tested << ',' << audits[k].failures << ','
         << audits[k].outside << ',' << audits[k].j_max;
    else
      os << ",,,,";
    os << '\n';
  }
  write_text(path, os.str());
}

void write_stability_csv(const std::string& path, const StabilityReport& rep) {
  std::ostringstream os;
  os << "sample,t,v_norm,h_norm\n";
  const int n = int(rep.v_norms.size());
  for (int k = 0; k < n; ++k) {
    const double t = (n > 1) ? rep.T * double(k) / double(n - 1) : 0.0;
    os << k << ',' << g17(t) << ',' << g17(rep.v_norms[std::size_t(k)]) << ','
       << g17(k < int(rep.h_norms.size()) ? rep.h_norms[std::size_t(k)] : 0.0)
       << '\n';
  }
  write_text(path, os.str());
}

json newton_record_to_json(const NewtonRecord& r) {
  return json{{"n", r.n},
              {"N_next", r.N_next},
              {"residual_s0", r.residual_s0},
              {"increment_s0", r.increment_s0},
              {"tame_ratio", r.tame_ratio},
              {"inversion_residual", r.inversion_residual},
              {"min_floor_margin", r.min_floor_margin},
              {"kam_remainder", r.kam_remainder},
              {"kam_iters", r.kam_iters},
              {"reality_drift", r.reality_drift}};
}

json run_to_json(const OmegaRun& run) {
  json iterates = json::array();
  for (const NewtonRecord& r : run.iterates)
    iterates.push_back(newton_record_to_json(r));
  return json{{"omega", {run.omega[0], run.omega[1], run.omega[2]}},
              {"survived", run.survived},
              {"converged", run.converged},
              {"drop_iterate", run.drop_iterate},
              {"drop_reason", run.drop_reason},
              {"final_residual", run.final_residual},
              {"iterates", iterates},
              {"increment_fit",
               {{"sufficient_data", run.increment_fit.sufficient_data},
                {"exponent", run.increment_fit.exponent},
                {"constant", run.increment_fit.constant}}}};
}

json solve_to_json(const SolveResult& res) {
  json runs = json::array();
  for (const OmegaRun& r : res.runs) runs.push_back(run_to_json(r));
  json masks = json::array();
  for (const auto& row : res.masks) {
    long alive = 0;
    for (char c : row) alive += (c != 0);
    masks.push_back(alive);
  }
  return json{{"gamma", res.gamma},
              {"survivors", res.survivors},
              {"outcome", res.outcome},
              {"alive_per_iterate", masks},
              {"runs", runs}};
}

json regularization_to_json(const RegularizationResult& R) {
  json steps = json::array();
  for (const StepDiagnostics& s : R.steps)
    steps.push_back({{"name", s.name},
                     {"conjugation_residual", s.conjugation_residual},
                     {"structure_defect", s.structure_defect},
                     {"tail", s.tail},
                     {"symplectic_violation", s.symplectic_violation}});
  return json{{"m2", R.m2},
              {"m1", {R.m1.real(), R.m1.imag()}},
              {"m0", R.m0},
              {"m1_floor", R.m1_floor},
              {"m1_nondegenerate", R.m1_nondegenerate},
              {"identity_residual", R.identity_residual},
              {"final_hamiltonian_defect", R.final_hamiltonian_defect},
              {"final_realness_defect", R.final_realness_defect},
              {"steps", steps}};
}

json kam_to_json(const KamResult& red, const KamSchedule& sch) {
  const std::vector<KamIterate>& h = red.state.history;
  const DecayReport dec = check_decay_schedule(h, sch, sch.tau + 1.0);
  return json{{"converged", red.converged},
              {"stop_reason", red.stop_reason},
              {"iterations", h.size()},
              {"final_remainder_s0", h.empty() ? 0.0 : h.back().R_s0},
              {"max_re_mu", h.empty() ? 0.0 : h.back().max_re_mu},
              {"decay_fit_constant", red.decay_fit_constant},
              {"structure_projection", red.structure_projection},
              {"decay_schedule",
               {{"sufficient_data", dec.sufficient_data},
                {"fitted_exponent", dec.fitted_exponent},
                {"threshold", dec.threshold},
                {"superlinear", dec.superlinear}}}};
}

json stability_to_json(const StabilityReport& rep) {
  return json{{"T", rep.T},
              {"samples", rep.samples},
              {"v_norm0", rep.v_norm0},
              {"norm_drift_rel", rep.norm_drift_rel},
              {"pair_drift_rel", rep.pair_drift_rel},
              {"mode_drift_rel", rep.mode_drift_rel},
              {"h_norm0", rep.h_norm0},
              {"h_min", rep.h_min},
              {"h_max", rep.h_max},
              {"oscillation", rep.oscillation},
              {"fitted_K", rep.fitted_K},
              {"eigen_reality", rep.eigen_reality},
              {"conserved", rep.conserved}};
}

json measure_to_json(const MeasureReport& rep,
                     const std::vector<CutoffAudit>& audits) {
  json rows = json::array();
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    const MeasureRow& r = rep.rows[k];
    json row{{"eps", r.eps},
             {"gamma", r.gamma},
             {"iterates", r.iterates},
             {"excluded_fraction", r.excluded_fraction},
             {"fraction_S", r.fraction_S},
             {"fraction_O", r.fraction_O},
             {"fraction_P", r.fraction_P},
             {"cutoff_certified", r.cutoff_certified},
             {"cutoff_tested", r.cutoff_tested}};
    if (k < audits.size())
      row["cutoff_audit"] = {{"tested", audits[k].tested},
                             {"failures", audits[k].failures},
                             {"outside", audits[k].outside},
                             {"j_max", audits[k].j_max}};
    rows.push_back(row);
  }
  return json{{"rows", rows},
              {"trend_checked", rep.trend_checked},
              {"monotone", rep.monotone},
              {"note", rep.note}};
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot open \"" + path + "\" for writing");
  os << body;
  if (!os) throw UsageError("failed while writing \"" + path + "\"");
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot open \"" + path + "\"");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace qpnls::cli
