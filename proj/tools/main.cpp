/*
 * Command line driver for the quasi-periodic NLS solver library.
 *
 *   solve          projected Newton sweep over a frequency grid
 *   reduce-only    regularization and block diagonalization at one frequency
 *   measure        excluded-parameter fractions across perturbation sizes
 *   stability      closed-form reduced flow: conservation and pullback bounds
 *   verify-golden  recompute coefficient dumps and compare byte for byte
 *
 * Every run is deterministic for a fixed configuration and seed, so the
 * coefficient dumps double as golden files: verify-golden repeats the
 * computation and demands bit-exact agreement.
 *
 * Exit codes: 0 on success, 1 when the computation itself reports a failure
 * (no surviving parameters, a violated certificate, a golden mismatch),
 * 2 on configuration or command line errors.
 */

#include "CLI11.hpp"
#include "cli_support.hpp"

#include "qpnls/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

using namespace qpnls;
using cli::g17;
using cli::json;

namespace {

/* Options shared by every subcommand; overrides only apply when the flag
 * was actually given, so the configuration file keeps its say otherwise. */
struct Common {
  std::string config_path;
  std::string out = "out";
  std::uint64_t seed = 0;
  double epsilon = 0.0, gamma_exp = 0.0, tol = 0.0, mass = 0.0;
  int grid_points = 0, max_iters = 0;
  std::string plugin;
  std::vector<double> omegas;

  CLI::Option* o_seed = nullptr;
  CLI::Option* o_eps = nullptr;
  CLI::Option* o_ge = nullptr;
  CLI::Option* o_tol = nullptr;
  CLI::Option* o_mass = nullptr;
  CLI::Option* o_gp = nullptr;
  CLI::Option* o_mi = nullptr;
  CLI::Option* o_plugin = nullptr;
  CLI::Option* o_omega = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON configuration file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", out, "output directory")
        ->capture_default_str();
    o_seed = cmd->add_option("--seed", seed, "sampling seed override");
    o_eps = cmd->add_option("--epsilon", epsilon,
                            "perturbation size override");
    o_ge = cmd->add_option("--gamma-exp", gamma_exp,
                           "exponent a in gamma = epsilon^a");
    o_gp = cmd->add_option("--grid-points", grid_points,
                           "frequency grid points per axis");
    o_mi = cmd->add_option("--max-iters", max_iters,
                           "Newton iteration cap");
    o_tol = cmd->add_option("--tol", tol, "Newton stopping tolerance");
    o_mass = cmd->add_option("--mass", mass, "mass parameter override");
    o_plugin = cmd->add_option("--plugin", plugin,
                               "nonlinearity plugin override");
    o_omega = cmd->add_option(
        "--omega", omegas,
        "explicit frequency point(s) on the first axis; replaces the grid");
  }

  SolverConfig build() const {
    SolverConfig cfg;
    if (!config_path.empty()) cfg = cli::load_config(config_path);
    if (o_seed->count()) cfg.reg.seed = seed;
    if (o_eps->count()) cfg.model.epsilon = epsilon;
    if (o_ge->count()) cfg.a = gamma_exp;
    if (o_gp->count()) cfg.grid_points = grid_points;
    if (o_mi->count()) cfg.max_iters = max_iters;
    if (o_tol->count()) cfg.tol = tol;
    if (o_mass->count()) cfg.model.m = mass;
    if (o_plugin->count()) cfg.model.plugin = plugin;
    if (o_omega->count()) {
      cfg.omegas.clear();
      for (double w : omegas) cfg.omegas.push_back({w, 0.0, 0.0});
    }
    return cfg;
  }
};

std::string out_path(const Common& c, const std::string& name) {
  std::filesystem::create_directories(c.out);
  return (std::filesystem::path(c.out) / name).string();
}

std::string function_text(const TorusFunction& u) {
  std::ostringstream os;
  write_function(os, u);
  return os.str();
}

std::string operator_text(const BlockOperator& A) {
  std::ostringstream os;
  write_operator(os, A);
  return os.str();
}

/* Frequency for the single-point subcommands: explicit list first, then
 * the midpoint of the configured grid. */
std::array<double, 3> pick_omega(const SolverConfig& cfg) {
  if (!cfg.omegas.empty()) return cfg.omegas[0];
  if (cfg.grid_points > 0) {
    const ParamGrid g = ParamGrid::make(cfg.model.d, cfg.grid_points,
                                        cfg.grid_lo, cfg.grid_hi);
    return g.omega(g.size() / 2);
  }
  throw UsageError("no frequency given: pass --omega, list omegas in the "
                   "config, or configure a grid");
}

/* Regularization followed by the quadratic reduction, the composition the
 * Newton driver performs at every iterate, exposed here for the inspection
 * subcommands. */
struct Reduction {
  std::array<double, 3> omega{};
  double abs_e = 0.0;
  RegularizationResult R;
  KamSchedule sch;
  KamResult red;
  ConjugationChains chains;
};

Reduction run_reduction(const SolverConfig& cfg,
                        const std::array<double, 3>& w) {
  const auto nl = make_nonlinearity(cfg.model.plugin);
  const TorusFunction u(cfg.model.d, cfg.state_N, 1, Reality::complex_valued);
  Reduction out;
  out.omega = w;
  out.abs_e = std::abs(forcing_average(*nl, cfg.model.d));
  out.R = regularize(cfg.model, *nl, w, u, cfg.reg);
  out.sch = cfg.kam;
  out.sch.gamma = cfg.gamma();
  out.sch.tau = cfg.tau;
  out.sch.eps = cfg.model.epsilon;
  out.sch.abs_e = out.abs_e;
  const NormalForm nf0 = initial_normal_form(cfg.model.d, cfg.reg.J, out.R.m2,
                                             out.R.m1, out.R.m0);
  out.red = reduce(out.R.L7, nf0, w, out.sch);
  out.chains = conjugation_chains(out.R, out.red.state.chain);
  return out;
}

void write_eigenvalues_csv(const std::string& path, const NormalForm& nf) {
  std::ostringstream os;
  os << "sigma,jbar,mu_plus_re,mu_plus_im,mu_minus_re,mu_minus_im,"
        "splitting\n";
  for (int sigma : {+1, -1})
    for (int jb = 0; jb <= nf.J; ++jb) {
      const BlockEigen be = eigenvalues_of_block(nf, sigma, jb);
      os << sigma << ',' << jb << ',' << g17(be.mu_plus.real()) << ','
         << g17(be.mu_plus.imag()) << ',' << g17(be.mu_minus.real()) << ','
         << g17(be.mu_minus.imag()) << ','
         << g17(std::max(jb, 1) * pair_splitting(nf, jb)) << '\n';
    }
  cli::write_text(path, os.str());
}

/* ---------------------------------------------------------------- solve */

int run_solve(const Common& c, int verify_points) {
  const SolverConfig cfg = c.build();
  validate(cfg);
  const SolveResult res = nash_moser_run(cfg);

  json doc = cli::solve_to_json(res);
  doc["command"] = "solve";
  doc["config"] = cli::config_to_json(cfg);

  std::vector<std::string> written;
  for (std::size_t k = 0; k < res.runs.size(); ++k) {
    const OmegaRun& run = res.runs[k];
    std::printf("omega %-10.6g %s", run.omega[0],
                run.converged ? "converged"
                : run.survived ? "no-convergence"
                               : "dropped");
    if (run.converged)
      std::printf("  final residual %.3e in %zu updates\n", run.final_residual,
                  run.iterates.size());
    else if (!run.survived)
      std::printf("  at iterate %d: %s\n", run.drop_iterate,
                  run.drop_reason.c_str());
    else
      std::printf("  final residual %.3e\n", run.final_residual);

    if (!run.converged) continue;
    char name[40];
    std::snprintf(name, sizeof(name), "solution_%03zu.txt", k);
    save_function(out_path(c, name), run.u);
    written.push_back(name);
    if (verify_points > 0) {
      const auto nl = make_nonlinearity(cfg.model.plugin);
      Rng rng(cfg.reg.seed + 1);
      const CollocationCheck cc = verify_solution(cfg.model, *nl, run.omega,
                                                  run.u, verify_points, rng);
      doc["runs"][k]["collocation"] = {{"points", cc.points},
                                       {"max_defect", cc.max_defect},
                                       {"scale", cc.scale}};
      std::printf("             collocation defect %.3e at scale %.3e "
                  "(%d points)\n",
                  cc.max_defect, cc.scale, cc.points);
    }
  }
  doc["solutions"] = written;

  cli::write_text(out_path(c, "run.json"), doc.dump(2) + "\n");
  cli::write_residuals_csv(out_path(c, "residuals.csv"), res);
  std::printf("sweep outcome: %s (%ld of %zu points survive)\n",
              res.outcome.c_str(), res.survivors, res.runs.size());
  std::printf("wrote %s and %s\n", out_path(c, "run.json").c_str(),
              out_path(c, "residuals.csv").c_str());
  return res.outcome == "converged" ? 0 : 1;
}

/* ---------------------------------------------------------- reduce-only */

void dump_reduction(const Common& c, const Reduction& r, bool artifacts,
                    std::vector<std::string>* written) {
  auto put_op = [&](const char* name, const BlockOperator& A) {
    save_operator(out_path(c, name), A);
    if (written) written->push_back(name);
  };
  auto put_fn = [&](const char* name, const TorusFunction& f) {
    save_function(out_path(c, name), f);
    if (written) written->push_back(name);
  };
  put_op("L7.txt", r.R.L7);
  put_op("remainder.txt", r.R.remainder);
  put_op("normal_form.txt", assemble_diagonal(r.red.state.nf, r.R.L7.L));
  put_fn("q0.txt", r.R.q0);
  if (artifacts) {
    put_fn("xi.txt", r.R.xi);
    put_fn("alpha_time.txt", r.R.alpha_time);
    put_fn("rho.txt", r.R.rho);
    put_fn("beta_shift.txt", r.R.beta_shift);
    put_fn("s_rescale.txt", r.R.s_rescale);
    put_fn("w_gen.txt", r.R.w_gen);
    put_fn("gamma_phase.txt", r.R.gamma_phase);
  }
}

int run_reduce(const Common& c, bool artifacts) {
  const SolverConfig cfg = c.build();
  validate(cfg);
  const std::array<double, 3> w = pick_omega(cfg);
  const Reduction r = run_reduction(cfg, w);

  json doc{{"command", "reduce-only"},
           {"omega", {w[0], w[1], w[2]}},
           {"gamma", cfg.gamma()},
           {"config", cli::config_to_json(cfg)},
           {"regularization", cli::regularization_to_json(r.R)},
           {"kam", cli::kam_to_json(r.red, r.sch)}};
  std::vector<std::string> written;
  dump_reduction(c, r, artifacts, &written);
  doc["dumps"] = written;
  cli::write_text(out_path(c, "run.json"), doc.dump(2) + "\n");
  cli::write_kam_history_csv(out_path(c, "kam_history.csv"),
                             r.red.state.history);
  write_eigenvalues_csv(out_path(c, "eigenvalues.csv"), r.red.state.nf);

  const auto& h = r.red.state.history;
  const char* im_sign = r.R.m1.imag() >= 0.0 ? "+" : "";
  std::printf("regularization: m2 = %s, m1 = %s %s%si, m0 = %s, "
              "nondegenerate = %s\n",
              g17(r.R.m2).c_str(), g17(r.R.m1.real()).c_str(), im_sign,
              g17(r.R.m1.imag()).c_str(), g17(r.R.m0).c_str(),
              r.R.m1_nondegenerate ? "yes" : "no");
  std::printf("reduction: %s after %zu iterates, remainder %.3e (%s)\n",
              r.red.converged ? "converged" : "stopped", h.size(),
              h.empty() ? 0.0 : h.back().R_s0, r.red.stop_reason.c_str());
  std::printf("wrote %s, kam_history.csv, eigenvalues.csv and %zu dumps\n",
              out_path(c, "run.json").c_str(), written.size());
  return (r.red.converged && r.R.m1_nondegenerate) ? 0 : 1;
}

/* -------------------------------------------------------------- measure */

int run_measure(const Common& c, std::vector<double> epsilons, int scan_N,
                bool no_cutoff, double cutoff_C) {
  SolverConfig cfg = c.build();
  if (cfg.grid_points <= 0) cfg.grid_points = 33;
  validate(cfg);
  if (epsilons.empty()) throw UsageError("measure: empty epsilon list");

  const ParamGrid grid = ParamGrid::make(cfg.model.d, cfg.grid_points,
                                         cfg.grid_lo, cfg.grid_hi);
  const std::array<double, 3> w_ref =
      cfg.omegas.empty() ? grid.omega(grid.size() / 2) : cfg.omegas[0];

  const auto nl = make_nonlinearity(cfg.model.plugin);
  const double abs_e = std::abs(forcing_average(*nl, cfg.model.d));
  const TorusFunction u(cfg.model.d, cfg.state_N, 1, Reality::complex_valued);

  std::vector<MeasureInput> runs;
  std::vector<CutoffAudit> audits;
  json constants = json::array();
  for (double eps : epsilons) {
    ModelParams mp = cfg.model;
    mp.epsilon = eps;
    const RegularizationResult R = regularize(mp, *nl, w_ref, u, cfg.reg);
    const NormalForm nf = initial_normal_form(cfg.model.d, cfg.reg.J, R.m2,
                                              R.m1, R.m0);
    MeasureInput mi;
    mi.eps = eps;
    mi.gamma = std::pow(eps, cfg.a);
    mi.families = {nf};
    mi.N = {scan_N};
    runs.push_back(mi);
    audits.push_back(audit_cutoff(nf, grid, mi.gamma, cfg.tau, scan_N, eps,
                                  abs_e, cutoff_C));
    constants.push_back({{"eps", eps},
                         {"gamma", mi.gamma},
                         {"m2", R.m2},
                         {"m1", {R.m1.real(), R.m1.imag()}},
                         {"m0", R.m0}});
  }

  MeasureReport rep;
  if (no_cutoff) {
    /* exhaustive mode: rebuild per-size good sets without the certificate */
    for (const MeasureInput& mi : runs) {
      GoodSetOptions opt;
      opt.gamma = mi.gamma;
      opt.tau = cfg.tau;
      opt.N = mi.N;
      opt.eps = mi.eps;
      opt.abs_e = abs_e;
      opt.cutoff_C = cutoff_C;
      opt.use_cutoff = false;
      const GoodSets gs = build_good_sets(mi.families, grid, opt);
      MeasureRow row;
      row.eps = mi.eps;
      row.gamma = mi.gamma;
      row.iterates = int(mi.families.size());
      long good = 0, badS = 0, badO = 0, badP = 0;
      for (std::size_t p = 0; p < gs.all.size(); ++p) {
        good += (gs.all[p] != 0);
        badS += (gs.G.back()[p] == 0);
        badO += (gs.H.back()[p] == 0);
        badP += (gs.P.back()[p] == 0);
      }
      const double total = double(grid.size());
      row.excluded_fraction = 1.0 - double(good) / total;
      row.fraction_S = double(badS) / total;
      row.fraction_O = double(badO) / total;
      row.fraction_P = double(badP) / total;
      row.cutoff_certified = gs.cutoff_certified;
      row.cutoff_tested = gs.cutoff_tested;
      rep.rows.push_back(row);
    }
  } else {
    rep = measure_report(runs, grid, cfg.tau, abs_e, cutoff_C);
  }

  /* trend verdict for the exhaustive path mirrors the report's own */
  if (no_cutoff && rep.rows.size() >= 2) {
    rep.trend_checked = true;
    rep.monotone = true;
    for (std::size_t k = 1; k < rep.rows.size(); ++k)
      if (!(rep.rows[k].excluded_fraction <
            rep.rows[k - 1].excluded_fraction))
        rep.monotone = false;
  }

  json doc = cli::measure_to_json(rep, audits);
  doc["command"] = "measure";
  doc["grid_points"] = long(grid.size());
  doc["reference_omega"] = {w_ref[0], w_ref[1], w_ref[2]};
  doc["constants"] = constants;
  doc["scan_N"] = scan_N;
  doc["use_cutoff"] = !no_cutoff;
  /* iterate count past which surviving resonances are covered (reporting) */
  if (cfg.kam.alpha() > cfg.tau + 3.0 && cfg.kam.N0 >= 2) {
    json nb = json::array();
    for (const MeasureInput& mi : runs) {
      const NbarResult r = nbar(mi.eps, mi.gamma, cfg.kam.N0, cfg.kam.alpha(),
                                cfg.tau);
      nb.push_back({{"eps", mi.eps}, {"value", r.value},
                    {"clamped", r.clamped}});
    }
    doc["nbar"] = nb;
  }
  cli::write_text(out_path(c, "run.json"), doc.dump(2) + "\n");
  cli::write_measure_csv(out_path(c, "measure.csv"), rep, audits);

  bool audits_sound = true;
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    const MeasureRow& r = rep.rows[k];
    std::printf("eps %-8.3g gamma %-9.4g excluded %8.5f  (S %.5f, O %.5f, "
                "P %.5f)  audit outside %ld of %ld failures\n",
                r.eps, r.gamma, r.excluded_fraction, r.fraction_S,
                r.fraction_O, r.fraction_P, audits[k].outside,
                audits[k].failures);
    audits_sound = audits_sound && (audits[k].outside == 0);
  }
  if (rep.trend_checked)
    std::printf("excluded fraction strictly decreasing: %s%s\n",
                rep.monotone ? "yes" : "NO",
                rep.note.empty() ? "" : (" (" + rep.note + ")").c_str());
  else
    std::printf("excluded fraction trend: not checked (single size)\n");
  std::printf("cutoff audit sound: %s\n", audits_sound ? "yes" : "NO");
  std::printf("wrote %s and measure.csv\n", out_path(c, "run.json").c_str());
  const bool trend_ok = !rep.trend_checked || rep.monotone;
  return (trend_ok && audits_sound) ? 0 : 1;
}

/* ------------------------------------------------------------ stability */

int run_stability(const Common& c, double T, int samples, double s, int h_box,
                  double tol_norm, double tol_pair) {
  const SolverConfig cfg = c.build();
  validate(cfg);
  const std::array<double, 3> w = pick_omega(cfg);
  const Reduction r = run_reduction(cfg, w);

  /* phi-independent random x-section datum lifted to a conjugate pair */
  Rng rng(c.o_seed->count() ? c.seed : cfg.reg.seed);
  TorusFunction h0x = random_function(rng, cfg.model.d, h_box, 2.5);
  TorusFunction cut(cfg.model.d, h_box, 1, Reality::complex_valued);
  for (int j = -h_box; j <= h_box; ++j)
    cut.at(0, {0, 0, 0}, j) = h0x.at(0, {0, 0, 0}, j);
  const TorusFunction h0 = make_conjugate_pair(cut);

  const StabilityReport rep =
      stability_check(r.red.state.nf, r.chains.W2, w, h0, T, s,
                      cfg.model.epsilon, samples, tol_norm, tol_pair);

  json doc = cli::stability_to_json(rep);
  doc["command"] = "stability";
  doc["omega"] = {w[0], w[1], w[2]};
  doc["datum"] = {{"h_box", h_box},
                  {"seed", c.o_seed->count() ? c.seed : cfg.reg.seed},
                  {"norm_index", s}};
  doc["config"] = cli::config_to_json(cfg);
  doc["kam"] = cli::kam_to_json(r.red, r.sch);
  cli::write_text(out_path(c, "run.json"), doc.dump(2) + "\n");
  cli::write_stability_csv(out_path(c, "stability.csv"), rep);

  std::printf("reduced flow over T = %.6g, %d samples\n", T, samples);
  std::printf("  norm drift %.3e (tol %.1e), pair drift %.3e (tol %.1e), "
              "mode drift %.3e\n",
              rep.norm_drift_rel, tol_norm, rep.pair_drift_rel, tol_pair,
              rep.mode_drift_rel);
  std::printf("  pullback oscillation %.3e, fitted K %.4g, spectrum reality "
              "%.3e\n",
              rep.oscillation, rep.fitted_K, rep.eigen_reality);
  std::printf("conserved: %s\n", rep.conserved ? "yes" : "NO");
  std::printf("wrote %s and stability.csv\n", out_path(c, "run.json").c_str());
  return rep.conserved ? 0 : 1;
}

/* -------------------------------------------------------- verify-golden */

int run_verify(const Common& c, const std::string& golden) {
  const SolverConfig cfg = c.build();
  validate(cfg);
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(golden))
    if (e.is_regular_file()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  if (names.empty())
    throw UsageError("verify-golden: no files in \"" + golden + "\"");

  const std::vector<std::string> reduce_set = {
      "L7.txt",       "remainder.txt", "normal_form.txt", "q0.txt",
      "xi.txt",       "alpha_time.txt", "rho.txt",        "beta_shift.txt",
      "s_rescale.txt", "w_gen.txt",    "gamma_phase.txt"};
  auto in_reduce_set = [&](const std::string& n) {
    for (const auto& r : reduce_set)
      if (n == r) return true;
    return false;
  };
  bool want_reduce = false, want_solve = false;
  for (const auto& n : names) {
    if (in_reduce_set(n)) want_reduce = true;
    if (n.rfind("solution_", 0) == 0) want_solve = true;
  }
  if (!want_reduce && !want_solve)
    throw UsageError("verify-golden: no recognized artifact names in \"" +
                     golden + "\"");

  /* recompute, serialize in memory, and compare byte for byte */
  std::vector<std::pair<std::string, std::string>> fresh;
  if (want_reduce) {
    const Reduction r = run_reduction(cfg, pick_omega(cfg));
    fresh.emplace_back("L7.txt", operator_text(r.R.L7));
    fresh.emplace_back("remainder.txt", operator_text(r.R.remainder));
    fresh.emplace_back("normal_form.txt",
                       operator_text(assemble_diagonal(r.red.state.nf,
                                                       r.R.L7.L)));
    fresh.emplace_back("q0.txt", function_text(r.R.q0));
    fresh.emplace_back("xi.txt", function_text(r.R.xi));
    fresh.emplace_back("alpha_time.txt", function_text(r.R.alpha_time));
    fresh.emplace_back("rho.txt", function_text(r.R.rho));
    fresh.emplace_back("beta_shift.txt", function_text(r.R.beta_shift));
    fresh.emplace_back("s_rescale.txt", function_text(r.R.s_rescale));
    fresh.emplace_back("w_gen.txt", function_text(r.R.w_gen));
    fresh.emplace_back("gamma_phase.txt", function_text(r.R.gamma_phase));
  }
  if (want_solve) {
    const SolveResult res = nash_moser_run(cfg);
    for (std::size_t k = 0; k < res.runs.size(); ++k) {
      if (!res.runs[k].converged) continue;
      char name[40];
      std::snprintf(name, sizeof(name), "solution_%03zu.txt", k);
      fresh.emplace_back(name, function_text(res.runs[k].u));
    }
  }

  int mismatches = 0, checked = 0;
  for (const auto& n : names) {
    if (!in_reduce_set(n) && n.rfind("solution_", 0) != 0) continue;
    const std::string want = cli::read_text(
        (std::filesystem::path(golden) / n).string());
    const std::string* got = nullptr;
    for (const auto& [fn, body] : fresh)
      if (fn == n) {
        got = &body;
        break;
      }
    ++checked;
    if (got && *got == want) {
      std::printf("ok        %s\n", n.c_str());
    } else {
      std::printf("MISMATCH  %s%s\n", n.c_str(),
                  got ? "" : "  (not produced by this configuration)");
      ++mismatches;
    }
  }
  std::printf("%d of %d golden files match\n", checked - mismatches, checked);
  return mismatches == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quasi-periodic NLS solver driver"};
  app.require_subcommand(1);

  Common c_solve, c_reduce, c_measure, c_stability, c_verify;

  CLI::App* solve = app.add_subcommand(
      "solve", "projected Newton sweep over a frequency grid");
  c_solve.attach(solve);
  int verify_points = 64;
  solve->add_option("--verify-points", verify_points,
                    "collocation points for the independent residual check "
                    "of each converged solution (0 disables)")
      ->capture_default_str();

  CLI::App* reduce_only = app.add_subcommand(
      "reduce-only",
      "regularization and block diagonalization at one frequency");
  c_reduce.attach(reduce_only);
  bool artifacts = false;
  reduce_only->add_flag("--dump-artifacts", artifacts,
                        "also dump the per-step transformation coefficients");

  CLI::App* measure = app.add_subcommand(
      "measure", "excluded-parameter fractions across perturbation sizes");
  c_measure.attach(measure);
  std::vector<double> epsilons{1e-2, 1e-3, 1e-4};
  int scan_N = 8;
  bool no_cutoff = false;
  double cutoff_C = -1.0;
  measure->add_option("--epsilons", epsilons,
                      "perturbation sizes of the sweep")
      ->capture_default_str();
  measure->add_option("--scan-N", scan_N, "time-offset scan radius")
      ->capture_default_str();
  measure->add_flag("--no-cutoff", no_cutoff,
                    "test every candidate pair instead of using the "
                    "certified cutoff");
  measure->add_option("--cutoff-C", cutoff_C,
                      "cutoff constant (negative selects the default)");

  CLI::App* stability = app.add_subcommand(
      "stability", "closed-form reduced flow at one frequency");
  c_stability.attach(stability);
  double T = 100.0 * kTwoPi, s_index = 2.5, tol_norm = 1e-8, tol_pair = 1e-10;
  int samples = 128, h_box = 6;
  stability->add_option("--T", T, "time horizon")->capture_default_str();
  stability->add_option("--samples", samples, "sample count")
      ->capture_default_str();
  stability->add_option("--s", s_index, "space Sobolev index of the norms")
      ->capture_default_str();
  stability->add_option("--h-box", h_box, "mode box of the random datum")
      ->capture_default_str();
  stability->add_option("--tol-norm", tol_norm,
                        "relative drift tolerance of the flow norm")
      ->capture_default_str();
  stability->add_option("--tol-pair", tol_pair,
                        "relative drift tolerance of the pair actions")
      ->capture_default_str();

  CLI::App* verify = app.add_subcommand(
      "verify-golden", "recompute dumps and compare byte for byte");
  c_verify.attach(verify);
  std::string golden;
  verify->add_option("--golden", golden, "directory of golden dumps")
      ->required()
      ->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(solve)) return run_solve(c_solve, verify_points);
    if (app.got_subcommand(reduce_only)) return run_reduce(c_reduce, artifacts);
    if (app.got_subcommand(measure))
      return run_measure(c_measure, epsilons, scan_N, no_cutoff, cutoff_C);
    if (app.got_subcommand(stability))
      return run_stability(c_stability, T, samples, s_index, h_box, tol_norm,
                           tol_pair);
    if (app.got_subcommand(verify)) return run_verify(c_verify, golden);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failed: %s\n", e.what());
    return 1;
  }
  return 2;
}
