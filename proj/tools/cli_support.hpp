#pragma once

/*
 * Shared plumbing of the command line driver: the JSON configuration
 * loader with strict key checking, CSV emitters for the iteration logs,
 * and JSON encoders for run summaries. Floating point values in the CSV
 * files are printed with 17 significant digits so that reruns of a
 * deterministic pipeline produce byte-identical logs.
 */

#include "json.hpp"

#include "qpnls/kam.hpp"
#include "qpnls/melnikov.hpp"
#include "qpnls/regularization.hpp"
#include "qpnls/solver.hpp"

#include <string>
#include <vector>

namespace qpnls::cli {

using json = nlohmann::json;

/* 17-significant-digit rendering used by every CSV emitter. */
std::string g17(double x);

/* Configuration file support. Missing keys keep the built-in defaults;
 * unknown keys are usage errors so that typos fail loudly. "omegas" accepts
 * either scalars (placed on the first axis) or full 3-vectors. */
SolverConfig config_from_json(const json& j);
SolverConfig load_config(const std::string& path);
json config_to_json(const SolverConfig& cfg);

/* CSV emitters. */
void write_residuals_csv(const std::string& path, const SolveResult& res);
void write_kam_history_csv(const std::string& path,
                           const std::vector<KamIterate>& history);
void write_measure_csv(const std::string& path, const MeasureReport& rep,
                       const std::vector<CutoffAudit>& audits);
void write_stability_csv(const std::string& path, const StabilityReport& rep);

/* JSON summaries of result structs. */
json newton_record_to_json(const NewtonRecord& r);
json run_to_json(const OmegaRun& run);
json solve_to_json(const SolveResult& res);
json regularization_to_json(const RegularizationResult& R);
json kam_to_json(const KamResult& red, const KamSchedule& sch);
json stability_to_json(const StabilityReport& rep);
json measure_to_json(const MeasureReport& rep,
                     const std::vector<CutoffAudit>& audits);

/* Whole-file helpers; both throw UsageError on I/O problems. */
void write_text(const std::string& path, const std::string& body);
std::string read_text(const std::string& path);

}  // namespace qpnls::cli
