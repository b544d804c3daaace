#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rdyn/analysis.hpp"
#include "rdyn/jsr.hpp"
#include "rdyn/structure.hpp"
#include "rdyn/system.hpp"

namespace rdyn {

struct JsrOptions {
    int depth = 16;
    double gap = 0.05;
    std::uint64_t budget = 1'000'000;
    MatrixNorm norm = MatrixNorm::InducedInf;
};

/// The recognised analysis names, in the order they execute:
/// fixed-point, linearize, jsr, commute, irreducibility, topology, simulate.
const std::vector<std::string>& analysis_names();

/// A fully resolved scenario: operators constructed, expressions parsed,
/// labels resolved, defaults filled in.  Produced by load_scenario /
/// parse_scenario or built directly in code.
struct ScenarioFile {
    explicit ScenarioFile(RegimeSystem sys) : system(std::move(sys)) {}

    RegimeSystem system;
    Eigen::VectorXd initial_state;        ///< zeros when the file omits it
    std::optional<SwitchingSignal> signal;
    std::size_t horizon = 0;
    std::vector<std::string> analyses;    ///< subset of analysis_names(), canonical order
    JsrOptions jsr;
    SamplingPlan sampler;
    double fixed_point_tol = 1e-10;       ///< CLI-adjustable, not a schema field
    double structure_tol = 1e-9;          ///< CLI-adjustable, not a schema field
    std::string output_directory = "rdyn_out";
    std::string source_path;              ///< where it was loaded from, if anywhere

    /// Re-seed anything stochastic (iid/markov signal, sampler).
    void override_seed(std::uint64_t seed);
};

/// Parse and validate scenario JSON.  The schema is strict: unknown fields
/// are rejected (with a nearest-name suggestion), every cross-reference
/// (regime labels in signals) must resolve, probability rows must sum to 1,
/// and expression operators are parsed eagerly so syntax errors surface
/// here, not at run time.  All errors carry the offending location.
///
/// @throws ScenarioError  unreadable file, malformed JSON, schema breach.
ScenarioFile load_scenario(const std::string& path);

/// Same, from an in-memory document.  @p name is used in error messages.
ScenarioFile parse_scenario(const std::string& text,
                            const std::string& name = "<memory>");

/// Everything one run produced.  Per-analysis blocks are optional: absent
/// when not requested, or recorded as an error string when requested but
/// failed.  Requesting `jsr` implies `linearize`, which implies
/// `fixed-point`; the echoed scenario lists the effective set.
struct AnalysisReport {
    explicit AnalysisReport(ScenarioFile sc) : scenario(std::move(sc)) {}

    ScenarioFile scenario;  ///< resolved configuration echo
    std::string version;

    std::optional<FixedPointResult> fixed_point;
    std::string fixed_point_error;

    std::optional<LocalLinearization> linearization;
    std::string linearization_error;

    std::optional<JsrBounds> jsr;
    std::optional<StabilityVerdict> stability;
    std::string jsr_error;

    std::optional<RepresentabilityVerdict> representability;
    std::string commute_error;

    std::optional<IrreducibilityReport> irreducibility;
    std::string irreducibility_error;

    std::optional<TopologyReport> topology;
    std::string topology_error;

    std::optional<Trajectory> trajectory;
    std::optional<EnvelopeFit> envelope;  ///< fitted when a fixed point exists
    std::string simulate_error;

    std::map<std::string, double> timings_ms;
    bool include_timings = true;  ///< whether serialization emits timings
};

/// Run the requested analyses in their fixed order, resolving implicit
/// dependencies (see AnalysisReport).  Failures are recorded per block, not
/// thrown — unless every requested analysis fails.
///
/// @throws NumericalError  every requested analysis failed.
AnalysisReport run_scenario(const ScenarioFile& scenario);

/// The exact bytes emit_report writes to report.json: stable field order,
/// numbers serialized so they round-trip to the same double.  Timings are
/// omitted when report.include_timings is false, making equal-seed runs
/// byte-identical.
std::string report_json(const AnalysisReport& report);

/// trajectory.csv: header `t,regime,x0,...`, one row per state; the regime
/// column holds the label that produced the row's state, blank at t=0.
std::string trajectory_csv(const Trajectory& trajectory, const RegimeSystem& system);

/// deviations.csv: header `t,deviation` with the max-norm distance from x*.
std::string deviations_csv(const Trajectory& trajectory, const Eigen::VectorXd& x_star);

/// Write report.json, trajectory.csv (when a trajectory was produced) and
/// deviations.csv (when additionally a fixed point converged) into
/// @p out_dir, creating it if needed.  Returns the written paths.
///
/// @throws ScenarioError  the directory or a file cannot be written.
std::vector<std::string> emit_report(const AnalysisReport& report,
                                     const std::string& out_dir);

/// One row of the built-in reference comparison.
struct ComparisonRow {
    std::string quantity;
    std::string computed;
    std::string reference;
    double error = 0.0;      ///< max absolute error (numeric rows)
    double tolerance = 0.0;  ///< 0 for exact string comparison
    bool pass = false;
};

struct PaperExampleResult {
    AnalysisReport report;
    std::vector<ComparisonRow> rows;
    bool all_passed = true;
};

/// Run the full pipeline on the built-in two-regime collateral example and
/// compare every derived quantity (fixed point, Jacobians, spectral radii,
/// ordered product, its characteristic coefficients and eigenvalues, the
/// JSR lower bound, both verdicts) against its published reference value.
PaperExampleResult paper_example();

std::string format_comparison_table(const std::vector<ComparisonRow>& rows);

} // namespace rdyn
