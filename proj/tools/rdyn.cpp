#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "rdyn/errors.hpp"
#include "rdyn/scenario.hpp"
#include "rdyn/version.hpp"

namespace {

// Exit codes: 0 success, 1 comparison/verdict failure, 2 usage error,
// 3 invalid scenario, 4 numerical failure.
constexpr int kExitOk = 0;
constexpr int kExitComparisonFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitScenarioInvalid = 3;
constexpr int kExitNumerical = 4;

struct Options {
    std::string scenario;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> depth;
    std::optional<double> gap;
    std::optional<double> tol;
    bool no_timings = false;
};

void add_common_flags(CLI::App* cmd, Options& opt, bool scenario_required) {
    auto* s = cmd->add_option("--scenario", opt.scenario, "scenario JSON file");
    if (scenario_required) s->required();
    cmd->add_option("--out", opt.out, "output directory (overrides the scenario's)");
    cmd->add_option("--seed", opt.seed, "override every stochastic seed in the scenario");
    cmd->add_option("--depth", opt.depth, "override the jsr search depth");
    cmd->add_option("--gap", opt.gap, "override the jsr target gap");
    cmd->add_option("--tol", opt.tol, "override fixed-point and structural tolerances");
    cmd->add_flag("--no-timings", opt.no_timings, "omit wall-clock timings from report.json");
}

void apply_overrides(rdyn::ScenarioFile& scenario, const Options& opt) {
    if (opt.seed) scenario.override_seed(*opt.seed);
    if (opt.depth) scenario.jsr.depth = *opt.depth;
    if (opt.gap) scenario.jsr.gap = *opt.gap;
    if (opt.tol) {
        scenario.fixed_point_tol = *opt.tol;
        scenario.structure_tol = *opt.tol;
    }
    if (!opt.out.empty()) scenario.output_directory = opt.out;
}

int run_and_emit(rdyn::ScenarioFile scenario, const Options& opt,
                 const std::vector<std::string>& analyses) {
    if (!analyses.empty()) scenario.analyses = analyses;
    apply_overrides(scenario, opt);

    rdyn::AnalysisReport report = rdyn::run_scenario(scenario);
    report.include_timings = !opt.no_timings;
    for (const std::string& path : rdyn::emit_report(report, scenario.output_directory)) {
        std::printf("wrote %s\n", path.c_str());
    }

    if (report.fixed_point && report.fixed_point->converged) {
        std::printf("fixed point: [");
        for (int i = 0; i < report.fixed_point->point.size(); ++i) {
            std::printf("%s%.10g", i ? ", " : "", report.fixed_point->point[i]);
        }
        std::printf("] (residual %.3g)\n", report.fixed_point->residual);
    } else if (!report.fixed_point_error.empty()) {
        std::printf("fixed point: failed (%s)\n", report.fixed_point_error.c_str());
    }
    if (report.jsr) {
        std::printf("jsr bounds: [%.10g, %.10g] at depth %d (%s)\n", report.jsr->lower,
                    report.jsr->upper, report.jsr->depth,
                    rdyn::to_string(report.jsr->norm).c_str());
    }
    if (report.stability) {
        std::printf("stability: %s (margin %.3g)\n",
                    rdyn::to_string(report.stability->status).c_str(),
                    report.stability->margin);
    }
    if (report.representability) {
        std::printf("invariant-law representation: %s\n",
                    rdyn::to_string(report.representability->status).c_str());
    }
    if (report.trajectory) {
        std::printf("simulated %zu steps\n", report.trajectory->horizon());
    }

    // Requested-but-failed blocks were already recorded in report.json.
    const char* blocks[][2] = {{"linearize", report.linearization_error.c_str()},
                               {"jsr", report.jsr_error.c_str()},
                               {"commute", report.commute_error.c_str()},
                               {"irreducibility", report.irreducibility_error.c_str()},
                               {"topology", report.topology_error.c_str()},
                               {"simulate", report.simulate_error.c_str()}};
    for (const auto& b : blocks) {
        if (b[1][0] != '\0') std::fprintf(stderr, "%s: failed (%s)\n", b[0], b[1]);
    }
    return kExitOk;
}

int run_paper_example(const Options& opt) {
    rdyn::PaperExampleResult result = rdyn::paper_example();
    std::fputs(rdyn::format_comparison_table(result.rows).c_str(), stdout);
    if (!opt.out.empty()) {
        result.report.include_timings = !opt.no_timings;
        for (const std::string& path : rdyn::emit_report(result.report, opt.out)) {
            std::printf("wrote %s\n", path.c_str());
        }
    }
    if (!result.all_passed) {
        for (const rdyn::ComparisonRow& row : result.rows) {
            if (!row.pass) {
                std::fprintf(stderr, "comparison failed: %s (computed %s, reference %s)\n",
                             row.quantity.c_str(), row.computed.c_str(),
                             row.reference.c_str());
            }
        }
        return kExitComparisonFailed;
    }
    std::printf("all %zu comparisons passed\n", result.rows.size());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rdyn " RDYN_VERSION
                 " - analysis of regime-dependent discrete-time dynamical systems"};
    app.require_subcommand(1);

    Options opt;
    auto* cmd_simulate =
        app.add_subcommand("simulate", "run the switching simulation and write CSVs");
    auto* cmd_analyze =
        app.add_subcommand("analyze", "run the scenario's configured analyses");
    auto* cmd_jsr = app.add_subcommand("jsr", "bracket the joint spectral radius");
    auto* cmd_structure =
        app.add_subcommand("structure", "commutation, irreducibility and topology checks");
    auto* cmd_paper = app.add_subcommand(
        "paper-example", "reproduce the built-in collateral example and check it");
    auto* cmd_validate =
        app.add_subcommand("validate", "check a scenario file against the schema");
    add_common_flags(cmd_simulate, opt, true);
    add_common_flags(cmd_analyze, opt, true);
    add_common_flags(cmd_jsr, opt, true);
    add_common_flags(cmd_structure, opt, true);
    add_common_flags(cmd_paper, opt, false);
    add_common_flags(cmd_validate, opt, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (cmd_paper->parsed()) return run_paper_example(opt);

        if (cmd_validate->parsed()) {
            const rdyn::ScenarioFile scenario = rdyn::load_scenario(opt.scenario);
            std::printf("%s: ok (%zu regimes, dimension %d)\n", opt.scenario.c_str(),
                        scenario.system.regime_count(), scenario.system.dimension());
            return kExitOk;
        }

        rdyn::ScenarioFile scenario = rdyn::load_scenario(opt.scenario);
        if (cmd_simulate->parsed()) {
            return run_and_emit(std::move(scenario), opt, {"simulate"});
        }
        if (cmd_jsr->parsed()) {
            return run_and_emit(std::move(scenario), opt, {"jsr"});
        }
        if (cmd_structure->parsed()) {
            return run_and_emit(std::move(scenario), opt,
                                {"commute", "irreducibility", "topology"});
        }
        return run_and_emit(std::move(scenario), opt, {});  // analyze
    } catch (const rdyn::ScenarioError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitScenarioInvalid;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
}
