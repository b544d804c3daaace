#include <doctest.h>

#include <Eigen/Core>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rdyn/errors.hpp"
#include "rdyn/jsr.hpp"
#include "rdyn/operators.hpp"
#include "rdyn/scenario.hpp"
#include "rdyn/structure.hpp"
#include "rdyn/system.hpp"

using namespace rdyn;

namespace {

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

/// Returns the ScenarioError message, or "" when the text parses cleanly.
std::string parse_failure(const std::string& text) {
    try {
        parse_scenario(text, "doc");
    } catch (const ScenarioError& e) {
        return e.what();
    }
    return "";
}

// The canonical two-regime family, as a reusable JSON fragment.
const char* const kCollateralRegimes =
    R"("regimes": [
         {"label": "N", "operator": {"type": "collateral", "side": "N",
          "alpha": 0.8, "beta": 0.8, "mu": 1.6, "nu": 1.6, "q_bar": 0.2, "b_bar": 0.2}},
         {"label": "C", "operator": {"type": "collateral", "side": "C",
          "alpha": 0.8, "beta": 0.8, "mu": 1.6, "nu": 1.6, "q_bar": 0.2, "b_bar": 0.2}}])";

std::string collateral_doc(const std::string& extra_fields) {
    return std::string("{\"dimension\": 2, ") + kCollateralRegimes + extra_fields + "}";
}

Eigen::Matrix2d matrix_n() {
    Eigen::Matrix2d m;
    m << 0.8, 0.4, 0.0, 0.8;
    return m;
}

Eigen::Matrix2d matrix_c() {
    Eigen::Matrix2d m;
    m << 0.8, 0.0, 0.4, 0.8;
    return m;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("a minimal scenario fills in every default") {
    const ScenarioFile sc = parse_scenario(R"({
        "dimension": 1,
        "regimes": [{"label": "halve", "operator": {"type": "affine", "matrix": [[0.5]]}}],
        "analyses": ["fixed-point"]
    })");

    CHECK(sc.system.regime_count() == 1);
    CHECK(sc.system.dimension() == 1);
    CHECK(sc.system.label(RegimeId{0}) == "halve");

    // omitted offset becomes the zero vector
    const AffineOp& op = sc.system.op(RegimeId{0}).get<AffineOp>();
    CHECK(op.offset.size() == 1);
    CHECK(op.offset[0] == 0.0);

    CHECK(sc.initial_state.size() == 1);
    CHECK(sc.initial_state[0] == 0.0);
    CHECK(!sc.signal);
    CHECK(sc.horizon == 0);
    CHECK(sc.analyses == std::vector<std::string>{"fixed-point"});

    CHECK(sc.jsr.depth == 16);
    CHECK(sc.jsr.gap == 0.05);
    CHECK(sc.jsr.budget == 1'000'000);
    CHECK(sc.jsr.norm == MatrixNorm::InducedInf);

    CHECK(sc.sampler.box_lo.size() == 0);
    CHECK(sc.sampler.grid_points == 11);
    CHECK(sc.sampler.random_points == 1000);
    CHECK(sc.sampler.seed == 1);

    CHECK(sc.fixed_point_tol == 1e-10);
    CHECK(sc.structure_tol == 1e-9);
    CHECK(sc.output_directory == "rdyn_out");
    CHECK(sc.source_path == "<memory>");
}

TEST_CASE("omitting the analyses list selects everything") {
    // ... which includes 'simulate', so a signal becomes mandatory.
    const ScenarioFile sc = parse_scenario(collateral_doc(
        R"(, "signal": {"type": "periodic", "word": ["N", "C"]}, "horizon": 4)"));
    CHECK(sc.analyses == analysis_names());

    const std::string msg = parse_failure(collateral_doc(""));
    INFO(msg);
    CHECK(contains(msg, "analyses include 'simulate' but no 'signal' is declared"));
}

TEST_CASE("unknown fields are rejected with a nearest-name suggestion") {
    SUBCASE("top level") {
        const std::string msg = parse_failure(
            collateral_doc(R"(, "analyses": ["topology"], "horizont": 5)"));
        INFO(msg);
        CHECK(contains(msg, "unknown field 'horizont'"));
        CHECK(contains(msg, "did you mean 'horizon'?"));
    }
    SUBCASE("inside the jsr options") {
        const std::string msg = parse_failure(
            collateral_doc(R"(, "analyses": ["jsr"], "jsr": {"dep": 3})"));
        INFO(msg);
        CHECK(contains(msg, "jsr: unknown field 'dep'"));
        CHECK(contains(msg, "did you mean 'depth'?"));
    }
    SUBCASE("analysis names") {
        const std::string msg =
            parse_failure(collateral_doc(R"(, "analyses": ["comute"])"));
        INFO(msg);
        CHECK(contains(msg, "analyses[0]: unknown analysis 'comute'"));
        CHECK(contains(msg, "did you mean 'commute'?"));
    }
    SUBCASE("operator type") {
        const std::string msg = parse_failure(R"({
            "dimension": 1, "analyses": ["topology"],
            "regimes": [{"label": "a", "operator": {"type": "afine", "matrix": [[1.0]]}}]
        })");
        INFO(msg);
        CHECK(contains(msg, "regimes[0].operator.type: unknown operator type 'afine'"));
        CHECK(contains(msg, "did you mean 'affine'?"));
    }
}

TEST_CASE("schema violations report their exact location") {
    SUBCASE("a markov row that does not sum to one") {
        const std::string msg = parse_failure(collateral_doc(R"(, "analyses": ["topology"],
            "signal": {"type": "markov", "transition": [[0.5, 0.4], [0.2, 0.8]],
                       "initial": "N"})"));
        INFO(msg);
        CHECK(contains(msg, "signal.transition[0]"));
        CHECK(contains(msg, "sums to 0.9, expected 1"));
    }
    SUBCASE("a word referencing an undeclared regime") {
        const std::string msg = parse_failure(collateral_doc(R"(, "analyses": ["topology"],
            "signal": {"type": "periodic", "word": ["N", "X"]})"));
        INFO(msg);
        CHECK(contains(msg, "signal.word[1]"));
        CHECK(contains(msg, "unknown regime label 'X'"));
    }
    SUBCASE("an initial state of the wrong length") {
        const std::string msg = parse_failure(
            collateral_doc(R"(, "analyses": ["topology"], "initial_state": [1, 1, 1])"));
        INFO(msg);
        CHECK(contains(msg, "initial_state"));
        CHECK(contains(msg, "expected 2 entries, got 3"));
    }
    SUBCASE("a collateral operator outside dimension two") {
        const std::string msg = parse_failure(R"({
            "dimension": 3, "analyses": ["topology"],
            "regimes": [{"label": "N", "operator": {"type": "collateral", "side": "N",
                "alpha": 0.8, "beta": 0.8, "mu": 1.6, "nu": 1.6, "q_bar": 0.2, "b_bar": 0.2}}]
        })");
        INFO(msg);
        CHECK(contains(msg, "regimes[0].operator"));
        CHECK(contains(msg, "two-dimensional"));
    }
    SUBCASE("duplicate regime labels") {
        const std::string msg = parse_failure(R"({
            "dimension": 1, "analyses": ["topology"],
            "regimes": [{"label": "N", "operator": {"type": "affine", "matrix": [[1.0]]}},
                        {"label": "N", "operator": {"type": "affine", "matrix": [[2.0]]}}]
        })");
        INFO(msg);
        CHECK(contains(msg, "regimes"));
        CHECK(contains(msg, "duplicate regime label 'N'"));
    }
    SUBCASE("a sampler with nothing to sample") {
        const std::string msg = parse_failure(collateral_doc(R"(, "analyses": ["commute"],
            "sampler": {"grid_points": 0, "random_points": 0})"));
        INFO(msg);
        CHECK(contains(msg, "sampler"));
        CHECK(contains(msg, "grid_points and random_points cannot both be 0"));
    }
    SUBCASE("expression syntax errors surface at parse time") {
        const std::string msg = parse_failure(R"({
            "dimension": 1, "analyses": ["topology"],
            "regimes": [{"label": "a",
                         "operator": {"type": "expression", "components": ["x0 @ 1"]}}]
        })");
        INFO(msg);
        CHECK(contains(msg, "regimes[0].operator.components[0]"));
        CHECK(contains(msg, "unexpected character '@' at offset 3"));
    }
    SUBCASE("operator invariants are enforced during parsing") {
        const std::string msg = parse_failure(R"({
            "dimension": 2, "analyses": ["topology"],
            "regimes": [{"label": "N", "operator": {"type": "collateral", "side": "N",
                "alpha": 1.8, "beta": 0.8, "mu": 1.6, "nu": 1.6, "q_bar": 0.2, "b_bar": 0.2}}]
        })");
        INFO(msg);
        CHECK(contains(msg, "regimes[0].operator"));
        CHECK(contains(msg, "alpha"));
    }
    SUBCASE("malformed JSON carries the document name") {
        const std::string msg = parse_failure("{\"dimension\": ");
        INFO(msg);
        CHECK(contains(msg, "doc"));
    }
    SUBCASE("simulate requested without a signal") {
        const std::string msg =
            parse_failure(collateral_doc(R"(, "analyses": ["simulate"], "horizon": 3)"));
        INFO(msg);
        CHECK(contains(msg, "analyses include 'simulate' but no 'signal' is declared"));
    }
}

TEST_CASE("scenario files load from disk with readable failure modes") {
    CHECK_THROWS_WITH_AS(load_scenario("/nonexistent/nowhere.json"),
                         "cannot read scenario file '/nonexistent/nowhere.json'",
                         ScenarioError);

    const ScenarioFile collateral = load_scenario(RDYN_SCENARIO_DIR "/collateral.json");
    CHECK(collateral.system.regime_count() == 2);
    CHECK(collateral.system.dimension() == 2);
    CHECK(collateral.system.label(RegimeId{0}) == "N");
    CHECK(collateral.system.label(RegimeId{1}) == "C");
    CHECK(collateral.horizon == 12);
    REQUIRE(collateral.signal);
    CHECK(collateral.signal->holds<SwitchingSignal::Periodic>());
    CHECK(collateral.analyses == analysis_names());

    const ScenarioFile markov = load_scenario(RDYN_SCENARIO_DIR "/markov.json");
    REQUIRE(markov.signal);
    REQUIRE(markov.signal->holds<SwitchingSignal::Markov>());
    CHECK(markov.signal->get<SwitchingSignal::Markov>().seed == 42);
    CHECK(markov.sampler.seed == 7);
    CHECK(markov.jsr.depth == 12);

    const ScenarioFile single = load_scenario(RDYN_SCENARIO_DIR "/single-regime.json");
    CHECK(single.system.regime_count() == 1);
    CHECK(single.horizon == 4);
}

TEST_CASE("requesting jsr pulls in its prerequisites") {
    const ScenarioFile sc = parse_scenario(collateral_doc(R"(, "analyses": ["jsr"])"));
    CHECK(sc.analyses == std::vector<std::string>{"jsr"});

    const AnalysisReport rep = run_scenario(sc);
    CHECK(rep.scenario.analyses ==
          std::vector<std::string>{"fixed-point", "linearize", "jsr"});
    REQUIRE(rep.fixed_point);
    REQUIRE(rep.linearization);
    REQUIRE(rep.jsr);
    CHECK(rep.stability);
    CHECK(!rep.trajectory);
    CHECK(!rep.representability);
    CHECK(!rep.irreducibility);
    CHECK(!rep.topology);

    // the emitted report echoes the effective set and contains only its blocks
    AnalysisReport emitted = rep;
    emitted.include_timings = false;
    const nlohmann::json j = nlohmann::json::parse(report_json(emitted));
    CHECK(j.at("tool").at("name") == "rdyn");
    CHECK(j.at("scenario").at("analyses") ==
          nlohmann::json::array({"fixed-point", "linearize", "jsr"}));
    CHECK(!j.at("scenario").contains("signal"));
    CHECK(j.at("scenario").at("sampler").at("box").at("lo")[0] == -2.0);
    CHECK(j.at("scenario").at("sampler").at("box").at("hi")[1] == 4.0);
    CHECK(j.at("results").size() == 3);
    CHECK(j.at("results").contains("fixed-point"));
    CHECK(j.at("results").contains("linearize"));
    CHECK(j.at("results").contains("jsr"));
    CHECK(!j.contains("timings_ms"));
}

TEST_CASE("the collateral scenario reproduces the reference pipeline end to end") {
    const ScenarioFile sc = load_scenario(RDYN_SCENARIO_DIR "/collateral.json");
    const AnalysisReport rep = run_scenario(sc);

    REQUIRE(rep.fixed_point);
    CHECK(rep.fixed_point->converged);
    CHECK((rep.fixed_point->point - Eigen::Vector2d(1.0, 1.0)).lpNorm<Eigen::Infinity>() <=
          1e-9);
    CHECK(rep.fixed_point->residual <= 1e-10);

    REQUIRE(rep.linearization);
    CHECK((rep.linearization->matrices[0] - matrix_n()).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((rep.linearization->matrices[1] - matrix_c()).cwiseAbs().maxCoeff() <= 1e-9);

    REQUIRE(rep.jsr);
    CHECK(rep.jsr->lower == doctest::Approx(1.0246211251235321).epsilon(1e-9));
    CHECK(rep.jsr->upper - rep.jsr->lower <= 0.05);
    REQUIRE(rep.stability);
    CHECK(rep.stability->status == StabilityStatus::UnstableCertified);

    REQUIRE(rep.representability);
    CHECK(rep.representability->status == Representability::RuledOut);
    REQUIRE(rep.irreducibility);
    CHECK(rep.irreducibility->distinct_pairs.size() == 1);
    CHECK(!rep.irreducibility->reducible_candidate);
    REQUIRE(rep.topology);
    CHECK(rep.topology->component_count == 2);
    CHECK(!rep.topology->conjugate_to_invariant_law);

    REQUIRE(rep.trajectory);
    CHECK(rep.trajectory->horizon() == 12);
    CHECK(rep.trajectory->states.size() == 13);
    // seeded on the ordered product's dominant eigenvector, the deviations
    // grow at sqrt(rho(A_C*A_N)) per step and the fitted envelope sees it
    REQUIRE(rep.envelope);
    CHECK(rep.envelope->rate == doctest::Approx(1.0246211251235321).epsilon(0.005));
    CHECK(rep.envelope->amplitude > 0.0);

    CHECK(rep.timings_ms.size() == 7);
}

TEST_CASE("a one-regime scenario collapses to classical analysis") {
    const ScenarioFile sc = load_scenario(RDYN_SCENARIO_DIR "/single-regime.json");
    const AnalysisReport rep = run_scenario(sc);

    // requested {fixed-point, jsr, commute, topology, simulate}; jsr adds linearize
    CHECK(rep.scenario.analyses ==
          std::vector<std::string>{"fixed-point", "linearize", "jsr", "commute",
                                   "topology", "simulate"});

    REQUIRE(rep.fixed_point);
    CHECK((rep.fixed_point->point - Eigen::Vector2d(2.0, 0.0)).lpNorm<Eigen::Infinity>() <=
          1e-12);

    // a singleton family needs no branch and bound: the bracket is rho(A)
    REQUIRE(rep.jsr);
    CHECK(rep.jsr->lower == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.jsr->upper == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.jsr->depth == 1);
    REQUIRE(rep.stability);
    CHECK(rep.stability->status == StabilityStatus::StableCertified);

    REQUIRE(rep.representability);
    CHECK(rep.representability->status == Representability::NotRuledOut);
    REQUIRE(rep.topology);
    CHECK(rep.topology->component_count == 1);
    CHECK(rep.topology->conjugate_to_invariant_law);

    // x_{t+1} = 0.5*x_t + (1, 0) from the origin: exactly representable doubles
    REQUIRE(rep.trajectory);
    REQUIRE(rep.trajectory->states.size() == 5);
    CHECK(rep.trajectory->states[4] == Eigen::Vector2d(1.875, 0.0));

    // deviations halve every step, so the fitted envelope is exact
    REQUIRE(rep.envelope);
    CHECK(rep.envelope->rate == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(rep.envelope->amplitude == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("csv emission is byte-exact") {
    const RegimeSystem system{{{"A", AffineOp{0.5 * Eigen::Matrix2d::Identity(),
                                              Eigen::Vector2d::Zero()}}}};
    Trajectory tr;
    tr.states = {Eigen::Vector2d(1.0, 1.0), Eigen::Vector2d(0.5, 0.25)};
    tr.regimes = {RegimeId{0}};

    CHECK(trajectory_csv(tr, system) == "t,regime,x0,x1\n0,,1,1\n1,A,0.5,0.25\n");
    CHECK(deviations_csv(tr, Eigen::Vector2d::Zero()) == "t,deviation\n0,1\n1,0.5\n");

    Trajectory rest;
    rest.states = {Eigen::Vector2d(1.0, 1.0)};
    CHECK(trajectory_csv(rest, system) == "t,regime,x0,x1\n0,,1,1\n");
}

TEST_CASE("equal seeds give byte-identical reports") {
    const ScenarioFile sc = load_scenario(RDYN_SCENARIO_DIR "/markov.json");

    AnalysisReport first = run_scenario(sc);
    AnalysisReport second = run_scenario(sc);
    first.include_timings = false;
    second.include_timings = false;
    CHECK(report_json(first) == report_json(second));

    REQUIRE(first.trajectory);
    CHECK(first.trajectory->regimes.size() == 50);

    // timings are present by default but suppressed for comparisons
    AnalysisReport timed = run_scenario(sc);
    const nlohmann::json j = nlohmann::json::parse(report_json(timed));
    REQUIRE(j.contains("timings_ms"));
    CHECK(j.at("timings_ms").size() == 7);
}

TEST_CASE("overriding the seed reshuffles every stochastic choice") {
    ScenarioFile base = load_scenario(RDYN_SCENARIO_DIR "/markov.json");
    ScenarioFile reseeded = load_scenario(RDYN_SCENARIO_DIR "/markov.json");
    base.analyses = {"simulate"};
    reseeded.analyses = {"simulate"};
    reseeded.override_seed(9);

    CHECK(reseeded.sampler.seed == 9);
    REQUIRE(reseeded.signal);
    CHECK(reseeded.signal->get<SwitchingSignal::Markov>().seed == 9);
    // the transition matrix and start regime survive the reseeding
    CHECK(reseeded.signal->get<SwitchingSignal::Markov>().initial == RegimeId{0});

    const AnalysisReport a = run_scenario(base);
    const AnalysisReport b = run_scenario(reseeded);
    REQUIRE(a.trajectory);
    REQUIRE(b.trajectory);
    CHECK(a.trajectory->regimes != b.trajectory->regimes);
}

TEST_CASE("the built-in example checks itself") {
    const PaperExampleResult result = paper_example();
    CHECK(result.rows.size() == 15);
    for (const ComparisonRow& row : result.rows) {
        INFO(row.quantity, ": computed ", row.computed, ", reference ", row.reference);
        CHECK(row.pass);
    }
    CHECK(result.all_passed);

    const std::string table = format_comparison_table(result.rows);
    INFO(table);
    CHECK(contains(table, "quantity"));
    CHECK(contains(table, "unstable-certified"));
    CHECK(contains(table, "ruled-out"));
    CHECK(contains(table, "ok"));
    CHECK(!contains(table, "FAIL"));
}

TEST_CASE("emit_report writes the full bundle and round-trips") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "rdyn-test-emit";
    fs::remove_all(dir);

    const ScenarioFile sc = load_scenario(RDYN_SCENARIO_DIR "/collateral.json");
    AnalysisReport rep = run_scenario(sc);
    rep.include_timings = false;

    const std::vector<std::string> written = emit_report(rep, dir.string());
    REQUIRE(written.size() == 3);
    CHECK(fs::path(written[0]).filename() == "report.json");
    CHECK(fs::path(written[1]).filename() == "trajectory.csv");
    CHECK(fs::path(written[2]).filename() == "deviations.csv");
    for (const std::string& path : written) CHECK(fs::exists(path));

    CHECK(read_file(written[0]) == report_json(rep));
    CHECK(read_file(written[1]) == trajectory_csv(*rep.trajectory, sc.system));
    CHECK(read_file(written[2]) ==
          deviations_csv(*rep.trajectory, rep.fixed_point->point));

    // without a trajectory only report.json appears
    const ScenarioFile jsr_only =
        parse_scenario(collateral_doc(R"(, "analyses": ["jsr"])"));
    AnalysisReport lean = run_scenario(jsr_only);
    lean.include_timings = false;
    const std::vector<std::string> one = emit_report(lean, (dir / "lean").string());
    CHECK(one.size() == 1);

    fs::remove_all(dir);
}
