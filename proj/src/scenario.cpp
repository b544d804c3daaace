#include "rdyn/scenario.hpp"

#include <Eigen/LU>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

#include "rdyn/errors.hpp"
#include "rdyn/version.hpp"

namespace rdyn {

namespace {

using Json = nlohmann::ordered_json;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt10(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1,
                               diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

std::string suggest(const std::string& got, const std::vector<std::string>& known) {
    std::size_t best = 4;  // suggest only close misses
    const std::string* pick = nullptr;
    for (const std::string& k : known) {
        const std::size_t d = edit_distance(got, k);
        if (d < best) {
            best = d;
            pick = &k;
        }
    }
    return pick ? " (did you mean '" + *pick + "'?)" : "";
}

/// Error context: document name plus a JSON-path-like location.
struct Ctx {
    std::string doc;
    std::string path;

    Ctx at(const std::string& key) const {
        return {doc, path.empty() ? key : path + "." + key};
    }
    Ctx idx(std::size_t i) const { return {doc, path + "[" + std::to_string(i) + "]"}; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ScenarioError(doc + (path.empty() ? "" : ": " + path) + ": " + msg);
    }
};

void require_object(const Json& j, const Ctx& ctx) {
    if (!j.is_object()) ctx.fail(std::string("expected an object, got ") + j.type_name());
}

/// Strict mode: every key must be in the allowed list.
void check_keys(const Json& obj, const Ctx& ctx, std::vector<std::string> allowed) {
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            ctx.fail("unknown field '" + item.key() + "'" + suggest(item.key(), allowed));
        }
    }
}

const Json& member(const Json& obj, const Ctx& ctx, const std::string& key) {
    auto it = obj.find(key);
    if (it == obj.end()) ctx.fail("missing required field '" + key + "'");
    return *it;
}

double number_at(const Json& j, const Ctx& ctx) {
    if (!j.is_number()) ctx.fail(std::string("expected a number, got ") + j.type_name());
    return j.get<double>();
}

long integer_at(const Json& j, const Ctx& ctx, long min_value) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) {
        ctx.fail(std::string("expected an integer, got ") + j.type_name());
    }
    const long v = j.get<long>();
    if (v < min_value) {
        ctx.fail("expected an integer >= " + std::to_string(min_value) + ", got " +
                 std::to_string(v));
    }
    return v;
}

std::uint64_t seed_at(const Json& j, const Ctx& ctx) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
        ctx.fail(std::string("expected a non-negative integer seed, got ") + j.type_name());
    }
    return j.get<std::uint64_t>();
}

std::string string_at(const Json& j, const Ctx& ctx) {
    if (!j.is_string()) ctx.fail(std::string("expected a string, got ") + j.type_name());
    return j.get<std::string>();
}

Eigen::VectorXd vector_at(const Json& j, const Ctx& ctx, int expected_size) {
    if (!j.is_array()) ctx.fail(std::string("expected an array, got ") + j.type_name());
    if (expected_size >= 0 && static_cast<int>(j.size()) != expected_size) {
        ctx.fail("expected " + std::to_string(expected_size) + " entries, got " +
                 std::to_string(j.size()));
    }
    Eigen::VectorXd v(static_cast<int>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[static_cast<int>(i)] = number_at(j[i], ctx.idx(i));
    }
    return v;
}

Eigen::MatrixXd matrix_at(const Json& j, const Ctx& ctx, int rows, int cols) {
    if (!j.is_array()) {
        ctx.fail(std::string("expected an array of rows, got ") + j.type_name());
    }
    if (static_cast<int>(j.size()) != rows) {
        ctx.fail("expected " + std::to_string(rows) + " rows, got " +
                 std::to_string(j.size()));
    }
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        m.row(r) = vector_at(j[r], ctx.idx(r), cols).transpose();
    }
    return m;
}

RegimeOperator parse_operator(const Json& j, const Ctx& ctx, int dimension) {
    require_object(j, ctx);
    const std::string type = string_at(member(j, ctx, "type"), ctx.at("type"));

    try {
        if (type == "affine") {
            check_keys(j, ctx, {"type", "matrix", "offset"});
            AffineOp op;
            op.matrix = matrix_at(member(j, ctx, "matrix"), ctx.at("matrix"), dimension,
                                  dimension);
            op.offset = j.contains("offset")
                            ? vector_at(j["offset"], ctx.at("offset"), dimension)
                            : Eigen::VectorXd::Zero(dimension).eval();
            return op;
        }
        if (type == "collateral") {
            if (dimension != 2) {
                ctx.fail("collateral operators are two-dimensional, scenario dimension is " +
                         std::to_string(dimension));
            }
            check_keys(j, ctx,
                       {"type", "side", "alpha", "beta", "mu", "nu", "q_bar", "b_bar"});
            const std::string side = string_at(member(j, ctx, "side"), ctx.at("side"));
            if (side != "N" && side != "C") {
                ctx.at("side").fail("expected \"N\" or \"C\", got \"" + side + "\"");
            }
            CollateralOp op{number_at(member(j, ctx, "alpha"), ctx.at("alpha")),
                            number_at(member(j, ctx, "beta"), ctx.at("beta")),
                            number_at(member(j, ctx, "mu"), ctx.at("mu")),
                            number_at(member(j, ctx, "nu"), ctx.at("nu")),
                            number_at(member(j, ctx, "q_bar"), ctx.at("q_bar")),
                            number_at(member(j, ctx, "b_bar"), ctx.at("b_bar")),
                            side == "N" ? CollateralSide::N : CollateralSide::C};
            return op;
        }
        if (type == "expression") {
            check_keys(j, ctx, {"type", "components"});
            const Json& comps = member(j, ctx, "components");
            const Ctx cctx = ctx.at("components");
            if (!comps.is_array() || static_cast<int>(comps.size()) != dimension) {
                cctx.fail("expected an array of " + std::to_string(dimension) +
                          " expression strings");
            }
            ExpressionOp op;
            for (std::size_t i = 0; i < comps.size(); ++i) {
                const Ctx ectx = cctx.idx(i);
                const std::string text = string_at(comps[i], ectx);
                try {
                    op.components.push_back(Expression::parse(text, dimension));
                } catch (const Error& e) {
                    ectx.fail(e.what());
                }
            }
            return op;
        }
    } catch (const std::invalid_argument& e) {
        ctx.fail(e.what());  // operator invariant breached (e.g. alpha out of range)
    }

    ctx.at("type").fail("unknown operator type '" + type + "'" +
                        suggest(type, {"affine", "collateral", "expression"}));
}

Word word_at(const Json& j, const Ctx& ctx, const RegimeSystem& system) {
    if (!j.is_array()) ctx.fail(std::string("expected an array, got ") + j.type_name());
    Word word;
    word.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string label = string_at(j[i], ctx.idx(i));
        try {
            word.push_back(system.regime(label));
        } catch (const IndexError&) {
            ctx.idx(i).fail("unknown regime label '" + label + "'");
        }
    }
    return word;
}

void check_probability_row(const Eigen::VectorXd& row, const Ctx& ctx) {
    for (int i = 0; i < row.size(); ++i) {
        if (!(row[i] >= 0.0 && row[i] <= 1.0)) {
            ctx.fail("entry " + std::to_string(i) + " is " + fmt10(row[i]) +
                     ", probabilities must lie in [0, 1]");
        }
    }
    const double sum = row.sum();
    if (std::abs(sum - 1.0) > 1e-12) {
        ctx.fail("sums to " + fmt10(sum) + ", expected 1");
    }
}

SwitchingSignal parse_signal(const Json& j, const Ctx& ctx, const RegimeSystem& system) {
    require_object(j, ctx);
    const std::string type = string_at(member(j, ctx, "type"), ctx.at("type"));

    try {
        if (type == "explicit") {
            check_keys(j, ctx, {"type", "word"});
            return SwitchingSignal::explicit_word(
                word_at(member(j, ctx, "word"), ctx.at("word"), system));
        }
        if (type == "periodic") {
            check_keys(j, ctx, {"type", "word"});
            return SwitchingSignal::periodic(
                word_at(member(j, ctx, "word"), ctx.at("word"), system));
        }
        if (type == "iid") {
            check_keys(j, ctx, {"type", "weights", "seed"});
            const Eigen::VectorXd w =
                vector_at(member(j, ctx, "weights"), ctx.at("weights"),
                          static_cast<int>(system.regime_count()));
            check_probability_row(w, ctx.at("weights"));
            const std::uint64_t seed =
                j.contains("seed") ? seed_at(j["seed"], ctx.at("seed")) : 0;
            return SwitchingSignal::iid({w.data(), w.data() + w.size()}, seed);
        }
        if (type == "markov") {
            check_keys(j, ctx, {"type", "transition", "initial", "seed"});
            const int k = static_cast<int>(system.regime_count());
            const Eigen::MatrixXd t =
                matrix_at(member(j, ctx, "transition"), ctx.at("transition"), k, k);
            for (int r = 0; r < k; ++r) {
                check_probability_row(t.row(r).transpose(),
                                      ctx.at("transition").idx(static_cast<std::size_t>(r)));
            }
            const std::string initial =
                string_at(member(j, ctx, "initial"), ctx.at("initial"));
            RegimeId s0{0};
            try {
                s0 = system.regime(initial);
            } catch (const IndexError&) {
                ctx.at("initial").fail("unknown regime label '" + initial + "'");
            }
            const std::uint64_t seed =
                j.contains("seed") ? seed_at(j["seed"], ctx.at("seed")) : 0;
            return SwitchingSignal::markov(t, s0, seed);
        }
    } catch (const ScenarioError&) {
        throw;  // already carries its location
    } catch (const Error& e) {
        ctx.fail(e.what());
    } catch (const std::invalid_argument& e) {
        ctx.fail(e.what());
    }

    ctx.at("type").fail("unknown signal type '" + type + "'" +
                        suggest(type, {"explicit", "periodic", "iid", "markov"}));
}

std::vector<std::string> canonical_analyses(const Json& j, const Ctx& ctx) {
    if (!j.is_array()) ctx.fail(std::string("expected an array, got ") + j.type_name());
    if (j.empty()) ctx.fail("must not be empty; omit the field to run everything");
    std::vector<bool> on(analysis_names().size(), false);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string name = string_at(j[i], ctx.idx(i));
        const auto& names = analysis_names();
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) {
            ctx.idx(i).fail("unknown analysis '" + name + "'" + suggest(name, names));
        }
        on[static_cast<std::size_t>(it - names.begin())] = true;
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < on.size(); ++i) {
        if (on[i]) out.push_back(analysis_names()[i]);
    }
    return out;
}

JsrOptions parse_jsr_options(const Json& j, const Ctx& ctx) {
    require_object(j, ctx);
    check_keys(j, ctx, {"depth", "gap", "budget", "norm"});
    JsrOptions opts;
    if (j.contains("depth")) {
        opts.depth = static_cast<int>(integer_at(j["depth"], ctx.at("depth"), 1));
    }
    if (j.contains("gap")) {
        opts.gap = number_at(j["gap"], ctx.at("gap"));
        if (!(opts.gap >= 0.0)) ctx.at("gap").fail("must be >= 0");
    }
    if (j.contains("budget")) {
        opts.budget = static_cast<std::uint64_t>(integer_at(j["budget"], ctx.at("budget"), 1));
    }
    if (j.contains("norm")) {
        const std::string n = string_at(j["norm"], ctx.at("norm"));
        if (n == "induced-inf") {
            opts.norm = MatrixNorm::InducedInf;
        } else if (n == "induced-2") {
            opts.norm = MatrixNorm::InducedTwo;
        } else {
            ctx.at("norm").fail("unknown norm '" + n + "'" +
                                suggest(n, {"induced-inf", "induced-2"}));
        }
    }
    return opts;
}

SamplingPlan parse_sampler(const Json& j, const Ctx& ctx, int dimension) {
    require_object(j, ctx);
    check_keys(j, ctx, {"box", "grid_points", "random_points", "seed"});
    SamplingPlan plan;
    if (j.contains("box")) {
        const Ctx bctx = ctx.at("box");
        require_object(j["box"], bctx);
        check_keys(j["box"], bctx, {"lo", "hi"});
        plan.box_lo = vector_at(member(j["box"], bctx, "lo"), bctx.at("lo"), dimension);
        plan.box_hi = vector_at(member(j["box"], bctx, "hi"), bctx.at("hi"), dimension);
        for (int i = 0; i < dimension; ++i) {
            if (!(plan.box_lo[i] <= plan.box_hi[i])) {
                bctx.fail("lo[" + std::to_string(i) + "] exceeds hi[" + std::to_string(i) +
                          "]");
            }
        }
    }
    if (j.contains("grid_points")) {
        plan.grid_points =
            static_cast<int>(integer_at(j["grid_points"], ctx.at("grid_points"), 0));
    }
    if (j.contains("random_points")) {
        plan.random_points =
            static_cast<int>(integer_at(j["random_points"], ctx.at("random_points"), 0));
    }
    if (j.contains("seed")) plan.seed = seed_at(j["seed"], ctx.at("seed"));
    if (plan.grid_points == 0 && plan.random_points == 0) {
        ctx.fail("grid_points and random_points cannot both be 0");
    }
    return plan;
}

Eigen::VectorXd resolved_box(const Eigen::VectorXd& given, int dimension, double fallback) {
    return given.size() == dimension ? given
                                     : Eigen::VectorXd::Constant(dimension, fallback).eval();
}

// --- serialization ---------------------------------------------------------

Json vec_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Json mat_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (int r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json labels_json(const Word& word, const RegimeSystem& system) {
    Json a = Json::array();
    for (RegimeId id : word) a.push_back(system.label(id));
    return a;
}

Json operator_json(const RegimeOperator& op) {
    Json j;
    if (op.holds<AffineOp>()) {
        const auto& a = op.get<AffineOp>();
        j["type"] = "affine";
        j["matrix"] = mat_json(a.matrix);
        j["offset"] = vec_json(a.offset);
    } else if (op.holds<CollateralOp>()) {
        const auto& c = op.get<CollateralOp>();
        j["type"] = "collateral";
        j["side"] = c.side == CollateralSide::N ? "N" : "C";
        j["alpha"] = c.alpha;
        j["beta"] = c.beta;
        j["mu"] = c.mu;
        j["nu"] = c.nu;
        j["q_bar"] = c.q_bar;
        j["b_bar"] = c.b_bar;
    } else if (op.holds<ExpressionOp>()) {
        const auto& e = op.get<ExpressionOp>();
        j["type"] = "expression";
        Json comps = Json::array();
        for (const Expression& c : e.components) comps.push_back(c.str());
        j["components"] = std::move(comps);
    } else {
        const auto& c = op.get<ComposedOp>();
        j["type"] = "composed";
        Json stages = Json::array();
        for (const RegimeOperator& s : c.stages) stages.push_back(operator_json(s));
        j["stages"] = std::move(stages);
    }
    return j;
}

Json signal_json(const SwitchingSignal& signal, const RegimeSystem& system) {
    Json j;
    j["type"] = signal.kind();
    if (signal.holds<SwitchingSignal::Explicit>()) {
        j["word"] = labels_json(signal.get<SwitchingSignal::Explicit>().word, system);
    } else if (signal.holds<SwitchingSignal::Periodic>()) {
        j["word"] = labels_json(signal.get<SwitchingSignal::Periodic>().word, system);
    } else if (signal.holds<SwitchingSignal::Iid>()) {
        const auto& iid = signal.get<SwitchingSignal::Iid>();
        Json w = Json::array();
        for (double p : iid.weights) w.push_back(p);
        j["weights"] = std::move(w);
        j["seed"] = iid.seed;
    } else {
        const auto& mk = signal.get<SwitchingSignal::Markov>();
        j["transition"] = mat_json(mk.transition);
        j["initial"] = system.label(mk.initial);
        j["seed"] = mk.seed;
    }
    return j;
}

Json scenario_json(const ScenarioFile& sc) {
    const int n = sc.system.dimension();
    Json j;
    j["dimension"] = n;
    Json regimes = Json::array();
    for (std::size_t i = 0; i < sc.system.regime_count(); ++i) {
        Json r;
        r["label"] = sc.system.label(RegimeId{i});
        r["operator"] = operator_json(sc.system.op(RegimeId{i}));
        regimes.push_back(std::move(r));
    }
    j["regimes"] = std::move(regimes);
    j["initial_state"] = vec_json(sc.initial_state.size() == n
                                      ? sc.initial_state
                                      : Eigen::VectorXd::Zero(n).eval());
    if (sc.signal) j["signal"] = signal_json(*sc.signal, sc.system);
    j["horizon"] = sc.horizon;
    j["analyses"] = sc.analyses;
    j["jsr"] = Json{{"depth", sc.jsr.depth},
                    {"gap", sc.jsr.gap},
                    {"budget", sc.jsr.budget},
                    {"norm", to_string(sc.jsr.norm)}};
    j["sampler"] = Json{{"box", Json{{"lo", vec_json(resolved_box(sc.sampler.box_lo, n, -2.0))},
                                     {"hi", vec_json(resolved_box(sc.sampler.box_hi, n, 4.0))}}},
                        {"grid_points", sc.sampler.grid_points},
                        {"random_points", sc.sampler.random_points},
                        {"seed", sc.sampler.seed}};
    j["output"] = Json{{"directory", sc.output_directory}};
    return j;
}

Json spectrum_json(const Spectrum& s) {
    Json eigs = Json::array();
    for (const std::complex<double>& z : s.eigenvalues) {
        eigs.push_back(Json{{"re", z.real()}, {"im", z.imag()}});
    }
    return Json{{"eigenvalues", std::move(eigs)}, {"spectral_radius", s.spectral_radius}};
}

Json error_block(const std::string& message) { return Json{{"error", message}}; }

Json report_to_json(const AnalysisReport& r) {
    const RegimeSystem& system = r.scenario.system;
    Json j;
    j["tool"] = Json{{"name", "rdyn"}, {"version", r.version}};
    j["scenario"] = scenario_json(r.scenario);

    const auto wants = [&](const char* name) {
        return std::find(r.scenario.analyses.begin(), r.scenario.analyses.end(), name) !=
               r.scenario.analyses.end();
    };

    Json res = Json::object();
    if (wants("fixed-point")) {
        if (r.fixed_point) {
            Json b;
            b["point"] = vec_json(r.fixed_point->point);
            b["residual"] = r.fixed_point->residual;
            b["converged"] = r.fixed_point->converged;
            b["iterations"] = r.fixed_point->iterations;
            if (r.fixed_point->worst_regime) {
                b["worst_regime"] = system.label(*r.fixed_point->worst_regime);
            }
            res["fixed-point"] = std::move(b);
        } else {
            res["fixed-point"] = error_block(r.fixed_point_error);
        }
    }
    if (wants("linearize")) {
        if (r.linearization) {
            Json b;
            b["point"] = vec_json(r.linearization->point);
            Json regimes = Json::array();
            for (std::size_t s = 0; s < r.linearization->matrices.size(); ++s) {
                Json one;
                one["label"] = system.label(RegimeId{s});
                one["jacobian"] = mat_json(r.linearization->matrices[s]);
                Json sp = spectrum_json(r.linearization->spectra[s]);
                one["eigenvalues"] = std::move(sp["eigenvalues"]);
                one["spectral_radius"] = sp["spectral_radius"];
                one["nonsmooth"] = static_cast<bool>(r.linearization->nonsmooth[s]);
                regimes.push_back(std::move(one));
            }
            b["regimes"] = std::move(regimes);
            res["linearize"] = std::move(b);
        } else {
            res["linearize"] = error_block(r.linearization_error);
        }
    }
    if (wants("jsr")) {
        if (r.jsr) {
            Json b;
            b["lower"] = r.jsr->lower;
            b["upper"] = r.jsr->upper;
            b["depth"] = r.jsr->depth;
            b["norm"] = to_string(r.jsr->norm);
            b["witness"] = labels_json(r.jsr->witness, system);
            b["products_evaluated"] = r.jsr->products_evaluated;
            if (r.stability) {
                b["verdict"] = Json{{"status", to_string(r.stability->status)},
                                    {"margin", r.stability->margin}};
            }
            res["jsr"] = std::move(b);
        } else {
            res["jsr"] = error_block(r.jsr_error);
        }
    }
    if (wants("commute")) {
        if (r.representability) {
            Json b;
            b["status"] = to_string(r.representability->status);
            b["reason"] = r.representability->reason;
            Json pairs = Json::array();
            for (const CommutationReport& p : r.representability->evidence) {
                Json one;
                one["a"] = system.label(p.a);
                one["b"] = system.label(p.b);
                one["max_discrepancy"] = p.max_discrepancy;
                one["commute"] = p.commute;
                if (p.witness) one["witness"] = vec_json(*p.witness);
                one["samples_tested"] = p.samples_tested;
                one["note"] = p.note;
                pairs.push_back(std::move(one));
            }
            b["pairs"] = std::move(pairs);
            res["commute"] = std::move(b);
        } else {
            res["commute"] = error_block(r.commute_error);
        }
    }
    if (wants("irreducibility")) {
        if (r.irreducibility) {
            Json b;
            Json pairs = Json::array();
            for (const DistinctPair& p : r.irreducibility->distinct_pairs) {
                pairs.push_back(Json{{"a", system.label(p.a)},
                                     {"b", system.label(p.b)},
                                     {"max_difference", p.max_difference},
                                     {"witness", vec_json(p.witness)}});
            }
            b["distinct_pairs"] = std::move(pairs);
            b["reducible_candidate"] = r.irreducibility->reducible_candidate;
            res["irreducibility"] = std::move(b);
        } else {
            res["irreducibility"] = error_block(r.irreducibility_error);
        }
    }
    if (wants("topology")) {
        if (r.topology) {
            res["topology"] = Json{
                {"regime_count", r.topology->regime_count},
                {"component_count", r.topology->component_count},
                {"conjugate_to_invariant_law", r.topology->conjugate_to_invariant_law}};
        } else {
            res["topology"] = error_block(r.topology_error);
        }
    }
    if (wants("simulate")) {
        if (r.trajectory) {
            Json b;
            b["horizon"] = r.trajectory->horizon();
            b["regimes"] = labels_json(r.trajectory->regimes, system);
            Json states = Json::array();
            for (const Eigen::VectorXd& x : r.trajectory->states) states.push_back(vec_json(x));
            b["states"] = std::move(states);
            if (r.envelope) {
                b["envelope"] = Json{{"amplitude", r.envelope->amplitude},
                                     {"rate", r.envelope->rate}};
            }
            res["simulate"] = std::move(b);
        } else {
            res["simulate"] = error_block(r.simulate_error);
        }
    }
    j["results"] = std::move(res);

    if (r.include_timings) {
        Json t;
        for (const auto& [name, ms] : r.timings_ms) t[name] = ms;
        j["timings_ms"] = std::move(t);
    }
    return j;
}

} // namespace

const std::vector<std::string>& analysis_names() {
    static const std::vector<std::string> names = {
        "fixed-point", "linearize",  "jsr",      "commute",
        "irreducibility", "topology", "simulate"};
    return names;
}

void ScenarioFile::override_seed(std::uint64_t seed) {
    if (signal) {
        if (signal->holds<SwitchingSignal::Iid>()) {
            signal = SwitchingSignal::iid(signal->get<SwitchingSignal::Iid>().weights, seed);
        } else if (signal->holds<SwitchingSignal::Markov>()) {
            const auto& mk = signal->get<SwitchingSignal::Markov>();
            signal = SwitchingSignal::markov(mk.transition, mk.initial, seed);
        }
    }
    sampler.seed = seed;
}

ScenarioFile parse_scenario(const std::string& text, const std::string& name) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioError(name + ": " + e.what());
    }
    const Ctx root{name, ""};
    require_object(doc, root);
    check_keys(doc, root,
               {"dimension", "regimes", "initial_state", "signal", "horizon", "analyses",
                "jsr", "sampler", "output"});

    const int dimension =
        static_cast<int>(integer_at(member(doc, root, "dimension"), root.at("dimension"), 1));

    const Json& regimes_json = member(doc, root, "regimes");
    const Ctx rctx = root.at("regimes");
    if (!regimes_json.is_array() || regimes_json.empty()) {
        rctx.fail("expected a non-empty array of regimes");
    }
    std::vector<Regime> regimes;
    regimes.reserve(regimes_json.size());
    for (std::size_t i = 0; i < regimes_json.size(); ++i) {
        const Ctx ictx = rctx.idx(i);
        const Json& r = regimes_json[i];
        require_object(r, ictx);
        check_keys(r, ictx, {"label", "operator"});
        std::string label = string_at(member(r, ictx, "label"), ictx.at("label"));
        RegimeOperator op =
            parse_operator(member(r, ictx, "operator"), ictx.at("operator"), dimension);
        regimes.push_back({std::move(label), std::move(op)});
    }
    std::optional<RegimeSystem> system;
    try {
        system.emplace(std::move(regimes));
    } catch (const std::invalid_argument& e) {
        rctx.fail(e.what());
    }

    ScenarioFile sc{std::move(*system)};
    sc.source_path = name;
    sc.initial_state = doc.contains("initial_state")
                           ? vector_at(doc["initial_state"], root.at("initial_state"),
                                       dimension)
                           : Eigen::VectorXd::Zero(dimension).eval();
    for (int i = 0; i < sc.initial_state.size(); ++i) {
        if (!std::isfinite(sc.initial_state[i])) {
            root.at("initial_state").idx(static_cast<std::size_t>(i)).fail("must be finite");
        }
    }
    if (doc.contains("signal")) {
        sc.signal = parse_signal(doc["signal"], root.at("signal"), sc.system);
    }
    if (doc.contains("horizon")) {
        sc.horizon =
            static_cast<std::size_t>(integer_at(doc["horizon"], root.at("horizon"), 0));
    }
    sc.analyses = doc.contains("analyses")
                      ? canonical_analyses(doc["analyses"], root.at("analyses"))
                      : analysis_names();
    if (doc.contains("jsr")) sc.jsr = parse_jsr_options(doc["jsr"], root.at("jsr"));
    if (doc.contains("sampler")) {
        sc.sampler = parse_sampler(doc["sampler"], root.at("sampler"), dimension);
    }
    if (doc.contains("output")) {
        const Ctx octx = root.at("output");
        require_object(doc["output"], octx);
        check_keys(doc["output"], octx, {"directory"});
        if (doc["output"].contains("directory")) {
            sc.output_directory =
                string_at(doc["output"]["directory"], octx.at("directory"));
            if (sc.output_directory.empty()) octx.at("directory").fail("must not be empty");
        }
    }

    const bool wants_simulate = std::find(sc.analyses.begin(), sc.analyses.end(),
                                          "simulate") != sc.analyses.end();
    if (wants_simulate && !sc.signal) {
        root.fail("analyses include 'simulate' but no 'signal' is declared");
    }
    return sc;
}

ScenarioFile load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError("cannot read scenario file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path);
}

AnalysisReport run_scenario(const ScenarioFile& scenario) {
    AnalysisReport report{scenario};
    report.version = RDYN_VERSION;

    const auto requested = [&](const char* name) {
        return std::find(scenario.analyses.begin(), scenario.analyses.end(), name) !=
               scenario.analyses.end();
    };
    bool want_jsr = requested("jsr");
    bool want_lin = requested("linearize") || want_jsr;
    bool want_fp = requested("fixed-point") || want_lin;
    const bool want_commute = requested("commute");
    const bool want_irr = requested("irreducibility");
    const bool want_top = requested("topology");
    const bool want_sim = requested("simulate");

    report.scenario.analyses.clear();
    for (const std::string& name : analysis_names()) {
        const bool on = (name == "fixed-point" && want_fp) ||
                        (name == "linearize" && want_lin) || (name == "jsr" && want_jsr) ||
                        (name == "commute" && want_commute) ||
                        (name == "irreducibility" && want_irr) ||
                        (name == "topology" && want_top) || (name == "simulate" && want_sim);
        if (on) report.scenario.analyses.push_back(name);
    }

    const int n = scenario.system.dimension();
    const Eigen::VectorXd x0 = scenario.initial_state.size() == n
                                   ? scenario.initial_state
                                   : Eigen::VectorXd::Zero(n).eval();
    report.scenario.initial_state = x0;

    int attempted = 0;
    int failed = 0;
    std::string first_failure;
    const auto timed = [&](const char* name, std::string& error_slot, auto&& body) {
        ++attempted;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body();
        } catch (const std::exception& e) {
            error_slot = e.what();
            ++failed;
            if (first_failure.empty()) first_failure = std::string(name) + ": " + e.what();
        }
        const auto t1 = std::chrono::steady_clock::now();
        report.timings_ms[name] =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
    };

    if (want_fp) {
        timed("fixed-point", report.fixed_point_error, [&] {
            report.fixed_point =
                common_fixed_point(scenario.system, x0, scenario.fixed_point_tol);
        });
    }
    if (want_lin) {
        timed("linearize", report.linearization_error, [&] {
            if (!report.fixed_point) {
                throw NumericalError("no common fixed point to linearize at (" +
                                     report.fixed_point_error + ")");
            }
            if (!report.fixed_point->converged) {
                throw NumericalError(
                    "common fixed point iteration did not converge (residual " +
                    fmt10(report.fixed_point->residual) + "); cannot linearize");
            }
            report.linearization = linearize(scenario.system, report.fixed_point->point);
        });
    }
    if (want_jsr) {
        timed("jsr", report.jsr_error, [&] {
            if (!report.linearization) {
                throw NumericalError("no linearization available (" +
                                     report.linearization_error + ")");
            }
            report.jsr =
                jsr_bounds(report.linearization->matrices, scenario.jsr.gap,
                           scenario.jsr.depth, scenario.jsr.budget, scenario.jsr.norm);
            report.stability = stability_verdict(*report.jsr);
        });
    }
    if (want_commute) {
        timed("commute", report.commute_error, [&] {
            report.representability = invariant_law_verdict(
                scenario.system, scenario.sampler, scenario.structure_tol);
        });
    }
    if (want_irr) {
        timed("irreducibility", report.irreducibility_error, [&] {
            report.irreducibility = irreducibility_check(scenario.system, scenario.sampler,
                                                         scenario.structure_tol);
        });
    }
    if (want_top) {
        timed("topology", report.topology_error,
              [&] { report.topology = topology_report(scenario.system); });
    }
    if (want_sim) {
        timed("simulate", report.simulate_error, [&] {
            if (!scenario.signal) {
                throw ScenarioError("scenario declares no switching signal");
            }
            report.trajectory =
                simulate(scenario.system, *scenario.signal, x0, scenario.horizon);
            if (report.fixed_point && report.fixed_point->converged) {
                report.envelope =
                    exponential_envelope_fit(*report.trajectory, report.fixed_point->point);
            }
        });
    }

    if (attempted > 0 && failed == attempted) {
        throw NumericalError("every requested analysis failed; first failure: " +
                             first_failure);
    }
    return report;
}

std::string report_json(const AnalysisReport& report) {
    return report_to_json(report).dump(2) + "\n";
}

std::string trajectory_csv(const Trajectory& trajectory, const RegimeSystem& system) {
    std::string out = "t,regime";
    const int n = trajectory.states.empty() ? system.dimension()
                                            : static_cast<int>(trajectory.states[0].size());
    for (int i = 0; i < n; ++i) out += ",x" + std::to_string(i);
    out += "\n";
    for (std::size_t t = 0; t < trajectory.states.size(); ++t) {
        out += std::to_string(t);
        out += ",";
        if (t > 0) out += system.label(trajectory.regimes[t - 1]);
        for (int i = 0; i < trajectory.states[t].size(); ++i) {
            out += ",";
            out += fmt17(trajectory.states[t][i]);
        }
        out += "\n";
    }
    return out;
}

std::string deviations_csv(const Trajectory& trajectory, const Eigen::VectorXd& x_star) {
    std::string out = "t,deviation\n";
    for (std::size_t t = 0; t < trajectory.states.size(); ++t) {
        out += std::to_string(t);
        out += ",";
        out += fmt17((trajectory.states[t] - x_star).lpNorm<Eigen::Infinity>());
        out += "\n";
    }
    return out;
}

std::vector<std::string> emit_report(const AnalysisReport& report,
                                     const std::string& out_dir) {
    namespace fs = std::filesystem;
    const std::string dir = out_dir.empty() ? "." : out_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw ScenarioError("cannot create output directory '" + dir + "': " + ec.message());
    }
    const auto write_file = [&](const char* name, const std::string& body) {
        const fs::path p = fs::path(dir) / name;
        std::ofstream f(p, std::ios::binary);
        f << body;
        f.flush();
        if (!f) throw ScenarioError("cannot write '" + p.string() + "'");
        return p.string();
    };

    std::vector<std::string> written;
    written.push_back(write_file("report.json", report_json(report)));
    if (report.trajectory) {
        written.push_back(write_file(
            "trajectory.csv", trajectory_csv(*report.trajectory, report.scenario.system)));
        if (report.fixed_point && report.fixed_point->converged) {
            written.push_back(write_file(
                "deviations.csv",
                deviations_csv(*report.trajectory, report.fixed_point->point)));
        }
    }
    return written;
}

namespace {

std::string format_matrix(const Eigen::MatrixXd& m) {
    std::string out = "[";
    for (int r = 0; r < m.rows(); ++r) {
        out += r == 0 ? "[" : ", [";
        for (int c = 0; c < m.cols(); ++c) {
            if (c > 0) out += ", ";
            out += fmt10(m(r, c));
        }
        out += "]";
    }
    return out + "]";
}

} // namespace

PaperExampleResult paper_example() {
    RegimeSystem system(
        {{"N", CollateralOp{0.8, 0.8, 1.6, 1.6, 0.2, 0.2, CollateralSide::N}},
         {"C", CollateralOp{0.8, 0.8, 1.6, 1.6, 0.2, 0.2, CollateralSide::C}}});

    ScenarioFile sc{std::move(system)};
    sc.source_path = "<built-in>";
    // Start a hair off the fixed point along the ordered product's dominant
    // eigenvector so the simulated deviations exhibit the certified growth.
    const double lam1 = (1.44 + std::sqrt(1.44 * 1.44 - 4.0 * 0.4096)) / 2.0;
    Eigen::Vector2d direction(0.32, lam1 - 0.64);
    direction.normalize();
    sc.initial_state = Eigen::Vector2d(1.0, 1.0) + 1e-6 * direction;
    sc.signal = SwitchingSignal::periodic({RegimeId{0}, RegimeId{1}});
    sc.horizon = 12;
    sc.analyses = analysis_names();

    PaperExampleResult result{run_scenario(sc), {}, true};
    const AnalysisReport& rep = result.report;

    const auto push = [&](ComparisonRow row) {
        result.all_passed = result.all_passed && row.pass;
        result.rows.push_back(std::move(row));
    };
    const auto numeric = [&](const std::string& q, double computed, double reference,
                             double tol) {
        ComparisonRow row{q, fmt10(computed), fmt10(reference),
                          std::abs(computed - reference), tol, false};
        row.pass = std::isfinite(computed) && row.error <= tol;
        push(std::move(row));
    };
    const auto matrix_row = [&](const std::string& q, const Eigen::MatrixXd& computed,
                                const Eigen::MatrixXd& reference, double tol) {
        ComparisonRow row{q, format_matrix(computed), format_matrix(reference),
                          (computed - reference).cwiseAbs().maxCoeff(), tol, false};
        row.pass = std::isfinite(row.error) && row.error <= tol;
        push(std::move(row));
    };
    const auto text_row = [&](const std::string& q, const std::string& computed,
                              const std::string& reference) {
        push(ComparisonRow{q, computed, reference, 0.0, 0.0, computed == reference});
    };

    if (!rep.fixed_point || !rep.linearization || !rep.jsr || !rep.stability ||
        !rep.representability) {
        text_row("pipeline", "incomplete", "complete");
        return result;
    }

    numeric("q*", rep.fixed_point->point[0], 1.0, 1e-10);
    numeric("b*", rep.fixed_point->point[1], 1.0, 1e-10);

    Eigen::Matrix2d ref_n;
    ref_n << 0.8, 0.4, 0.0, 0.8;
    Eigen::Matrix2d ref_c;
    ref_c << 0.8, 0.0, 0.4, 0.8;
    matrix_row("A_N", rep.linearization->matrices[0], ref_n, 1e-9);
    matrix_row("A_C", rep.linearization->matrices[1], ref_c, 1e-9);
    numeric("rho(A_N)", rep.linearization->spectra[0].spectral_radius, 0.8, 1e-10);
    numeric("rho(A_C)", rep.linearization->spectra[1].spectral_radius, 0.8, 1e-10);

    const Eigen::MatrixXd product =
        word_product(*rep.linearization, {RegimeId{0}, RegimeId{1}});
    Eigen::Matrix2d ref_product;
    ref_product << 0.64, 0.32, 0.32, 0.80;
    matrix_row("A_C*A_N", product, ref_product, 1e-12);
    numeric("trace(A_C*A_N)", product.trace(), 1.44, 1e-12);
    numeric("det(A_C*A_N)", product.determinant(), 0.4096, 1e-12);

    const Spectrum product_spectrum = eigenvalues(product);
    numeric("lambda_1", std::abs(product_spectrum.eigenvalues[0]), 1.0498, 5e-4);
    numeric("lambda_2", std::abs(product_spectrum.eigenvalues[1]), 0.3902, 5e-4);
    numeric("rho(A_C*A_N)", product_spectrum.spectral_radius, 1.0498, 5e-4);

    numeric("jsr lower bound", rep.jsr->lower, 1.0246, 5e-4);
    text_row("stability verdict", to_string(rep.stability->status), "unstable-certified");
    text_row("representability", to_string(rep.representability->status), "ruled-out");
    return result;
}

std::string format_comparison_table(const std::vector<ComparisonRow>& rows) {
    const std::array<std::string, 6> header = {"quantity", "computed", "reference",
                                               "|error|",  "tolerance", "status"};
    std::vector<std::array<std::string, 6>> cells;
    cells.reserve(rows.size());
    for (const ComparisonRow& r : rows) {
        const bool textual = r.tolerance == 0.0;
        char err[32];
        char tol[32];
        std::snprintf(err, sizeof err, "%.3g", r.error);
        std::snprintf(tol, sizeof tol, "%.3g", r.tolerance);
        cells.push_back({r.quantity, r.computed, r.reference, textual ? "-" : err,
                         textual ? "-" : tol, r.pass ? "ok" : "FAIL"});
    }

    std::array<std::size_t, 6> width{};
    for (std::size_t c = 0; c < 6; ++c) width[c] = header[c].size();
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < 6; ++c) width[c] = std::max(width[c], row[c].size());
    }

    const auto emit = [&](const std::array<std::string, 6>& row, std::string& out) {
        for (std::size_t c = 0; c < 6; ++c) {
            out += row[c];
            if (c + 1 < 6) out += std::string(width[c] - row[c].size() + 2, ' ');
        }
        out += "\n";
    };

    std::string out;
    emit(header, out);
    std::size_t total = 0;
    for (std::size_t c = 0; c < 6; ++c) total += width[c] + (c + 1 < 6 ? 2 : 0);
    out += std::string(total, '-') + "\n";
    for (const auto& row : cells) emit(row, out);
    return out;
}

} // namespace rdyn
