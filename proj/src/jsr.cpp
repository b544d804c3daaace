#include "rdyn/jsr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace rdyn {

namespace {

void validate_family(const std::vector<Eigen::MatrixXd>& family, int depth) {
    if (family.empty())
        throw DimensionError("joint spectral radius needs a non-empty matrix family");
    if (depth < 1)
        throw DimensionError("joint spectral radius depth must be at least 1");
    const Eigen::Index n = family.front().rows();
    for (const auto& m : family) {
        if (m.rows() != m.cols() || m.rows() != n)
            throw DimensionError("matrix family members must all be n x n");
        if (!m.allFinite())
            throw NumericalError("matrix family has non-finite entries");
    }
}

/// Product matrix held as m * exp(log_scale) so that long words can never
/// overflow or underflow; m is renormalized whenever its norm leaves a wide
/// safe window.
struct ScaledMatrix {
    Eigen::MatrixXd m;
    double log_scale = 0.0;

    static ScaledMatrix extend(const Eigen::MatrixXd& factor, const ScaledMatrix& tail) {
        ScaledMatrix out{factor * tail.m, tail.log_scale};
        const double nrm = induced_inf_norm(out.m);
        if (nrm > 0.0 && (nrm > 1e100 || nrm < 1e-100)) {
            out.m /= nrm;
            out.log_scale += std::log(nrm);
        }
        return out;
    }
};

/// Per-step growth (value * exp(log_scale))^(1/len) for value >= 0.
double per_step_growth(double value, double log_scale, int len) {
    if (value == 0.0) return 0.0;
    if (log_scale == 0.0) return std::pow(value, 1.0 / static_cast<double>(len));
    return std::exp((std::log(value) + log_scale) / static_cast<double>(len));
}

/// Deterministic candidate ordering for the lower-bound witness: larger
/// value wins; exact ties go to the shorter word, then to the
/// lexicographically smaller one.  Independent of enumeration order.
bool better_witness(double g, const Word& w, double best_g, const Word& best_w) {
    if (g != best_g) return g > best_g;
    if (w.size() != best_w.size()) return w.size() < best_w.size();
    return std::lexicographical_compare(
        w.begin(), w.end(), best_w.begin(), best_w.end(),
        [](RegimeId a, RegimeId b) { return a.index < b.index; });
}

} // namespace

std::string to_string(MatrixNorm norm) {
    return norm == MatrixNorm::InducedInf ? "induced-inf" : "induced-2";
}

double matrix_norm(const Eigen::MatrixXd& m, MatrixNorm norm) {
    return norm == MatrixNorm::InducedInf ? induced_inf_norm(m) : induced_two_norm(m);
}

std::string to_string(StabilityStatus status) {
    switch (status) {
        case StabilityStatus::StableCertified: return "stable-certified";
        case StabilityStatus::UnstableCertified: return "unstable-certified";
        case StabilityStatus::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

// ---------------------------------------------------------------------------
// Exhaustive bounds
// ---------------------------------------------------------------------------

std::pair<double, Word> jsr_lower(const std::vector<Eigen::MatrixXd>& family,
                                  int depth) {
    validate_family(family, depth);

    double best = -1.0;
    Word best_word;
    Word word;
    word.reserve(static_cast<std::size_t>(depth));

    // Depth-first sweep over every word of length <= depth; the explicit
    // tie-break makes the result independent of visit order.
    auto dfs = [&](auto&& self, const ScaledMatrix& tail, int len) -> void {
        for (std::size_t s = 0; s < family.size(); ++s) {
            const ScaledMatrix product =
                len == 0 ? ScaledMatrix{family[s], 0.0}
                         : ScaledMatrix::extend(family[s], tail);
            word.push_back(RegimeId{s});
            const double g =
                per_step_growth(spectral_radius(product.m), product.log_scale, len + 1);
            if (better_witness(g, word, best, best_word)) {
                best = g;
                best_word = word;
            }
            if (len + 1 < depth) self(self, product, len + 1);
            word.pop_back();
        }
    };
    dfs(dfs, ScaledMatrix{}, 0);
    return {best, best_word};
}

double jsr_upper(const std::vector<Eigen::MatrixXd>& family, int depth,
                 MatrixNorm norm) {
    validate_family(family, depth);

    std::vector<double> level_max(static_cast<std::size_t>(depth) + 1, -1.0);
    auto dfs = [&](auto&& self, const ScaledMatrix& tail, int len) -> void {
        for (std::size_t s = 0; s < family.size(); ++s) {
            const ScaledMatrix product =
                len == 0 ? ScaledMatrix{family[s], 0.0}
                         : ScaledMatrix::extend(family[s], tail);
            const double g =
                per_step_growth(matrix_norm(product.m, norm), product.log_scale, len + 1);
            level_max[static_cast<std::size_t>(len) + 1] =
                std::max(level_max[static_cast<std::size_t>(len) + 1], g);
            if (len + 1 < depth) self(self, product, len + 1);
        }
    };
    dfs(dfs, ScaledMatrix{}, 0);

    double result = std::numeric_limits<double>::infinity();
    for (int l = 1; l <= depth; ++l)
        result = std::min(result, level_max[static_cast<std::size_t>(l)]);
    return result;
}

// ---------------------------------------------------------------------------
// Branch and bound
// ---------------------------------------------------------------------------

JsrBounds jsr_bounds(const std::vector<Eigen::MatrixXd>& family, double target_gap,
                     int max_depth, std::uint64_t budget, MatrixNorm norm) {
    validate_family(family, std::max(max_depth, 1));
    if (!(target_gap > 0.0))
        throw std::invalid_argument("jsr_bounds needs target_gap > 0");

    JsrBounds out;
    out.norm = norm;

    if (family.size() == 1) {
        // Gelfand's formula: the JSR of a single matrix is its spectral
        // radius, so the bracket is exact without any enumeration.
        const double rho = spectral_radius(family.front());
        out.lower = out.upper = rho;
        out.depth = 1;
        out.witness = {RegimeId{0}};
        out.products_evaluated = 1;
        return out;
    }

    struct Node {
        Word word;
        ScaledMatrix product;
        double prefix_min;  // min over prefixes of ||Pi||^(1/len): the
                            // upper-bound candidate this branch can still reach
    };

    double lower = -1.0;
    Word witness;
    double upper = std::numeric_limits<double>::infinity();
    std::uint64_t products = 0;
    int deepest = 0;
    // Level 1 always completes so the returned upper bound is finite.
    const std::uint64_t effective_budget =
        std::max<std::uint64_t>(budget, family.size());

    std::vector<Node> frontier;
    bool out_of_budget = false;

    for (int len = 1; len <= max_depth && !out_of_budget; ++len) {
        std::vector<Node> survivors;
        double frontier_candidate = -1.0;
        bool level_complete = true;

        const auto process = [&](Word&& w, ScaledMatrix&& p, double parent_prefix_min) {
            ++products;
            deepest = std::max(deepest, len);
            const double rho_growth =
                per_step_growth(spectral_radius(p.m), p.log_scale, len);
            if (better_witness(rho_growth, w, lower, witness)) {
                lower = rho_growth;
                witness = w;
            }
            const double norm_growth =
                per_step_growth(matrix_norm(p.m, norm), p.log_scale, len);
            if (norm_growth <= lower) return;  // extensions cannot raise the
                                               // upper-bound candidate past lower
            const double prefix_min = std::min(parent_prefix_min, norm_growth);
            frontier_candidate = std::max(frontier_candidate, prefix_min);
            survivors.push_back({std::move(w), std::move(p), prefix_min});
        };

        if (len == 1) {
            for (std::size_t s = 0; s < family.size() && level_complete; ++s) {
                if (products >= effective_budget) {
                    level_complete = false;
                    break;
                }
                process(Word{RegimeId{s}}, ScaledMatrix{family[s], 0.0},
                        std::numeric_limits<double>::infinity());
            }
        } else {
            for (const Node& node : frontier) {
                for (std::size_t s = 0; s < family.size(); ++s) {
                    if (products >= effective_budget) {
                        level_complete = false;
                        break;
                    }
                    Word w = node.word;
                    w.push_back(RegimeId{s});
                    process(std::move(w), ScaledMatrix::extend(family[s], node.product),
                            node.prefix_min);
                }
                if (!level_complete) break;
            }
        }

        if (!level_complete) {
            // Partial levels still sharpen the lower bound, but only a fully
            // enumerated level yields a valid upper bound.
            out_of_budget = true;
            break;
        }

        const double level_upper =
            frontier_candidate < 0.0 ? lower : std::max(lower, frontier_candidate);
        upper = std::min(upper, level_upper);
        frontier = std::move(survivors);

        if (upper - lower <= target_gap) break;
        if (frontier.empty()) break;  // every branch pruned: bracket is exact
    }

    out.lower = lower;
    out.upper = upper;
    out.depth = deepest;
    out.witness = std::move(witness);
    out.products_evaluated = products;
    return out;
}

StabilityVerdict stability_verdict(const JsrBounds& bounds) {
    StabilityVerdict verdict;
    verdict.bounds = bounds;
    if (bounds.upper < 1.0) {
        verdict.status = StabilityStatus::StableCertified;
        verdict.margin = 1.0 - bounds.upper;
    } else if (bounds.lower > 1.0) {
        verdict.status = StabilityStatus::UnstableCertified;
        verdict.margin = bounds.lower - 1.0;
    } else {
        verdict.status = StabilityStatus::Inconclusive;
        verdict.margin = std::min(std::abs(1.0 - bounds.lower),
                                  std::abs(bounds.upper - 1.0));
    }
    return verdict;
}

// ---------------------------------------------------------------------------
// Envelope fit
// ---------------------------------------------------------------------------

EnvelopeFit exponential_envelope_fit(const Trajectory& trajectory,
                                     const Eigen::VectorXd& x_star) {
    std::vector<std::pair<double, double>> samples;  // (t, log deviation)
    samples.reserve(trajectory.states.size());
    for (std::size_t t = 0; t < trajectory.states.size(); ++t) {
        if (trajectory.states[t].size() != x_star.size())
            throw DimensionError("envelope fit: state and x* dimensions differ");
        const double d = (trajectory.states[t] - x_star).cwiseAbs().maxCoeff();
        if (d > 0.0) samples.emplace_back(static_cast<double>(t), std::log(d));
    }
    if (samples.size() < 2) return {0.0, 0.0};

    double mean_t = 0.0, mean_y = 0.0;
    for (const auto& [t, y] : samples) {
        mean_t += t;
        mean_y += y;
    }
    mean_t /= static_cast<double>(samples.size());
    mean_y /= static_cast<double>(samples.size());

    double cov = 0.0, var = 0.0;
    for (const auto& [t, y] : samples) {
        cov += (t - mean_t) * (y - mean_y);
        var += (t - mean_t) * (t - mean_t);
    }
    if (var == 0.0) return {0.0, 0.0};

    const double slope = cov / var;
    const double intercept = mean_y - slope * mean_t;
    return {std::exp(intercept), std::exp(slope)};
}

} // namespace rdyn
