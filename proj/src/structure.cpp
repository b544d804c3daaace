#include "rdyn/structure.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

#include "rdyn/analysis.hpp"
#include "rdyn/errors.hpp"
#include "rdyn/operators.hpp"
#include "rdyn/rng.hpp"

namespace rdyn {

namespace {

constexpr long kGridCap = 200000;

Eigen::VectorXd resolve_bound(const Eigen::VectorXd& given, int dimension,
                              double fallback, const char* which) {
    if (given.size() == 0) {
        return Eigen::VectorXd::Constant(dimension, fallback);
    }
    if (given.size() != dimension) {
        throw DimensionError("sampling box " + std::string(which) + " has length " +
                             std::to_string(given.size()) + ", expected " +
                             std::to_string(dimension));
    }
    return given;
}

std::string pair_label(const RegimeSystem& system, RegimeId a, RegimeId b) {
    return "(" + system.label(a) + ", " + system.label(b) + ")";
}

} // namespace

std::vector<Eigen::VectorXd> SamplingPlan::samples(int dimension) const {
    if (dimension < 1) {
        throw DimensionError("sampling requires dimension >= 1, got " +
                             std::to_string(dimension));
    }
    const Eigen::VectorXd lo = resolve_bound(box_lo, dimension, -2.0, "lower bound");
    const Eigen::VectorXd hi = resolve_bound(box_hi, dimension, 4.0, "upper bound");
    for (int i = 0; i < dimension; ++i) {
        if (!(lo[i] <= hi[i])) {
            throw DimensionError("sampling box is empty in coordinate " +
                                 std::to_string(i));
        }
    }

    // Shrink the per-dimension grid count until the full grid fits the cap.
    int per_dim = grid_points;
    if (per_dim > 0) {
        auto total = [dimension](int k) {
            double t = 1.0;
            for (int i = 0; i < dimension; ++i) {
                t *= k;
                if (t > 2.0 * kGridCap) return t;
            }
            return t;
        };
        while (per_dim > 2 && total(per_dim) > kGridCap) --per_dim;
    }

    std::vector<Eigen::VectorXd> points;
    if (per_dim > 0) {
        long count = 1;
        for (int i = 0; i < dimension; ++i) count *= per_dim;
        points.reserve(static_cast<std::size_t>(count) +
                       static_cast<std::size_t>(std::max(random_points, 0)));
        std::vector<int> index(dimension, 0);
        for (long n = 0; n < count; ++n) {
            Eigen::VectorXd x(dimension);
            for (int i = 0; i < dimension; ++i) {
                x[i] = per_dim == 1
                           ? 0.5 * (lo[i] + hi[i])
                           : lo[i] + (hi[i] - lo[i]) * index[i] / (per_dim - 1);
            }
            points.push_back(std::move(x));
            for (int i = dimension - 1; i >= 0; --i) {
                if (++index[i] < per_dim) break;
                index[i] = 0;
            }
        }
    }

    Xoshiro256pp rng(seed);
    for (int n = 0; n < random_points; ++n) {
        Eigen::VectorXd x(dimension);
        for (int i = 0; i < dimension; ++i) {
            x[i] = rng.uniform(lo[i], hi[i]);
        }
        points.push_back(std::move(x));
    }
    return points;
}

double matrix_commutator_norm(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
        throw DimensionError("commutator requires square matrices of equal size, got " +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                             " and " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()));
    }
    return induced_inf_norm(a * b - b * a);
}

namespace {

CommutationReport compare_orders(const RegimeOperator& op_a, const RegimeOperator& op_b,
                                 const SamplingPlan& sampler, double tol,
                                 RegimeId id_a, RegimeId id_b) {
    if (op_a.dimension() != op_b.dimension()) {
        throw DimensionError("commutation check needs operators of equal dimension, got " +
                             std::to_string(op_a.dimension()) + " and " +
                             std::to_string(op_b.dimension()));
    }

    CommutationReport report;
    report.a = id_a;
    report.b = id_b;

    double best_scale = 0.0;
    Eigen::VectorXd best_point;
    for (const Eigen::VectorXd& x : sampler.samples(op_a.dimension())) {
        Eigen::VectorXd ab, ba;
        try {
            ab = apply(op_a, apply(op_b, x));
            ba = apply(op_b, apply(op_a, x));
        } catch (const NumericalError&) {
            continue; // point outside some operator's domain
        }
        ++report.samples_tested;
        const double d = (ab - ba).lpNorm<Eigen::Infinity>();
        if (d > report.max_discrepancy || report.samples_tested == 1) {
            report.max_discrepancy = d;
            best_scale = ab.lpNorm<Eigen::Infinity>();
            best_point = x;
        }
    }
    if (report.samples_tested == 0) {
        throw SamplingError("every sample point failed to evaluate; "
                            "choose a box inside both operators' domains");
    }

    report.commute = report.max_discrepancy <= tol * (1.0 + best_scale);
    if (report.commute) {
        report.note = "no discrepancy above tolerance across " +
                      std::to_string(report.samples_tested) +
                      " samples; finite sampling cannot prove commutation";
    } else {
        report.witness = std::move(best_point);
        report.note = "application order changes the outcome at the witness point";
    }
    return report;
}

} // namespace

CommutationReport commutation_witness(const RegimeOperator& op_a,
                                      const RegimeOperator& op_b,
                                      const SamplingPlan& sampler, double tol) {
    return compare_orders(op_a, op_b, sampler, tol, RegimeId{0}, RegimeId{1});
}

CommutationReport commutation_witness(const RegimeSystem& system, RegimeId a,
                                      RegimeId b, const SamplingPlan& sampler,
                                      double tol) {
    return compare_orders(system.op(a), system.op(b), sampler, tol, a, b);
}

std::string to_string(Representability status) {
    return status == Representability::RuledOut ? "ruled-out" : "not-ruled-out";
}

RepresentabilityVerdict invariant_law_verdict(const RegimeSystem& system,
                                              const SamplingPlan& sampler,
                                              double tol) {
    RepresentabilityVerdict verdict;
    if (system.regime_count() < 2) {
        verdict.status = Representability::NotRuledOut;
        verdict.reason = "a single regime is trivially represented by its own map";
        return verdict;
    }

    std::string culprit;
    for (std::size_t i = 0; i + 1 < system.regime_count(); ++i) {
        for (std::size_t j = i + 1; j < system.regime_count(); ++j) {
            CommutationReport report =
                commutation_witness(system, RegimeId{i}, RegimeId{j}, sampler, tol);
            if (!report.commute && culprit.empty()) {
                culprit = pair_label(system, report.a, report.b);
            }
            verdict.evidence.push_back(std::move(report));
        }
    }

    if (!culprit.empty()) {
        verdict.status = Representability::RuledOut;
        verdict.reason = "regime pair " + culprit +
                         " does not commute at the witness point, so no single "
                         "time-invariant map can reproduce every admissible "
                         "trajectory: its iterates would have to commute";
    } else {
        verdict.status = Representability::NotRuledOut;
        verdict.reason = "no commutation failure found on the sampled box; this is "
                         "not a proof of representability, since commutation is "
                         "necessary but not sufficient and sampling is finite";
    }
    return verdict;
}

IrreducibilityReport irreducibility_check(const RegimeSystem& system,
                                          const SamplingPlan& sampler, double tol) {
    IrreducibilityReport report;
    if (system.regime_count() < 2) {
        report.reducible_candidate = true;
        return report;
    }

    const std::vector<Eigen::VectorXd> points = sampler.samples(system.dimension());
    for (std::size_t i = 0; i + 1 < system.regime_count(); ++i) {
        for (std::size_t j = i + 1; j < system.regime_count(); ++j) {
            DistinctPair pair;
            pair.a = RegimeId{i};
            pair.b = RegimeId{j};
            bool any = false;
            for (const Eigen::VectorXd& x : points) {
                Eigen::VectorXd ya, yb;
                try {
                    ya = apply(system.op(pair.a), x);
                    yb = apply(system.op(pair.b), x);
                } catch (const NumericalError&) {
                    continue;
                }
                const double d = (ya - yb).lpNorm<Eigen::Infinity>();
                if (!any || d > pair.max_difference) {
                    pair.max_difference = d;
                    pair.witness = x;
                    any = true;
                }
            }
            if (any && pair.max_difference > tol) {
                report.distinct_pairs.push_back(std::move(pair));
            }
        }
    }
    report.reducible_candidate = report.distinct_pairs.empty();
    return report;
}

TopologyReport topology_report(const RegimeSystem& system) {
    TopologyReport report;
    report.regime_count = system.regime_count();
    report.component_count = system.regime_count();
    report.conjugate_to_invariant_law = system.regime_count() < 2;
    return report;
}

} // namespace rdyn
