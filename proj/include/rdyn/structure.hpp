#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rdyn/system.hpp"

namespace rdyn {

/// Where structural diagnostics evaluate the operators: a deterministic
/// grid over a box plus seeded uniform points inside it.  The defaults
/// cover [-2, 4]^n with an 11-point grid per dimension and 1000 random
/// points.  To keep the grid finite in higher dimensions the per-dimension
/// count is reduced until the total grid stays below 200000 points.
struct SamplingPlan {
    Eigen::VectorXd box_lo;   ///< empty: -2 in every coordinate
    Eigen::VectorXd box_hi;   ///< empty: +4 in every coordinate
    int grid_points = 11;     ///< per dimension
    int random_points = 1000;
    std::uint64_t seed = 1;

    /// Materialise the sample list for the given state dimension.
    /// @throws DimensionError  box bounds of the wrong length or with
    ///                         box_lo > box_hi in some coordinate.
    std::vector<Eigen::VectorXd> samples(int dimension) const;
};

/// ||AB - BA|| in the induced infinity norm.
/// @throws DimensionError  non-square or mismatched shapes.
double matrix_commutator_norm(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Result of sampling F_a(F_b(x)) against F_b(F_a(x)).
struct CommutationReport {
    RegimeId a{0};
    RegimeId b{1};
    double max_discrepancy = 0.0;
    /// Sample of maximal discrepancy, present only when the pair fails to
    /// commute there (discrepancy above the scale-relative tolerance).
    std::optional<Eigen::VectorXd> witness;
    /// True when every sampled discrepancy stayed within tolerance.  This
    /// is sample-limited evidence, never a proof of commutation.
    bool commute = true;
    long samples_tested = 0;
    std::string note;
};

/// Compare both application orders of two operators over the sampler's
/// points.  A discrepancy counts as a witness when it exceeds
/// tol * (1 + ||F_a(F_b(x))||_inf), i.e. relative to output scale.
/// Samples where either operator fails to evaluate are skipped.
///
/// @throws SamplingError   every sample failed to evaluate.
/// @throws DimensionError  operators of different dimensions.
CommutationReport commutation_witness(const RegimeOperator& op_a,
                                      const RegimeOperator& op_b,
                                      const SamplingPlan& sampler = {},
                                      double tol = 1e-9);

/// Same, for a labelled pair of a system's regimes.
CommutationReport commutation_witness(const RegimeSystem& system, RegimeId a,
                                      RegimeId b, const SamplingPlan& sampler = {},
                                      double tol = 1e-9);

enum class Representability { RuledOut, NotRuledOut };

std::string to_string(Representability status);

/// Can one switching-free map reproduce every admissible trajectory?
struct RepresentabilityVerdict {
    Representability status = Representability::NotRuledOut;
    std::string reason;
    std::vector<CommutationReport> evidence;
};

/// Run commutation_witness on every regime pair.  Any witness rules an
/// invariant-law representation out (a single map's iterates commute, the
/// sampled operators demonstrably do not).  Finding no witness proves
/// nothing — commutation is necessary, not sufficient — and the verdict
/// text says so.
RepresentabilityVerdict invariant_law_verdict(const RegimeSystem& system,
                                              const SamplingPlan& sampler = {},
                                              double tol = 1e-9);

/// A regime pair that demonstrably differs, with a point showing it.
struct DistinctPair {
    RegimeId a{0};
    RegimeId b{0};
    double max_difference = 0.0;
    Eigen::VectorXd witness;
};

struct IrreducibilityReport {
    std::vector<DistinctPair> distinct_pairs;
    /// True iff all operators coincided on every sample: only then could
    /// the family collapse to a single map.
    bool reducible_candidate = true;
};

/// Pairwise max pointwise difference of the regime maps over the sampler's
/// points; pairs differing by more than @p tol are listed with a witness.
IrreducibilityReport irreducibility_check(const RegimeSystem& system,
                                          const SamplingPlan& sampler = {},
                                          double tol = 1e-9);

/// The definitional topology summary: the admissible regime set
/// contributes one connected component per regime, so a system with two or
/// more regimes cannot be conjugate to any single-map configuration.
struct TopologyReport {
    std::size_t regime_count = 0;
    std::size_t component_count = 0;
    bool conjugate_to_invariant_law = false;
};

TopologyReport topology_report(const RegimeSystem& system);

} // namespace rdyn
