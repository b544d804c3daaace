#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rdyn/analysis.hpp"
#include "rdyn/system.hpp"

namespace rdyn {

/// Sub-multiplicative matrix norm used for upper bounds.
enum class MatrixNorm {
    InducedInf,  ///< maximum absolute row sum (default)
    InducedTwo,  ///< largest singular value
};

std::string to_string(MatrixNorm norm);
double matrix_norm(const Eigen::MatrixXd& m, MatrixNorm norm);

/// Certified bracket around the joint spectral radius of a matrix family.
struct JsrBounds {
    double lower = 0.0;           ///< max over evaluated words of rho(Pi_w)^(1/|w|)
    double upper = 0.0;           ///< min over evaluated depths of the norm bound
    int depth = 0;                ///< deepest word length examined
    MatrixNorm norm = MatrixNorm::InducedInf;
    Word witness;                 ///< word attaining the lower bound
    std::uint64_t products_evaluated = 0;
};

enum class StabilityStatus { StableCertified, UnstableCertified, Inconclusive };

std::string to_string(StabilityStatus status);

/// Stability classification under arbitrary switching: the linearized
/// family is uniformly exponentially stable when its JSR is below 1.
struct StabilityVerdict {
    StabilityStatus status = StabilityStatus::Inconclusive;
    JsrBounds bounds;
    double margin = 0.0;  ///< distance of the certifying bound from 1
};

/// Exhaustive lower bound: max over all non-empty words w with |w| <= L of
/// rho(Pi_w)^(1/|w|), a valid lower bound on the JSR at every L.  Ties are
/// broken by shortest word, then lexicographically smallest regime indices.
/// Long products are scaled internally, so no overflow occurs even for
/// families whose norms are far from 1.
///
/// @throws DimensionError  empty family, non-square or mismatched matrices,
///                         or L < 1.
std::pair<double, Word> jsr_lower(const std::vector<Eigen::MatrixXd>& family, int depth);

/// Exhaustive upper bound (Gelfand truncation): for each depth l <= L the
/// value max over |w| = l of ||Pi_w||^(1/l) bounds the JSR from above; the
/// result is the minimum over all evaluated depths.
double jsr_upper(const std::vector<Eigen::MatrixXd>& family, int depth,
                 MatrixNorm norm = MatrixNorm::InducedInf);

/// Branch-and-bound bracket: iterative deepening to @p max_depth, keeping
/// for every surviving word the minimum norm average over its prefixes as
/// the upper-bound candidate.  A prefix w is not extended once
/// ||Pi_w||^(1/|w|) <= current lower bound — no extension of it can raise
/// the upper-bound candidate above that — so the pruned search returns the
/// same bounds as full enumeration at equal depth, only faster.  Stops when
/// upper - lower <= @p target_gap, the depth exceeds @p max_depth, or more
/// than @p budget words have been examined (returning the best bracket so
/// far, never throwing).
///
/// A single-matrix family collapses immediately: by Gelfand's formula its
/// JSR equals rho(A), so the bracket is exact at depth 1.
JsrBounds jsr_bounds(const std::vector<Eigen::MatrixXd>& family,
                     double target_gap = 0.05, int max_depth = 16,
                     std::uint64_t budget = 1'000'000,
                     MatrixNorm norm = MatrixNorm::InducedInf);

/// Classify @p bounds: StableCertified when upper < 1 (margin 1 - upper),
/// UnstableCertified when lower > 1 (margin lower - 1), else Inconclusive
/// (margin = smaller distance of the bracket ends from 1).
StabilityVerdict stability_verdict(const JsrBounds& bounds);

/// Least-squares fit of log||x_t - x*|| against t: deviations below the
/// envelope amplitude * rate^t.  Diagnostic only — the fitted pair is not a
/// certified envelope.  Zero deviations are skipped; when fewer than two
/// nonzero samples remain the result is (0, 0).
struct EnvelopeFit {
    double amplitude = 0.0;  ///< M in M * alpha^t
    double rate = 0.0;       ///< alpha in M * alpha^t
};

EnvelopeFit exponential_envelope_fit(const Trajectory& trajectory,
                                     const Eigen::VectorXd& x_star);

} // namespace rdyn
