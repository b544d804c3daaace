#pragma once

#include <Eigen/Core>

#include <complex>
#include <optional>
#include <vector>

#include "rdyn/system.hpp"

namespace rdyn {

/// Eigenvalues of a real square matrix, sorted by descending modulus
/// (ties: descending real part, then descending imaginary part), together
/// with the spectral radius.  Complex eigenvalues of real matrices occur
/// in conjugate pairs.
struct Spectrum {
    std::vector<std::complex<double>> eigenvalues;
    double spectral_radius = 0.0;
};

/// Eigenvalues of @p m.  Dimensions 1 and 2 use the closed-form
/// characteristic polynomial (trace / determinant); larger matrices go
/// through a dense Schur-based eigensolver.
Spectrum eigenvalues(const Eigen::MatrixXd& m);

/// Largest eigenvalue modulus of @p m.
double spectral_radius(const Eigen::MatrixXd& m);

/// Induced infinity norm: maximum absolute row sum.
double induced_inf_norm(const Eigen::MatrixXd& m);

/// Induced 2-norm: largest singular value.
double induced_two_norm(const Eigen::MatrixXd& m);

/// Outcome of a fixed-point search.
struct FixedPointResult {
    Eigen::VectorXd point;
    double residual = 0.0;  ///< max-norm of F(x*) - x* (worst regime in common mode)
    bool converged = false;
    int iterations = 0;
    /// Regime with the largest residual; set by common_fixed_point only.
    std::optional<RegimeId> worst_regime;
};

/// Find x* with F(x*) = x*.
///
/// Affine operators with nonsingular I - A are solved in closed form as
/// (I - A)^{-1} c.  Everything else runs damped Newton on G(x) = F(x) - x
/// from @p x_init: full steps first, halving up to 30 times per iteration
/// until the residual decreases.  Hitting @p max_iter returns a result
/// with converged == false rather than throwing.
///
/// @throws NoUniqueFixedPoint  affine map whose I - A is singular while the
///                             residual at x_init is above @p tol (either no
///                             fixed point exists or a whole affine subspace
///                             of them does).
FixedPointResult fixed_point(const RegimeOperator& op, const Eigen::VectorXd& x_init,
                             double tol = 1e-10, int max_iter = 100);

/// fixed_point() starting from the origin.
FixedPointResult fixed_point(const RegimeOperator& op, double tol = 1e-10,
                             int max_iter = 100);

/// Solve for a fixed point of regime 0's operator, then verify it under
/// every regime.  The returned residual is the maximum over regimes, and
/// worst_regime names the offender; converged is true only when every
/// regime reproduces the point within @p tol.
FixedPointResult common_fixed_point(const RegimeSystem& system,
                                    const Eigen::VectorXd& x_init, double tol = 1e-10,
                                    int max_iter = 100);

/// common_fixed_point() starting from the origin.
FixedPointResult common_fixed_point(const RegimeSystem& system, double tol = 1e-10,
                                    int max_iter = 100);

/// Per-regime Jacobians at a shared point, with their spectra.
struct LocalLinearization {
    Eigen::VectorXd point;
    std::vector<Eigen::MatrixXd> matrices;  ///< matrices[s] = DF_s(point)
    std::vector<Spectrum> spectra;          ///< spectra[s] of matrices[s]
    std::vector<bool> nonsmooth;            ///< finite differences crossed a kink
};

/// Jacobian of every regime at @p x_star (normally a common fixed point).
LocalLinearization linearize(const RegimeSystem& system, const Eigen::VectorXd& x_star);

/// Ordered product A_{s_k} ... A_{s_1} for a word applied s_1 first.
///
/// @throws EmptyWordError  empty word.
/// @throws IndexError      regime index out of range.
Eigen::MatrixXd word_product(const LocalLinearization& lin, const Word& word);

/// Per-step growth factor rho(word_product(word))^(1/|word|).
double growth_factor(const LocalLinearization& lin, const Word& word);

} // namespace rdyn
