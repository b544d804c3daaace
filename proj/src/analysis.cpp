#include "rdyn/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace rdyn {

namespace {

void sort_spectrum(std::vector<std::complex<double>>& ev) {
    std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
        const double ma = std::abs(a), mb = std::abs(b);
        if (ma != mb) return ma > mb;
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
}

std::vector<std::complex<double>> eigenvalues_2x2(const Eigen::MatrixXd& m) {
    const double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
    if (b == 0.0 || c == 0.0) return {{a, 0.0}, {d, 0.0}};  // triangular: exact

    const double tr = a + d;
    const double det = a * d - b * c;
    const double disc = tr * tr - 4.0 * det;
    if (disc < 0.0) {
        const double re = 0.5 * tr;
        const double im = 0.5 * std::sqrt(-disc);
        return {{re, im}, {re, -im}};
    }
    // Numerically stable real roots: compute the larger-magnitude root
    // first, then recover the other from the product of roots.
    const double s = std::sqrt(disc);
    const double q = 0.5 * (tr + (tr >= 0.0 ? s : -s));
    if (q == 0.0) return {{0.0, 0.0}, {0.0, 0.0}};
    return {{q, 0.0}, {det / q, 0.0}};
}

} // namespace

Spectrum eigenvalues(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw DimensionError("eigenvalues need a non-empty square matrix");

    Spectrum spectrum;
    const Eigen::Index n = m.rows();
    if (n == 1) {
        spectrum.eigenvalues = {{m(0, 0), 0.0}};
    } else if (n == 2) {
        spectrum.eigenvalues = eigenvalues_2x2(m);
    } else {
        Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
        if (solver.info() != Eigen::Success)
            throw NumericalError("eigenvalue iteration failed to converge");
        spectrum.eigenvalues.reserve(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i)
            spectrum.eigenvalues.push_back(solver.eigenvalues()[i]);
    }

    sort_spectrum(spectrum.eigenvalues);
    spectrum.spectral_radius = std::abs(spectrum.eigenvalues.front());
    return spectrum;
}

double spectral_radius(const Eigen::MatrixXd& m) {
    return eigenvalues(m).spectral_radius;
}

double induced_inf_norm(const Eigen::MatrixXd& m) {
    return m.cwiseAbs().rowwise().sum().maxCoeff();
}

double induced_two_norm(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

// ---------------------------------------------------------------------------
// Fixed points
// ---------------------------------------------------------------------------

namespace {

double residual_norm(const RegimeOperator& op, const Eigen::VectorXd& x) {
    return (apply(op, x) - x).cwiseAbs().maxCoeff();
}

FixedPointResult newton_fixed_point(const RegimeOperator& op,
                                    const Eigen::VectorXd& x_init, double tol,
                                    int max_iter) {
    const Eigen::Index n = op.dimension();
    Eigen::VectorXd x = x_init;
    Eigen::VectorXd g = apply(op, x) - x;
    double gn = g.cwiseAbs().maxCoeff();

    for (int iter = 0; iter < max_iter; ++iter) {
        if (gn <= tol) return {x, gn, true, iter, std::nullopt};

        Eigen::MatrixXd j = jacobian(op, x) - Eigen::MatrixXd::Identity(n, n);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(j);
        if (!lu.isInvertible()) {
            if (op.holds<AffineOp>())
                throw NoUniqueFixedPoint(
                    "affine map has singular I - A: no isolated fixed point");
            return {x, gn, false, iter, std::nullopt};
        }
        const Eigen::VectorXd direction = lu.solve(-g);

        // Damped update: halve the step until the residual decreases.
        double scale = 1.0;
        bool accepted = false;
        for (int halving = 0; halving <= 30 && !accepted; ++halving) {
            const Eigen::VectorXd candidate = x + scale * direction;
            try {
                const Eigen::VectorXd g_candidate = apply(op, candidate) - candidate;
                const double gn_candidate = g_candidate.cwiseAbs().maxCoeff();
                if (std::isfinite(gn_candidate) && gn_candidate < gn) {
                    x = candidate;
                    g = g_candidate;
                    gn = gn_candidate;
                    accepted = true;
                }
            } catch (const NumericalError&) {
                // Stepped outside the domain; shorten and retry.
            }
            scale *= 0.5;
        }
        if (!accepted) return {x, gn, false, iter + 1, std::nullopt};
    }
    return {x, gn, gn <= tol, max_iter, std::nullopt};
}

} // namespace

FixedPointResult fixed_point(const RegimeOperator& op, const Eigen::VectorXd& x_init,
                             double tol, int max_iter) {
    if (x_init.size() != op.dimension())
        throw DimensionError("fixed-point initial guess has the wrong dimension");

    if (op.holds<AffineOp>()) {
        const auto& affine = op.get<AffineOp>();
        const Eigen::Index n = affine.matrix.rows();
        const Eigen::MatrixXd i_minus_a =
            Eigen::MatrixXd::Identity(n, n) - affine.matrix;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(i_minus_a);
        if (lu.isInvertible()) {
            Eigen::VectorXd x = lu.solve(affine.offset);
            const double r = residual_norm(op, x);
            return {std::move(x), r, r <= tol, 0, std::nullopt};
        }
        // Singular I - A: the residual either already vanishes at x_init
        // (a continuum of fixed points passes through it) or Newton below
        // rediscovers the singularity and reports NoUniqueFixedPoint.
    }
    return newton_fixed_point(op, x_init, tol, max_iter);
}

FixedPointResult fixed_point(const RegimeOperator& op, double tol, int max_iter) {
    return fixed_point(op, Eigen::VectorXd::Zero(op.dimension()), tol, max_iter);
}

FixedPointResult common_fixed_point(const RegimeSystem& system,
                                    const Eigen::VectorXd& x_init, double tol,
                                    int max_iter) {
    FixedPointResult result = fixed_point(system.op(RegimeId{0}), x_init, tol, max_iter);

    double worst = -1.0;
    RegimeId worst_regime{0};
    for (std::size_t s = 0; s < system.regime_count(); ++s) {
        const double r = residual_norm(system.op(RegimeId{s}), result.point);
        if (r > worst) {
            worst = r;
            worst_regime = RegimeId{s};
        }
    }
    result.residual = worst;
    result.converged = result.converged && worst <= tol;
    result.worst_regime = worst_regime;
    return result;
}

FixedPointResult common_fixed_point(const RegimeSystem& system, double tol,
                                    int max_iter) {
    return common_fixed_point(system, Eigen::VectorXd::Zero(system.dimension()), tol,
                              max_iter);
}

// ---------------------------------------------------------------------------
// Linearization
// ---------------------------------------------------------------------------

LocalLinearization linearize(const RegimeSystem& system, const Eigen::VectorXd& x_star) {
    if (x_star.size() != system.dimension())
        throw DimensionError("linearization point has the wrong dimension");

    LocalLinearization lin;
    lin.point = x_star;
    lin.matrices.reserve(system.regime_count());
    lin.spectra.reserve(system.regime_count());
    lin.nonsmooth.reserve(system.regime_count());
    for (std::size_t s = 0; s < system.regime_count(); ++s) {
        JacobianResult jac = jacobian_info(system.op(RegimeId{s}), x_star);
        lin.spectra.push_back(eigenvalues(jac.matrix));
        lin.matrices.push_back(std::move(jac.matrix));
        lin.nonsmooth.push_back(jac.nonsmooth_warning);
    }
    return lin;
}

Eigen::MatrixXd word_product(const LocalLinearization& lin, const Word& word) {
    if (word.empty()) throw EmptyWordError("word product needs a non-empty word");
    const Eigen::Index n = lin.point.size();
    Eigen::MatrixXd product = Eigen::MatrixXd::Identity(n, n);
    for (const RegimeId id : word) {
        if (id.index >= lin.matrices.size())
            throw IndexError("regime index " + std::to_string(id.index) +
                             " out of range in word product");
        product = lin.matrices[id.index] * product;
    }
    return product;
}

double growth_factor(const LocalLinearization& lin, const Word& word) {
    const Eigen::MatrixXd product = word_product(lin, word);
    return std::pow(spectral_radius(product), 1.0 / static_cast<double>(word.size()));
}

} // namespace rdyn
