#include <doctest.h>

#include <Eigen/Core>
#include <cmath>

#include "rdyn/analysis.hpp"
#include "rdyn/errors.hpp"
#include "rdyn/system.hpp"

using namespace rdyn;

namespace {

// roots of l^2 - 1.44 l + 0.4096, derived independently from the
// characteristic coefficients of the ordered collateral product
constexpr double kLambda1 = 1.0498484500494128;
constexpr double kLambda2 = 0.39015154995058716;

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

RegimeSystem collateral_system() {
    return RegimeSystem(
        {{"N", CollateralOp{0.8, 0.8, 1.6, 1.6, 0.2, 0.2, CollateralSide::N}},
         {"C", CollateralOp{0.8, 0.8, 1.6, 1.6, 0.2, 0.2, CollateralSide::C}}});
}

RegimeOperator affine1(double factor, double shift) {
    Eigen::MatrixXd m(1, 1);
    m << factor;
    Eigen::VectorXd c(1);
    c << shift;
    return AffineOp{m, c};
}

} // namespace

TEST_CASE("triangular 2x2 spectra are exact") {
    const Spectrum s = eigenvalues(matrix_n());
    REQUIRE(s.eigenvalues.size() == 2);
    CHECK(s.eigenvalues[0] == std::complex<double>(0.8, 0.0));
    CHECK(s.eigenvalues[1] == std::complex<double>(0.8, 0.0));
    CHECK(s.spectral_radius == 0.8);
    CHECK(spectral_radius(matrix_c()) == 0.8);
}

TEST_CASE("symmetric product spectrum matches the quadratic roots") {
    const Eigen::Matrix2d product = matrix_c() * matrix_n();
    const Spectrum s = eigenvalues(product);
    REQUIRE(s.eigenvalues.size() == 2);
    CHECK(s.eigenvalues[0].real() == doctest::Approx(kLambda1).epsilon(1e-14));
    CHECK(s.eigenvalues[0].imag() == 0.0);
    CHECK(s.eigenvalues[1].real() == doctest::Approx(kLambda2).epsilon(1e-14));
    CHECK(s.spectral_radius == doctest::Approx(kLambda1).epsilon(1e-14));

    // reversing the order preserves the spectrum
    const Spectrum reversed = eigenvalues(matrix_n() * matrix_c());
    CHECK(reversed.spectral_radius == doctest::Approx(s.spectral_radius).epsilon(1e-14));
}

TEST_CASE("complex pairs and larger matrices") {
    Eigen::Matrix2d rotation;
    rotation << 0.0, -1.0, 1.0, 0.0;
    const Spectrum rot = eigenvalues(rotation);
    CHECK(rot.eigenvalues[0].real() == 0.0);
    CHECK(std::abs(rot.eigenvalues[0].imag()) == 1.0);
    CHECK(rot.spectral_radius == doctest::Approx(1.0).epsilon(1e-15));

    // companion matrix of (l-1)(l-2)(l-3)
    Eigen::Matrix3d companion;
    companion << 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 6.0, -11.0, 6.0;
    const Spectrum s = eigenvalues(companion);
    REQUIRE(s.eigenvalues.size() == 3);
    CHECK(s.eigenvalues[0].real() == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(s.eigenvalues[1].real() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(s.eigenvalues[2].real() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.spectral_radius == doctest::Approx(3.0).epsilon(1e-12));

    Eigen::VectorXd one(1);
    one << -2.5;
    CHECK(eigenvalues(one.asDiagonal().toDenseMatrix()).spectral_radius == 2.5);
}

TEST_CASE("induced norms") {
    Eigen::Matrix2d m;
    m << 1.0, -2.0, 3.0, 4.0;
    CHECK(induced_inf_norm(m) == 7.0);  // max absolute row sum
    CHECK(induced_inf_norm(matrix_n()) == doctest::Approx(1.2).epsilon(1e-15));

    Eigen::Matrix2d diag;
    diag << 3.0, 0.0, 0.0, -4.0;
    CHECK(induced_two_norm(diag) == doctest::Approx(4.0).epsilon(1e-12));
    Eigen::Matrix2d nilpotent;
    nilpotent << 0.0, 2.0, 0.0, 0.0;
    CHECK(induced_two_norm(nilpotent) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("affine fixed points solve in closed form") {
    Eigen::Matrix2d half = 0.5 * Eigen::Matrix2d::Identity();
    const RegimeOperator op = AffineOp{half, Eigen::Vector2d(1.0, 1.0)};
    const FixedPointResult r = fixed_point(op);
    CHECK(r.converged);
    CHECK(r.iterations == 0);
    CHECK(r.point[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(r.point[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(r.residual <= 1e-10);
}

TEST_CASE("singular affine maps distinguish none from many fixed points") {
    // identity map: every point is fixed, the start is returned unchanged
    const RegimeOperator id = affine1(1.0, 0.0);
    Eigen::VectorXd start(1);
    start << 0.7;
    const FixedPointResult many = fixed_point(id, start);
    CHECK(many.converged);
    CHECK(many.point[0] == 0.7);
    CHECK(many.iterations == 0);

    // translation: no fixed point at all
    CHECK_THROWS_AS(fixed_point(affine1(1.0, 1.0)), NoUniqueFixedPoint);
}

TEST_CASE("newton handles nonlinear operators") {
    const RegimeOperator op = ExpressionOp{{Expression::parse("0.5*x0 + 1", 1)}};
    const FixedPointResult r = fixed_point(op);
    CHECK(r.converged);
    CHECK(r.iterations >= 1);
    CHECK(r.point[0] == doctest::Approx(2.0).epsilon(1e-10));

    const RegimeOperator quad = ExpressionOp{{Expression::parse("x0^2", 1)}};
    Eigen::VectorXd near_one(1);
    near_one << 1.4;
    const FixedPointResult q = fixed_point(quad, near_one);
    CHECK(q.converged);
    CHECK(q.point[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(q.residual <= 1e-10);
}

TEST_CASE("the collateral regimes share the fixed point (1, 1)") {
    const RegimeSystem sys = collateral_system();
    const FixedPointResult r = common_fixed_point(sys);
    CHECK(r.converged);
    CHECK(r.point[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.point[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.residual <= 1e-10);
    CHECK(r.worst_regime.has_value());
}

TEST_CASE("a common fixed point fails honestly when regimes disagree") {
    const RegimeSystem sys({{"to-two", affine1(0.5, 1.0)},   // fixed point 2
                            {"to-four", affine1(0.5, 2.0)}});  // fixed point 4
    const FixedPointResult r = common_fixed_point(sys);
    CHECK_FALSE(r.converged);
    CHECK(r.residual > 1e-10);
    REQUIRE(r.worst_regime.has_value());
    CHECK(r.worst_regime->index == 1);  // solved regime 0, regime 1 disagrees
}

TEST_CASE("linearize at the common fixed point reproduces the family") {
    const RegimeSystem sys = collateral_system();
    const LocalLinearization lin = linearize(sys, Eigen::Vector2d(1.0, 1.0));
    REQUIRE(lin.matrices.size() == 2);
    CHECK((lin.matrices[0] - matrix_n()).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((lin.matrices[1] - matrix_c()).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(lin.spectra[0].spectral_radius == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(lin.spectra[1].spectral_radius == doctest::Approx(0.8).epsilon(1e-12));
    CHECK_FALSE(lin.nonsmooth[0]);
    CHECK_FALSE(lin.nonsmooth[1]);
}

TEST_CASE("word products multiply left of the first-applied factor") {
    const RegimeSystem sys = collateral_system();
    const LocalLinearization lin = linearize(sys, Eigen::Vector2d(1.0, 1.0));

    const Eigen::MatrixXd cn = word_product(lin, {RegimeId{0}, RegimeId{1}});
    Eigen::Matrix2d expected_cn;
    expected_cn << 0.64, 0.32, 0.32, 0.80;
    CHECK((cn - expected_cn).cwiseAbs().maxCoeff() <= 1e-9);

    const Eigen::MatrixXd nc = word_product(lin, {RegimeId{1}, RegimeId{0}});
    Eigen::Matrix2d expected_nc;
    expected_nc << 0.80, 0.32, 0.32, 0.64;
    CHECK((nc - expected_nc).cwiseAbs().maxCoeff() <= 1e-9);

    CHECK(growth_factor(lin, {RegimeId{0}, RegimeId{1}}) ==
          doctest::Approx(std::sqrt(kLambda1)).epsilon(1e-9));
    CHECK(growth_factor(lin, {RegimeId{0}}) == doctest::Approx(0.8).epsilon(1e-9));

    CHECK_THROWS_AS(word_product(lin, {}), EmptyWordError);
    CHECK_THROWS_AS(word_product(lin, {RegimeId{9}}), IndexError);
}

TEST_CASE("exact linearization uses the analytic jacobian when available") {
    // affine system: linearize returns the matrices themselves
    Eigen::Matrix2d a = matrix_n();
    const RegimeSystem sys({{"only", AffineOp{a, Eigen::Vector2d(0.1, -0.2)}}});
    const LocalLinearization lin = linearize(sys, Eigen::Vector2d(0.4, 0.4));
    CHECK((lin.matrices[0] - a).cwiseAbs().maxCoeff() == 0.0);
}
