#pragma once

#include <Eigen/Core>

#include <string>
#include <variant>
#include <vector>

#include "rdyn/errors.hpp"
#include "rdyn/expression.hpp"

namespace rdyn {

/// Affine map F(x) = A x + c.
struct AffineOp {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd offset;
};

/// Which side of the collateral constraint binds.
enum class CollateralSide { N, C };

/// Built-in two-dimensional credit-collateral map.  The state is
/// x = (q, b): an asset price q and a borrowing level b.
///
/// Side N (constraint slack):
///   q' = alpha*q + mu*(b/(1+b) - b*/(1+b*)) + q_bar,   b' = beta*b + b_bar
/// Side C (constraint binding):
///   q' = alpha*q + q_bar,   b' = beta*b + nu*(q/(1+q) - q*/(1+q*)) + b_bar
///
/// where q* = q_bar/(1-alpha) and b* = b_bar/(1-beta).  Both sides share
/// the fixed point (q*, b*).
struct CollateralOp {
    double alpha;
    double beta;
    double mu;
    double nu;
    double q_bar;
    double b_bar;
    CollateralSide side;

    double q_star() const noexcept { return q_bar / (1.0 - alpha); }
    double b_star() const noexcept { return b_bar / (1.0 - beta); }
};

/// Map given component-wise by parsed expressions; component j of the image
/// is components[j] evaluated at x.  Square by construction: the number of
/// components equals the dimension each expression was parsed against.
struct ExpressionOp {
    std::vector<Expression> components;
};

class RegimeOperator;

/// Ordered composition; stages are applied first-to-last.
struct ComposedOp {
    std::vector<RegimeOperator> stages;
};

/// One regime's one-step map.  A tagged union of the concrete operator
/// kinds; construction validates the invariants of the wrapped kind:
///
///  - AffineOp: square matrix, offset of matching length, finite entries
///  - CollateralOp: alpha, beta in (0,1); q_bar, b_bar > 0; mu, nu >= 0
///  - ExpressionOp: non-empty, and every component parsed against a number
///    of variables equal to the component count
///  - ComposedOp: non-empty, all stage dimensions equal
class RegimeOperator {
public:
    RegimeOperator(AffineOp op);      // NOLINT(google-explicit-constructor)
    RegimeOperator(CollateralOp op);  // NOLINT(google-explicit-constructor)
    RegimeOperator(ExpressionOp op);  // NOLINT(google-explicit-constructor)
    RegimeOperator(ComposedOp op);    // NOLINT(google-explicit-constructor)

    /// State-space dimension the operator acts on.
    int dimension() const;

    /// Tag of the wrapped kind: "affine", "collateral", "expression"
    /// or "composed".
    std::string kind() const;

    template <class T>
    bool holds() const noexcept {
        return std::holds_alternative<T>(repr_);
    }

    template <class T>
    const T& get() const {
        return std::get<T>(repr_);
    }

    template <class Visitor>
    decltype(auto) visit(Visitor&& v) const {
        return std::visit(std::forward<Visitor>(v), repr_);
    }

private:
    std::variant<AffineOp, CollateralOp, ExpressionOp, ComposedOp> repr_;
};

/// Jacobian matrix plus a flag raised when the finite-difference probes
/// straddled a min/max kink, where the derivative is one-sided.
struct JacobianResult {
    Eigen::MatrixXd matrix;
    bool nonsmooth_warning = false;
};

/// Apply @p op to state @p x and return the image as a fresh vector.
///
/// @throws DimensionError  when x.size() != op.dimension().
/// @throws NumericalError  on domain errors, tagged with the failing
///                         component where one is identifiable.
Eigen::VectorXd apply(const RegimeOperator& op, const Eigen::VectorXd& x);

/// Jacobian of @p op at @p x.  Affine operators return their matrix
/// exactly; the collateral builtin uses its closed form (for side N,
/// dq'/db = mu/(1+b)^2); expression maps use central finite differences
/// with per-coordinate step h_i = max(1e-6, 1e-6*|x_i|); compositions use
/// the chain rule on their stages.
Eigen::MatrixXd jacobian(const RegimeOperator& op, const Eigen::VectorXd& x);

/// Same as jacobian() but also reports the non-smoothness flag.
JacobianResult jacobian_info(const RegimeOperator& op, const Eigen::VectorXd& x);

} // namespace rdyn
