#include "rdyn/operators.hpp"

#include <cmath>
#include <utility>

namespace rdyn {

namespace {

void check_dimension(const RegimeOperator& op, const Eigen::VectorXd& x) {
    if (x.size() != op.dimension())
        throw DimensionError("state has length " + std::to_string(x.size()) +
                             " but the operator acts on dimension " +
                             std::to_string(op.dimension()));
}

Eigen::VectorXd apply_collateral(const CollateralOp& op, const Eigen::VectorXd& x) {
    const double q = x[0];
    const double b = x[1];
    Eigen::VectorXd y(2);
    if (op.side == CollateralSide::N) {
        if (1.0 + b == 0.0)
            throw NumericalError("collateral map: division by zero at b = -1", -1, 0);
        const double bs = op.b_star();
        y[0] = op.alpha * q + op.mu * (b / (1.0 + b) - bs / (1.0 + bs)) + op.q_bar;
        y[1] = op.beta * b + op.b_bar;
    } else {
        if (1.0 + q == 0.0)
            throw NumericalError("collateral map: division by zero at q = -1", -1, 1);
        const double qs = op.q_star();
        y[0] = op.alpha * q + op.q_bar;
        y[1] = op.beta * b + op.nu * (q / (1.0 + q) - qs / (1.0 + qs)) + op.b_bar;
    }
    return y;
}

Eigen::MatrixXd jacobian_collateral(const CollateralOp& op, const Eigen::VectorXd& x) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2, 2);
    j(0, 0) = op.alpha;
    j(1, 1) = op.beta;
    if (op.side == CollateralSide::N) {
        const double denom = 1.0 + x[1];
        if (denom == 0.0)
            throw NumericalError("collateral Jacobian: singular at b = -1", -1, 0);
        j(0, 1) = op.mu / (denom * denom);
    } else {
        const double denom = 1.0 + x[0];
        if (denom == 0.0)
            throw NumericalError("collateral Jacobian: singular at q = -1", -1, 1);
        j(1, 0) = op.nu / (denom * denom);
    }
    return j;
}

Eigen::VectorXd apply_expression(const ExpressionOp& op, const Eigen::VectorXd& x) {
    const int n = static_cast<int>(op.components.size());
    Eigen::VectorXd y(n);
    for (int j = 0; j < n; ++j) {
        try {
            y[j] = op.components[static_cast<std::size_t>(j)].evaluate(x);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " in component " +
                                     std::to_string(j),
                                 e.regime(), j, e.timestep());
        }
    }
    return y;
}

JacobianResult jacobian_expression(const ExpressionOp& op, const Eigen::VectorXd& x) {
    const int n = static_cast<int>(op.components.size());
    JacobianResult result{Eigen::MatrixXd(n, n), false};
    Eigen::VectorXd probe = x;
    std::vector<int> trace_hi, trace_lo;
    for (int i = 0; i < n; ++i) {
        const double h = std::max(1e-6, 1e-6 * std::abs(x[i]));
        for (int j = 0; j < n; ++j) {
            const auto& component = op.components[static_cast<std::size_t>(j)];
            trace_hi.clear();
            trace_lo.clear();
            probe[i] = x[i] + h;
            const double hi = component.evaluate(probe, &trace_hi);
            probe[i] = x[i] - h;
            const double lo = component.evaluate(probe, &trace_lo);
            probe[i] = x[i];
            result.matrix(j, i) = (hi - lo) / (2.0 * h);
            if (trace_hi != trace_lo) result.nonsmooth_warning = true;
        }
    }
    return result;
}

} // namespace

RegimeOperator::RegimeOperator(AffineOp op) : repr_(std::move(op)) {
    const auto& a = std::get<AffineOp>(repr_);
    if (a.matrix.rows() != a.matrix.cols())
        throw DimensionError("affine operator needs a square matrix");
    if (a.offset.size() != a.matrix.rows())
        throw DimensionError("affine offset length does not match the matrix");
    if (!a.matrix.allFinite() || !a.offset.allFinite())
        throw NumericalError("affine operator has non-finite entries");
}

RegimeOperator::RegimeOperator(CollateralOp op) : repr_(op) {
    const auto valid_rate = [](double r) { return r > 0.0 && r < 1.0; };
    if (!valid_rate(op.alpha) || !valid_rate(op.beta))
        throw std::invalid_argument("collateral operator needs alpha, beta in (0, 1)");
    if (!(op.q_bar > 0.0) || !(op.b_bar > 0.0))
        throw std::invalid_argument("collateral operator needs q_bar, b_bar > 0");
    if (!(op.mu >= 0.0) || !(op.nu >= 0.0))
        throw std::invalid_argument("collateral operator needs mu, nu >= 0");
}

RegimeOperator::RegimeOperator(ExpressionOp op) : repr_(std::move(op)) {
    const auto& e = std::get<ExpressionOp>(repr_);
    if (e.components.empty())
        throw DimensionError("expression operator needs at least one component");
    const int n = static_cast<int>(e.components.size());
    for (const auto& component : e.components)
        if (component.dimension() != n)
            throw DimensionError("expression component parsed for dimension " +
                                 std::to_string(component.dimension()) +
                                 " in an operator of dimension " + std::to_string(n));
}

RegimeOperator::RegimeOperator(ComposedOp op) : repr_(std::move(op)) {
    const auto& c = std::get<ComposedOp>(repr_);
    if (c.stages.empty())
        throw EmptyWordError("composed operator needs at least one stage");
    const int n = c.stages.front().dimension();
    for (const auto& stage : c.stages)
        if (stage.dimension() != n)
            throw DimensionError("composed stages act on different dimensions");
}

int RegimeOperator::dimension() const {
    return visit([](const auto& op) -> int {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, AffineOp>)
            return static_cast<int>(op.matrix.rows());
        else if constexpr (std::is_same_v<T, CollateralOp>)
            return 2;
        else if constexpr (std::is_same_v<T, ExpressionOp>)
            return static_cast<int>(op.components.size());
        else
            return op.stages.front().dimension();
    });
}

std::string RegimeOperator::kind() const {
    return visit([](const auto& op) -> std::string {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, AffineOp>) return "affine";
        else if constexpr (std::is_same_v<T, CollateralOp>) return "collateral";
        else if constexpr (std::is_same_v<T, ExpressionOp>) return "expression";
        else return "composed";
    });
}

Eigen::VectorXd apply(const RegimeOperator& op, const Eigen::VectorXd& x) {
    check_dimension(op, x);
    return op.visit([&](const auto& concrete) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(concrete)>;
        if constexpr (std::is_same_v<T, AffineOp>) {
            return concrete.matrix * x + concrete.offset;
        } else if constexpr (std::is_same_v<T, CollateralOp>) {
            return apply_collateral(concrete, x);
        } else if constexpr (std::is_same_v<T, ExpressionOp>) {
            return apply_expression(concrete, x);
        } else {
            Eigen::VectorXd y = x;
            for (const auto& stage : concrete.stages) y = apply(stage, y);
            return y;
        }
    });
}

JacobianResult jacobian_info(const RegimeOperator& op, const Eigen::VectorXd& x) {
    check_dimension(op, x);
    return op.visit([&](const auto& concrete) -> JacobianResult {
        using T = std::decay_t<decltype(concrete)>;
        if constexpr (std::is_same_v<T, AffineOp>) {
            return {concrete.matrix, false};
        } else if constexpr (std::is_same_v<T, CollateralOp>) {
            return {jacobian_collateral(concrete, x), false};
        } else if constexpr (std::is_same_v<T, ExpressionOp>) {
            return jacobian_expression(concrete, x);
        } else {
            // Chain rule: J = J_k(x_{k-1}) * ... * J_1(x_0).
            Eigen::VectorXd point = x;
            JacobianResult result{
                Eigen::MatrixXd::Identity(op.dimension(), op.dimension()), false};
            for (const auto& stage : concrete.stages) {
                JacobianResult stage_jac = jacobian_info(stage, point);
                result.matrix = stage_jac.matrix * result.matrix;
                result.nonsmooth_warning |= stage_jac.nonsmooth_warning;
                point = apply(stage, point);
            }
            return result;
        }
    });
}

Eigen::MatrixXd jacobian(const RegimeOperator& op, const Eigen::VectorXd& x) {
    return jacobian_info(op, x).matrix;
}

} // namespace rdyn
