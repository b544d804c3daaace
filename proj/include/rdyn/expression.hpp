#pragma once

#include <Eigen/Core>

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rdyn/errors.hpp"

namespace rdyn {

/**
 * @brief A parsed scalar expression over the state components x0..x{n-1}.
 *
 * Grammar (EBNF, whitespace insignificant):
 * @code
 *   expr     = term { ("+" | "-") term } ;
 *   term     = factor { ("*" | "/") factor } ;
 *   factor   = "-" factor | power ;
 *   power    = atom [ "^" factor ] ;
 *   atom     = number | variable | function "(" expr { "," expr } ")"
 *            | "(" expr ")" ;
 *   variable = "x" digits | "x" "[" digits "]" ;
 *   function = "exp" | "log" | "sqrt" | "abs" | "tanh" | "min" | "max" ;
 * @endcode
 *
 * Precedence, tightest first: "^", unary "-", "*" and "/", "+" and "-".
 * All binary operators associate to the left except "^", which associates
 * to the right ("x0^2^3" is x0^(2^3)).  "min" and "max" take exactly two
 * arguments, every other function exactly one.
 *
 * Expressions are immutable; copies share the underlying tree.
 */
class Expression {
public:
    /**
     * @brief Parse @p text as an expression over @p dimension state variables.
     *
     * @throws ParseError  on a syntax error, with the byte offset of the
     *                     offending token and the set of tokens that would
     *                     have been accepted there.
     * @throws IndexError  when a variable index is >= @p dimension.
     */
    static Expression parse(std::string_view text, int dimension);

    /**
     * @brief Evaluate at state @p x (must have size() == dimension()).
     *
     * @param branch_trace  optional; when non-null, receives one entry per
     *                      min/max node visited (0 = left argument chosen,
     *                      1 = right).  Used to detect evaluation across a
     *                      kink when forming finite differences.
     *
     * @throws DimensionError  if @p x has the wrong length.
     * @throws NumericalError  on domain errors (division by zero, log of a
     *                         non-positive value, sqrt of a negative value,
     *                         0 raised to a negative power) or when the
     *                         result is not finite.
     */
    double evaluate(const Eigen::VectorXd& x,
                    std::vector<int>* branch_trace = nullptr) const;

    /// Render back to text.  Reparsing the result yields a tree with the
    /// identical evaluation order, so values reproduce bit for bit.
    std::string str() const;

    /// Number of state variables the expression was parsed against.
    int dimension() const noexcept { return dimension_; }

    /// True when the tree contains a min or max node (non-smooth points).
    bool has_min_max() const noexcept;

    struct Node;  // incomplete to users; defined in expression.cpp

private:
    Expression(std::shared_ptr<const Node> root, int dimension)
        : root_(std::move(root)), dimension_(dimension) {}

    std::shared_ptr<const Node> root_;
    int dimension_ = 0;
};

} // namespace rdyn
