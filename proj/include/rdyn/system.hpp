#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rdyn/operators.hpp"

namespace rdyn {

/// Handle to one regime of a RegimeSystem; the label lives in the system.
struct RegimeId {
    std::size_t index = 0;
    auto operator<=>(const RegimeId&) const = default;
};

/// A finite switching word s_1, ..., s_k.
using Word = std::vector<RegimeId>;

/// A labelled one-step map.
struct Regime {
    std::string label;
    RegimeOperator op;
};

/// A finite family of one-step maps over a shared state space.  The system
/// is immutable once built; regimes keep the order they were given in, and
/// RegimeId{i} refers to the i-th one.
///
/// Invariants enforced at construction: at least one regime, all operators
/// act on the same dimension, labels are unique and non-empty.
class RegimeSystem {
public:
    explicit RegimeSystem(std::vector<Regime> regimes);

    int dimension() const noexcept { return dimension_; }
    std::size_t regime_count() const noexcept { return regimes_.size(); }

    const RegimeOperator& op(RegimeId id) const;
    const std::string& label(RegimeId id) const;

    /// Resolve a label to its id.  @throws IndexError if no regime has it.
    RegimeId regime(std::string_view label) const;

private:
    std::vector<Regime> regimes_;
    int dimension_;
};

/// How the active regime is chosen at each timestep.  The stochastic kinds
/// carry an explicit seed so any realisation can be replayed exactly.
class SwitchingSignal {
public:
    struct Explicit {
        Word word;
    };
    struct Periodic {
        Word word;  // non-empty; repeats forever
    };
    struct Iid {
        std::vector<double> weights;  // probability vector over regimes
        std::uint64_t seed;
    };
    struct Markov {
        Eigen::MatrixXd transition;  // row-stochastic; row s = P(next | s)
        RegimeId initial;            // s_0
        std::uint64_t seed;
    };

    /// @throws EmptyWordError (periodic word empty), std::invalid_argument
    /// (invalid probabilities: entries outside [0,1] or a row/weight sum
    /// differing from 1 by more than 1e-12), DimensionError (non-square
    /// transition matrix).
    static SwitchingSignal explicit_word(Word word);
    static SwitchingSignal periodic(Word word);
    static SwitchingSignal iid(std::vector<double> weights, std::uint64_t seed);
    static SwitchingSignal markov(Eigen::MatrixXd transition, RegimeId initial,
                                  std::uint64_t seed);

    /// Realise the first @p horizon regimes s_0..s_{T-1}.  Deterministic:
    /// stochastic kinds always restart from their seed.
    ///
    /// @throws SignalExhausted  explicit word shorter than the horizon.
    /// @throws IndexError       a referenced regime index is >= regime_count.
    /// @throws DimensionError   weight / transition size != regime_count.
    Word generate(std::size_t horizon, std::size_t regime_count) const;

    /// "explicit", "periodic", "iid" or "markov".
    std::string kind() const;

    bool stochastic() const noexcept;

    template <class T>
    bool holds() const noexcept {
        return std::holds_alternative<T>(repr_);
    }

    template <class T>
    const T& get() const {
        return std::get<T>(repr_);
    }

private:
    using Repr = std::variant<Explicit, Periodic, Iid, Markov>;
    explicit SwitchingSignal(Repr repr) : repr_(std::move(repr)) {}

    Repr repr_;
};

/// A realised run: states x_0..x_T and the regimes s_0..s_{T-1} that were
/// applied, so states[t+1] == F_{regimes[t]}(states[t]) always replays.
struct Trajectory {
    std::vector<Eigen::VectorXd> states;
    Word regimes;

    std::size_t horizon() const noexcept { return regimes.size(); }
};

/// One step x -> F_s(x).
///
/// @throws IndexError      regime index out of range.
/// @throws DimensionError  state of the wrong length.
/// @throws NumericalError  domain error or non-finite output, tagged with
///                         the regime and the first offending component.
Eigen::VectorXd step(const RegimeSystem& system, RegimeId regime,
                     const Eigen::VectorXd& x);

/// Run @p horizon steps driven by @p signal starting from @p x0.
///
/// @throws SignalExhausted  explicit word shorter than the horizon.
/// @throws NumericalError   propagated from step with the failing timestep.
Trajectory simulate(const RegimeSystem& system, const SwitchingSignal& signal,
                    const Eigen::VectorXd& x0, std::size_t horizon);

/// Collapse a word into a single operator F_{s_k} o ... o F_{s_1}.  When
/// every factor is affine the result is the exact closed-form affine
/// composition; otherwise the factors are kept and applied in order.
///
/// @throws EmptyWordError  empty word.
/// @throws IndexError      a regime index out of range.
RegimeOperator compose(const RegimeSystem& system, const Word& word);

} // namespace rdyn
