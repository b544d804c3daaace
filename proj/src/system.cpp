#include "rdyn/system.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

#include "rdyn/rng.hpp"

namespace rdyn {

namespace {

constexpr double kProbabilityTolerance = 1e-12;

void check_probability_vector(const std::vector<double>& w, const char* what) {
    double sum = 0.0;
    for (double p : w) {
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument(std::string(what) +
                                        ": probabilities must lie in [0, 1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kProbabilityTolerance)
        throw std::invalid_argument(std::string(what) +
                                    ": probabilities must sum to 1 (within 1e-12)");
}

void check_regime_index(RegimeId id, std::size_t regime_count) {
    if (id.index >= regime_count)
        throw IndexError("regime index " + std::to_string(id.index) +
                         " out of range for a system with " +
                         std::to_string(regime_count) + " regimes");
}

// Draw an index from a cumulative scan of `probs` using one uniform draw.
std::size_t draw_index(Xoshiro256pp& rng, const std::vector<double>& probs) {
    const double u = rng.next_double();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;  // guard against rounding in the running sum
}

} // namespace

// ---------------------------------------------------------------------------
// RegimeSystem
// ---------------------------------------------------------------------------

RegimeSystem::RegimeSystem(std::vector<Regime> regimes)
    : regimes_(std::move(regimes)), dimension_(0) {
    if (regimes_.empty())
        throw DimensionError("a regime system needs at least one regime");
    dimension_ = regimes_.front().op.dimension();
    std::unordered_set<std::string> seen;
    for (const auto& regime : regimes_) {
        if (regime.op.dimension() != dimension_)
            throw DimensionError("regime '" + regime.label + "' acts on dimension " +
                                 std::to_string(regime.op.dimension()) +
                                 " but the system has dimension " +
                                 std::to_string(dimension_));
        if (regime.label.empty())
            throw std::invalid_argument("regime labels must be non-empty");
        if (!seen.insert(regime.label).second)
            throw std::invalid_argument("duplicate regime label '" + regime.label + "'");
    }
}

const RegimeOperator& RegimeSystem::op(RegimeId id) const {
    check_regime_index(id, regimes_.size());
    return regimes_[id.index].op;
}

const std::string& RegimeSystem::label(RegimeId id) const {
    check_regime_index(id, regimes_.size());
    return regimes_[id.index].label;
}

RegimeId RegimeSystem::regime(std::string_view label) const {
    for (std::size_t i = 0; i < regimes_.size(); ++i)
        if (regimes_[i].label == label) return RegimeId{i};
    throw IndexError("no regime labelled '" + std::string(label) + "'");
}

// ---------------------------------------------------------------------------
// SwitchingSignal
// ---------------------------------------------------------------------------

SwitchingSignal SwitchingSignal::explicit_word(Word word) {
    return SwitchingSignal(Explicit{std::move(word)});
}

SwitchingSignal SwitchingSignal::periodic(Word word) {
    if (word.empty()) throw EmptyWordError("periodic signal needs a non-empty word");
    return SwitchingSignal(Periodic{std::move(word)});
}

SwitchingSignal SwitchingSignal::iid(std::vector<double> weights, std::uint64_t seed) {
    if (weights.empty())
        throw DimensionError("iid signal needs at least one weight");
    check_probability_vector(weights, "iid signal");
    return SwitchingSignal(Iid{std::move(weights), seed});
}

SwitchingSignal SwitchingSignal::markov(Eigen::MatrixXd transition, RegimeId initial,
                                        std::uint64_t seed) {
    if (transition.rows() == 0 || transition.rows() != transition.cols())
        throw DimensionError("markov signal needs a square transition matrix");
    for (Eigen::Index r = 0; r < transition.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(transition.cols()));
        for (Eigen::Index c = 0; c < transition.cols(); ++c)
            row[static_cast<std::size_t>(c)] = transition(r, c);
        check_probability_vector(row, "markov transition row");
    }
    if (initial.index >= static_cast<std::size_t>(transition.rows()))
        throw IndexError("markov initial regime " + std::to_string(initial.index) +
                         " out of range for a " + std::to_string(transition.rows()) +
                         "-state transition matrix");
    return SwitchingSignal(Markov{std::move(transition), initial, seed});
}

Word SwitchingSignal::generate(std::size_t horizon, std::size_t regime_count) const {
    Word out;
    out.reserve(horizon);

    if (const auto* sig = std::get_if<Explicit>(&repr_)) {
        if (sig->word.size() < horizon)
            throw SignalExhausted("explicit word of length " +
                                  std::to_string(sig->word.size()) +
                                  " cannot drive a horizon of " + std::to_string(horizon));
        for (std::size_t t = 0; t < horizon; ++t) {
            check_regime_index(sig->word[t], regime_count);
            out.push_back(sig->word[t]);
        }
        return out;
    }

    if (const auto* sig = std::get_if<Periodic>(&repr_)) {
        for (std::size_t t = 0; t < horizon; ++t) {
            const RegimeId id = sig->word[t % sig->word.size()];
            check_regime_index(id, regime_count);
            out.push_back(id);
        }
        return out;
    }

    if (const auto* sig = std::get_if<Iid>(&repr_)) {
        if (sig->weights.size() != regime_count)
            throw DimensionError("iid signal has " + std::to_string(sig->weights.size()) +
                                 " weights for a system with " +
                                 std::to_string(regime_count) + " regimes");
        Xoshiro256pp rng(sig->seed);
        for (std::size_t t = 0; t < horizon; ++t)
            out.push_back(RegimeId{draw_index(rng, sig->weights)});
        return out;
    }

    const auto& sig = std::get<Markov>(repr_);
    if (static_cast<std::size_t>(sig.transition.rows()) != regime_count)
        throw DimensionError("markov transition is " +
                             std::to_string(sig.transition.rows()) + "x" +
                             std::to_string(sig.transition.cols()) +
                             " for a system with " + std::to_string(regime_count) +
                             " regimes");
    check_regime_index(sig.initial, regime_count);
    Xoshiro256pp rng(sig.seed);
    RegimeId current = sig.initial;
    std::vector<double> row(regime_count);
    for (std::size_t t = 0; t < horizon; ++t) {
        out.push_back(current);
        if (t + 1 == horizon) break;
        for (std::size_t c = 0; c < regime_count; ++c)
            row[c] = sig.transition(static_cast<Eigen::Index>(current.index),
                                    static_cast<Eigen::Index>(c));
        current = RegimeId{draw_index(rng, row)};
    }
    return out;
}

std::string SwitchingSignal::kind() const {
    if (holds<Explicit>()) return "explicit";
    if (holds<Periodic>()) return "periodic";
    if (holds<Iid>()) return "iid";
    return "markov";
}

bool SwitchingSignal::stochastic() const noexcept {
    return holds<Iid>() || holds<Markov>();
}

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

Eigen::VectorXd step(const RegimeSystem& system, RegimeId regime,
                     const Eigen::VectorXd& x) {
    const RegimeOperator& op = system.op(regime);
    Eigen::VectorXd y;
    try {
        y = apply(op, x);
    } catch (const NumericalError& e) {
        throw NumericalError("regime '" + system.label(regime) + "': " + e.what(),
                             static_cast<long>(regime.index), e.component(),
                             e.timestep());
    }
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (!std::isfinite(y[i]))
            throw NumericalError("regime '" + system.label(regime) +
                                     "' produced a non-finite component " +
                                     std::to_string(i),
                                 static_cast<long>(regime.index), i);
    return y;
}

Trajectory simulate(const RegimeSystem& system, const SwitchingSignal& signal,
                    const Eigen::VectorXd& x0, std::size_t horizon) {
    if (x0.size() != system.dimension())
        throw DimensionError("initial state has length " + std::to_string(x0.size()) +
                             " but the system has dimension " +
                             std::to_string(system.dimension()));
    if (!x0.allFinite())
        throw NumericalError("initial state has non-finite components");

    Trajectory trajectory;
    trajectory.regimes = signal.generate(horizon, system.regime_count());
    trajectory.states.reserve(horizon + 1);
    trajectory.states.push_back(x0);
    for (std::size_t t = 0; t < horizon; ++t) {
        try {
            trajectory.states.push_back(
                step(system, trajectory.regimes[t], trajectory.states.back()));
        } catch (const NumericalError& e) {
            throw NumericalError("timestep " + std::to_string(t) + ": " + e.what(),
                                 e.regime(), e.component(), static_cast<long>(t));
        }
    }
    return trajectory;
}

RegimeOperator compose(const RegimeSystem& system, const Word& word) {
    if (word.empty())
        throw EmptyWordError("cannot compose an empty regime word");

    bool all_affine = true;
    for (const RegimeId id : word)
        all_affine = all_affine && system.op(id).holds<AffineOp>();

    if (all_affine) {
        // Fold left-to-right in application order: after factor s the
        // accumulated map is x -> A_s (A x + c) + c_s.
        const auto& first = system.op(word.front()).get<AffineOp>();
        Eigen::MatrixXd a = first.matrix;
        Eigen::VectorXd c = first.offset;
        for (std::size_t k = 1; k < word.size(); ++k) {
            const auto& factor = system.op(word[k]).get<AffineOp>();
            a = factor.matrix * a;
            c = factor.matrix * c + factor.offset;
        }
        return AffineOp{std::move(a), std::move(c)};
    }

    ComposedOp composed;
    composed.stages.reserve(word.size());
    for (const RegimeId id : word) composed.stages.push_back(system.op(id));
    return composed;
}

} // namespace rdyn
