#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "aoisched/mdp.hpp"

namespace aoisched {

enum class Objective { AoI, Throughput };

/// Total state -> action map. Every assigned action must be feasible.
struct Policy {
    std::vector<int> actions;  ///< action index per state (0 = harvest)
};

struct SolverOptions {
    /// Span-seminorm stopping tolerance. <= 0 picks the default: 1e-9, scaled
    /// up by the stage magnitude when stage values are large (throughput
    /// rewards in bits would otherwise demand sub-epsilon spans).
    double tol = 0.0;
    long max_iter = 100000;
    /// Self-loop weight of the aperiodicity transform used inside value
    /// iteration; gains and optimal policies are unaffected.
    double damping = 0.5;
    long max_policy_iterations = 500;
};

struct SolveResult {
    Objective objective = Objective::AoI;
    /// Long-run average stage value per slot. AoI: weighted age units
    /// (minimized). Throughput: bits per slot, reported positive (maximized).
    double gain = 0.0;
    /// Bias vector, anchored so the reference state (index 0) has value 0.
    /// Satisfies the untransformed optimality equation within the residual.
    std::vector<double> relative_values;
    Policy policy;
    std::size_t iterations = 0;
    /// Final span seminorm of the value update (<= requested tol on success).
    double residual = 0.0;
    /// Per state: reachable from the reference state under the returned
    /// policy. Unreached states still carry greedy actions.
    std::vector<std::uint8_t> reached;
};

/// Long-run per-policy averages from the stationary distribution of the
/// policy-induced chain (restricted to the class reached from state 0).
struct PolicyEvaluation {
    std::vector<double> avg_aoi;  ///< slots, per device
    double weighted_cost = 0.0;
    double throughput_bits_per_slot = 0.0;
    std::size_t iterations = 0;
    bool used_exact_solve = false;
    std::size_t reachable_skeletons = 0;
};

/// A general finite average-cost MDP in flat sparse form; `stage` is
/// minimized. Used for solver cross-validation and as the exact-evaluation
/// backend of policy iteration.
struct GenericMdp {
    struct Arc {
        std::uint32_t succ;
        double prob;
    };
    struct ActionEntry {
        int action_id;
        double stage;
        std::uint32_t arc_begin, arc_end;
    };
    struct StateEntry {
        std::uint32_t act_begin, act_end;
    };

    std::vector<Arc> arcs;
    std::vector<ActionEntry> actions;
    std::vector<StateEntry> states;

    std::size_t state_count() const { return states.size(); }
    /// Checks shape and that every successor distribution sums to 1 (1e-12).
    void validate() const;
};

/// Expands the structured model into flat sparse form (stage values are AoI
/// costs, or negated rewards for the throughput objective).
GenericMdp expand_model(const MdpModel& model, Objective objective,
                        std::span<const double> weights);

SolveResult relative_value_iteration(const MdpModel& model, Objective objective,
                                     std::span<const double> weights,
                                     const SolverOptions& options = {});
SolveResult policy_iteration(const MdpModel& model, Objective objective,
                             std::span<const double> weights,
                             const SolverOptions& options = {});

SolveResult relative_value_iteration(const GenericMdp& mdp,
                                     const SolverOptions& options = {});
SolveResult policy_iteration(const GenericMdp& mdp, const SolverOptions& options = {});

PolicyEvaluation evaluate_policy(const MdpModel& model, const Policy& policy,
                                 std::span<const double> weights);

/// Optimality certificate: max over states of |best one-step backup - V - g|
/// for the untransformed operator. Small (<= 10 tol) iff (gain, values) solve
/// the optimality equation.
double bellman_residual(const GenericMdp& mdp, const SolveResult& result);
double bellman_residual(const MdpModel& model, Objective objective,
                        std::span<const double> weights, const SolveResult& result);

void write_solve_json(const MdpModel& model, const SolveResult& result,
                      const PolicyEvaluation& eval, std::ostream& out);
void write_policy_csv(const MdpModel& model, const Policy& policy, std::ostream& out);

}  // namespace aoisched
