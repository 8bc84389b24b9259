#include "aoisched/solver.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>

#include "aoisched/errors.hpp"
#include "json.hpp"

namespace aoisched {

namespace {

constexpr double kBaseTol = 1e-9;

double resolve_tol(double requested, double stage_scale) {
    if (requested > 0.0) return requested;
    return (stage_scale <= 1e3) ? kBaseTol : kBaseTol * stage_scale;
}

// ---------------------------------------------------------------------------
// value-iteration backends

// Structured backend: exploits the factorization of the transition law. The
// expected next value of any (state, action) is the channel-average of the
// successor skeleton, so one pass precomputes those averages and each backup
// is a table lookup per action.
class StructuredBackend {
public:
    StructuredBackend(const MdpModel& m, Objective obj, std::span<const double> weights)
        : model_(m), objective_(obj) {
        if (obj == Objective::AoI) {
            stage_skel_ = m.skeleton_costs(weights);
        } else {
            stage_action_.resize(m.device_count() + 1, 0.0);
            for (std::size_t d = 0; d < m.device_count(); ++d)
                stage_action_[d + 1] = -m.config().devices[d].packet_size;
        }
        combos_ = m.channel_combo_count();
        actions_ = m.device_count() + 1;
        succ_ = m.successor_skeleton_table();
        W_.resize(m.skeleton_count());
    }

    std::size_t size() const { return model_.state_count(); }

    double stage_scale() const {
        if (objective_ == Objective::AoI)
            return *std::max_element(stage_skel_.begin(), stage_skel_.end());
        double s = 0.0;
        for (double v : stage_action_) s = std::max(s, -v);
        return s;
    }

    void begin_pass(const std::vector<double>& values) {
        const double inv = 1.0 / static_cast<double>(combos_);
        for (std::size_t skel = 0; skel < W_.size(); ++skel) {
            const double* block = values.data() + skel * combos_;
            double sum = 0.0;
            for (std::size_t c = 0; c < combos_; ++c) sum += block[c];
            W_[skel] = sum * inv;
        }
    }

    double best(std::size_t s, double scale, int* argbest) const {
        const std::uint32_t mask = model_.feasible_mask(s);
        const std::size_t base = s * actions_;
        const double stage_state =
            (objective_ == Objective::AoI) ? stage_skel_[s / combos_] : 0.0;
        double best_q = std::numeric_limits<double>::infinity();
        int best_a = -1;
        for (std::size_t a = 0; a < actions_; ++a) {
            if (!(mask & (1u << a))) continue;
            const double stage =
                (objective_ == Objective::AoI) ? stage_state : stage_action_[a];
            const double q = stage + scale * W_[succ_[base + a]];
            if (q < best_q) {
                best_q = q;
                best_a = static_cast<int>(a);
            }
        }
        if (argbest) *argbest = best_a;
        return best_q;
    }

private:
    const MdpModel& model_;
    Objective objective_;
    std::vector<double> stage_skel_;
    std::vector<double> stage_action_;
    std::size_t combos_ = 0, actions_ = 0;
    const std::uint32_t* succ_ = nullptr;
    std::vector<double> W_;
};

class GenericBackend {
public:
    explicit GenericBackend(const GenericMdp& g) : mdp_(g) {}

    std::size_t size() const { return mdp_.state_count(); }

    double stage_scale() const {
        double s = 0.0;
        for (const auto& a : mdp_.actions) s = std::max(s, std::abs(a.stage));
        return s;
    }

    void begin_pass(const std::vector<double>& values) { values_ = &values; }

    double best(std::size_t s, double scale, int* argbest) const {
        const auto& st = mdp_.states[s];
        double best_q = std::numeric_limits<double>::infinity();
        int best_a = -1;
        for (std::uint32_t ai = st.act_begin; ai < st.act_end; ++ai) {
            const auto& act = mdp_.actions[ai];
            double ev = 0.0;
            for (std::uint32_t k = act.arc_begin; k < act.arc_end; ++k)
                ev += mdp_.arcs[k].prob * (*values_)[mdp_.arcs[k].succ];
            const double q = act.stage + scale * ev;
            if (q < best_q) {
                best_q = q;
                best_a = act.action_id;
            }
        }
        if (argbest) *argbest = best_a;
        return best_q;
    }

private:
    const GenericMdp& mdp_;
    const std::vector<double>* values_ = nullptr;
};

struct RviRaw {
    std::vector<double> values;
    std::vector<int> policy;
    double gain = 0.0;
    std::size_t iterations = 0;
    double span = 0.0;
};

// Relative value iteration with a self-loop aperiodicity transform:
//   V'(s) = tau V(s) + min_a [ c(s,a) + (1-tau) E V ]
// anchored at state 0 every sweep. The transform changes neither gains nor
// greedy actions; the returned values are rescaled by (1-tau) so that the
// untransformed optimality equation holds at the returned tolerance.
template <class Backend>
RviRaw rvi_core(Backend& backend, double tol, long max_iter, double damping) {
    const std::size_t n = backend.size();
    if (n == 0) throw InvalidRequestError("empty state space");
    if (!(tol > 0.0)) throw InvalidRequestError("tolerance must be positive");
    if (!(damping >= 0.0 && damping < 1.0))
        throw InvalidRequestError("damping must lie in [0,1)");
    const double scale = 1.0 - damping;

    std::vector<double> v(n, 0.0), v_new(n);
    double span = std::numeric_limits<double>::infinity();
    double gain = 0.0;
    for (long iter = 1; iter <= max_iter; ++iter) {
        backend.begin_pass(v);
        for (std::size_t s = 0; s < n; ++s)
            v_new[s] = damping * v[s] + backend.best(s, scale, nullptr);

        double d_min = std::numeric_limits<double>::infinity();
        double d_max = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < n; ++s) {
            const double d = v_new[s] - v[s];
            d_min = std::min(d_min, d);
            d_max = std::max(d_max, d);
        }
        span = d_max - d_min;
        gain = v_new[0] - v[0];

        const double anchor = v_new[0];
        for (std::size_t s = 0; s < n; ++s) v[s] = v_new[s] - anchor;

        if (span <= tol) {
            RviRaw out;
            out.policy.resize(n);
            backend.begin_pass(v);
            for (std::size_t s = 0; s < n; ++s) {
                int a = -1;
                backend.best(s, scale, &a);
                out.policy[s] = a;
            }
            out.values.resize(n);
            for (std::size_t s = 0; s < n; ++s) out.values[s] = scale * v[s];
            out.gain = gain;
            out.iterations = static_cast<std::size_t>(iter);
            out.span = span;
            return out;
        }
    }
    throw ConvergenceError("value iteration did not reach tolerance " +
                               std::to_string(tol) + " within " +
                               std::to_string(max_iter) + " sweeps",
                           span);
}

// ---------------------------------------------------------------------------
// generic-MDP helpers

const GenericMdp::ActionEntry& action_entry(const GenericMdp& mdp, std::size_t s,
                                            int action_id) {
    const auto& st = mdp.states[s];
    for (std::uint32_t ai = st.act_begin; ai < st.act_end; ++ai)
        if (mdp.actions[ai].action_id == action_id) return mdp.actions[ai];
    throw InvalidRequestError("policy assigns an infeasible action");
}

std::vector<std::uint8_t> reachable_under_policy(const GenericMdp& mdp,
                                                 const std::vector<int>& policy) {
    std::vector<std::uint8_t> in(mdp.state_count(), 0);
    std::queue<std::uint32_t> frontier;
    in[0] = 1;
    frontier.push(0);
    while (!frontier.empty()) {
        const std::uint32_t s = frontier.front();
        frontier.pop();
        const auto& act = action_entry(mdp, s, policy[s]);
        for (std::uint32_t k = act.arc_begin; k < act.arc_end; ++k) {
            const std::uint32_t succ = mdp.arcs[k].succ;
            if (!in[succ]) {
                in[succ] = 1;
                frontier.push(succ);
            }
        }
    }
    return in;
}

struct EvalOutcome {
    double gain = 0.0;
    std::vector<double> bias;           // full length; extension for states off the
    std::vector<std::uint8_t> stable;   // reached set is iterative and flagged here
};

// Exact (gain, bias) of a fixed policy: linear system on the closed set
// reachable from state 0, bias(0) = 0; bias on the rest extends by damped
// fixed-policy sweeps (converges whenever those states drain into the
// evaluated class).
EvalOutcome evaluate_exact(const GenericMdp& mdp, const std::vector<int>& policy) {
    const std::size_t n = mdp.state_count();
    const std::vector<std::uint8_t> in_r = reachable_under_policy(mdp, policy);
    std::vector<std::uint32_t> r_states;
    std::vector<std::int32_t> col(n, -1);
    std::int32_t next_col = 0;  // bias columns 0..m-2; the last column is the gain
    for (std::size_t s = 0; s < n; ++s)
        if (in_r[s]) {
            if (s != 0) col[s] = next_col++;
            r_states.push_back(static_cast<std::uint32_t>(s));
        }
    const std::size_t m = r_states.size();
    const std::int32_t gain_col = static_cast<std::int32_t>(m) - 1;

    Eigen::VectorXd rhs(m);
    Eigen::VectorXd x(m);
    auto fill_row = [&](auto&& emit, std::size_t row, std::uint32_t s) {
        const auto& act = action_entry(mdp, s, policy[s]);
        emit(row, gain_col, 1.0);
        if (col[s] >= 0) emit(row, col[s], 1.0);
        for (std::uint32_t k = act.arc_begin; k < act.arc_end; ++k) {
            const auto& arc = mdp.arcs[k];
            if (col[arc.succ] >= 0) emit(row, col[arc.succ], -arc.prob);
        }
        rhs(row) = act.stage;
    };

    double max_residual = 0.0;
    if (m <= 2500) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
        for (std::size_t row = 0; row < m; ++row)
            fill_row([&](std::size_t r, std::int32_t c, double v) { A(r, c) += v; }, row,
                     r_states[row]);
        x = Eigen::PartialPivLU<Eigen::MatrixXd>(A).solve(rhs);
        max_residual = (A * x - rhs).cwiseAbs().maxCoeff();
    } else {
        std::vector<Eigen::Triplet<double>> trips;
        for (std::size_t row = 0; row < m; ++row)
            fill_row(
                [&](std::size_t r, std::int32_t c, double v) {
                    trips.emplace_back(static_cast<int>(r), c, v);
                },
                row, r_states[row]);
        Eigen::SparseMatrix<double> A(m, m);
        A.setFromTriplets(trips.begin(), trips.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(A);
        if (lu.info() != Eigen::Success)
            throw ConvergenceError(
                "policy evaluation system is singular; the chain restricted to the "
                "class reached from the reference state appears reducible",
                std::numeric_limits<double>::quiet_NaN());
        x = lu.solve(rhs);
        max_residual = (A * x - rhs).cwiseAbs().maxCoeff();
    }
    const double rhs_scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    if (!std::isfinite(max_residual) || max_residual > 1e-7 * rhs_scale)
        throw ConvergenceError(
            "policy evaluation system is singular; the chain restricted to the "
            "class reached from the reference state appears reducible",
            max_residual);

    EvalOutcome out;
    out.gain = x(gain_col);
    out.bias.assign(n, 0.0);
    out.stable.assign(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
        if (!in_r[s]) continue;
        out.stable[s] = 1;
        out.bias[s] = (col[s] >= 0) ? x(col[s]) : 0.0;
    }

    // extend bias to states outside the reached set: damped sweeps of the
    // fixed-policy equation, holding the solved values
    std::vector<std::uint32_t> outside;
    for (std::size_t s = 0; s < n; ++s)
        if (!in_r[s]) outside.push_back(static_cast<std::uint32_t>(s));
    if (!outside.empty()) {
        const double sweep_tol = 1e-11 * std::max(1.0, rhs_scale);
        double change = std::numeric_limits<double>::infinity();
        for (int sweep = 0; sweep < 5000 && change > sweep_tol; ++sweep) {
            change = 0.0;
            for (std::uint32_t s : outside) {
                const auto& act = action_entry(mdp, s, policy[s]);
                double ev = 0.0;
                for (std::uint32_t k = act.arc_begin; k < act.arc_end; ++k)
                    ev += mdp.arcs[k].prob * out.bias[mdp.arcs[k].succ];
                const double next = act.stage - out.gain + ev;
                change = std::max(change, std::abs(next - out.bias[s]));
                out.bias[s] = next;
            }
        }
        for (std::uint32_t s : outside) out.stable[s] = (change <= sweep_tol);
    }
    return out;
}

std::vector<int> initial_greedy_policy(const GenericMdp& mdp) {
    std::vector<int> policy(mdp.state_count());
    for (std::size_t s = 0; s < mdp.state_count(); ++s) {
        const auto& st = mdp.states[s];
        double best = std::numeric_limits<double>::infinity();
        int best_a = -1;
        for (std::uint32_t ai = st.act_begin; ai < st.act_end; ++ai) {
            const auto& act = mdp.actions[ai];
            if (act.stage < best) {
                best = act.stage;
                best_a = act.action_id;
            }
        }
        policy[s] = best_a;
    }
    return policy;
}

}  // namespace

void GenericMdp::validate() const {
    for (const auto& st : states) {
        if (st.act_begin >= st.act_end)
            throw InvalidRequestError("state without feasible actions");
        for (std::uint32_t ai = st.act_begin; ai < st.act_end; ++ai) {
            const auto& act = actions[ai];
            double sum = 0.0;
            for (std::uint32_t k = act.arc_begin; k < act.arc_end; ++k) {
                if (arcs[k].succ >= states.size())
                    throw InvalidRequestError("arc points outside the state space");
                sum += arcs[k].prob;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw InvalidRequestError("successor probabilities do not sum to 1");
        }
    }
}

GenericMdp expand_model(const MdpModel& model, Objective objective,
                        std::span<const double> weights) {
    const std::size_t n = model.state_count();
    const std::size_t combos = model.channel_combo_count();
    const std::size_t action_count = model.device_count() + 1;

    std::size_t arc_estimate = 0;
    for (std::size_t s = 0; s < n; ++s)
        arc_estimate += static_cast<std::size_t>(std::popcount(model.feasible_mask(s))) * combos;
    if (arc_estimate > 20'000'000)
        throw CapacityError(
            "expanded transition table would need " + std::to_string(arc_estimate) +
            " arcs; use relative value iteration at this scale");

    std::vector<double> stage_skel;
    if (objective == Objective::AoI) stage_skel = model.skeleton_costs(weights);

    GenericMdp g;
    g.states.resize(n);
    g.actions.reserve(arc_estimate / combos);
    g.arcs.reserve(arc_estimate);
    const double prob = 1.0 / static_cast<double>(combos);
    for (std::size_t s = 0; s < n; ++s) {
        g.states[s].act_begin = static_cast<std::uint32_t>(g.actions.size());
        const std::uint32_t mask = model.feasible_mask(s);
        for (std::size_t a = 0; a < action_count; ++a) {
            if (!(mask & (1u << a))) continue;
            GenericMdp::ActionEntry act;
            act.action_id = static_cast<int>(a);
            act.stage = (objective == Objective::AoI)
                            ? stage_skel[s / combos]
                            : (a == 0 ? 0.0 : -model.config().devices[a - 1].packet_size);
            act.arc_begin = static_cast<std::uint32_t>(g.arcs.size());
            const std::size_t base =
                static_cast<std::size_t>(model.successor_skeleton(s, static_cast<int>(a))) *
                combos;
            for (std::size_t c = 0; c < combos; ++c)
                g.arcs.push_back({static_cast<std::uint32_t>(base + c), prob});
            act.arc_end = static_cast<std::uint32_t>(g.arcs.size());
            g.actions.push_back(act);
        }
        g.states[s].act_end = static_cast<std::uint32_t>(g.actions.size());
    }
    return g;
}

namespace {

SolveResult finish_minimize(RviRaw raw, Objective objective) {
    SolveResult r;
    r.objective = objective;
    r.iterations = raw.iterations;
    r.residual = raw.span;
    r.policy.actions = std::move(raw.policy);
    if (objective == Objective::Throughput) {
        r.gain = -raw.gain;
        r.relative_values.resize(raw.values.size());
        for (std::size_t s = 0; s < raw.values.size(); ++s)
            r.relative_values[s] = -raw.values[s];
    } else {
        r.gain = raw.gain;
        r.relative_values = std::move(raw.values);
    }
    return r;
}

void attach_reached_structured(const MdpModel& model, SolveResult& r);
void attach_reached_generic(const GenericMdp& mdp, SolveResult& r) {
    r.reached = reachable_under_policy(mdp, r.policy.actions);
}

SolveResult pia_minimize(const GenericMdp& mdp, const SolverOptions& options,
                         Objective objective) {
    GenericBackend backend(mdp);
    const double tol = resolve_tol(options.tol, backend.stage_scale());
    const double improve_margin = 1e-12 * std::max(1.0, backend.stage_scale());

    std::vector<int> policy = initial_greedy_policy(mdp);
    EvalOutcome eval;
    std::size_t iterations = 0;
    for (long it = 1;; ++it) {
        if (it > options.max_policy_iterations)
            throw ConvergenceError("policy iteration did not stabilize within " +
                                       std::to_string(options.max_policy_iterations) +
                                       " improvement steps",
                                   std::numeric_limits<double>::quiet_NaN());
        iterations = static_cast<std::size_t>(it);
        eval = evaluate_exact(mdp, policy);

        backend.begin_pass(eval.bias);
        bool changed = false;
        for (std::size_t s = 0; s < mdp.state_count(); ++s) {
            const auto& cur = action_entry(mdp, s, policy[s]);
            double q_cur = cur.stage;
            for (std::uint32_t k = cur.arc_begin; k < cur.arc_end; ++k)
                q_cur += mdp.arcs[k].prob * eval.bias[mdp.arcs[k].succ];
            int best_a = -1;
            const double q_best = backend.best(s, 1.0, &best_a);
            if (best_a != policy[s] && q_best < q_cur - improve_margin) {
                policy[s] = best_a;
                changed = true;
            }
        }
        if (!changed) break;
    }

    // deterministic final tie-break: lowest action index attaining the backup
    backend.begin_pass(eval.bias);
    double residual = 0.0;
    const auto in_r = reachable_under_policy(mdp, policy);
    for (std::size_t s = 0; s < mdp.state_count(); ++s) {
        int best_a = -1;
        const double q_best = backend.best(s, 1.0, &best_a);
        policy[s] = best_a;
        if (in_r[s])
            residual = std::max(residual, std::abs(q_best - eval.bias[s] - eval.gain));
    }

    RviRaw raw;
    raw.values = std::move(eval.bias);
    raw.policy = std::move(policy);
    raw.gain = eval.gain;
    raw.iterations = iterations;
    raw.span = residual;  // exact evaluation leaves only linear-solve noise
    (void)tol;
    SolveResult r = finish_minimize(std::move(raw), objective);
    attach_reached_generic(mdp, r);
    return r;
}

}  // namespace

SolveResult relative_value_iteration(const GenericMdp& mdp, const SolverOptions& options) {
    mdp.validate();
    GenericBackend backend(mdp);
    const double tol = resolve_tol(options.tol, backend.stage_scale());
    RviRaw raw = rvi_core(backend, tol, options.max_iter, options.damping);
    SolveResult r = finish_minimize(std::move(raw), Objective::AoI);
    attach_reached_generic(mdp, r);
    return r;
}

SolveResult policy_iteration(const GenericMdp& mdp, const SolverOptions& options) {
    mdp.validate();
    return pia_minimize(mdp, options, Objective::AoI);
}

SolveResult relative_value_iteration(const MdpModel& model, Objective objective,
                                     std::span<const double> weights,
                                     const SolverOptions& options) {
    StructuredBackend backend(model, objective, weights);
    const double tol = resolve_tol(options.tol, backend.stage_scale());
    RviRaw raw = rvi_core(backend, tol, options.max_iter, options.damping);
    SolveResult r = finish_minimize(std::move(raw), objective);
    attach_reached_structured(model, r);
    return r;
}

SolveResult policy_iteration(const MdpModel& model, Objective objective,
                             std::span<const double> weights,
                             const SolverOptions& options) {
    const GenericMdp expanded = expand_model(model, objective, weights);
    SolveResult r = pia_minimize(expanded, options, objective);
    r.objective = objective;
    attach_reached_structured(model, r);
    return r;
}

namespace {

// Aggregated skeleton-level chain of a fixed policy: row per skeleton with
// (successor skeleton, probability) entries, channel redraw marginalized out.
struct SkeletonChain {
    std::vector<std::uint32_t> row_ptr;
    std::vector<std::pair<std::uint32_t, double>> entries;
};

SkeletonChain build_skeleton_chain(const MdpModel& model, const Policy& policy) {
    const std::size_t skels = model.skeleton_count();
    const std::size_t combos = model.channel_combo_count();
    const std::size_t actions = model.device_count() + 1;
    SkeletonChain chain;
    chain.row_ptr.assign(skels + 1, 0);
    chain.entries.reserve(skels * std::min<std::size_t>(combos, 16));
    std::vector<std::pair<std::uint32_t, std::uint32_t>> counts;
    for (std::size_t skel = 0; skel < skels; ++skel) {
        counts.clear();
        for (std::size_t c = 0; c < combos; ++c) {
            const std::size_t s = skel * combos + c;
            const int a = policy.actions[s];
            if (a < 0 || a >= static_cast<int>(actions) ||
                !model.is_feasible(s, Action::from_index(a)))
                throw InvalidRequestError("policy assigns an infeasible action at state " +
                                          std::to_string(s));
            counts.emplace_back(model.successor_skeleton(s, a), 1);
        }
        std::sort(counts.begin(), counts.end());
        const double inv = 1.0 / static_cast<double>(combos);
        for (std::size_t i = 0; i < counts.size();) {
            std::size_t j = i;
            std::uint32_t total = 0;
            while (j < counts.size() && counts[j].first == counts[i].first)
                total += counts[j++].second;
            chain.entries.emplace_back(counts[i].first, total * inv);
            i = j;
        }
        chain.row_ptr[skel + 1] = static_cast<std::uint32_t>(chain.entries.size());
    }
    return chain;
}

void attach_reached_structured(const MdpModel& model, SolveResult& r) {
    const SkeletonChain chain = build_skeleton_chain(model, r.policy);
    const std::size_t skels = model.skeleton_count();
    const std::size_t combos = model.channel_combo_count();
    // skeletons entered in >= 1 steps from the reference state's skeleton
    std::vector<std::uint8_t> entered(skels, 0);
    std::queue<std::uint32_t> frontier;
    auto push_succ = [&](std::uint32_t skel) {
        for (std::uint32_t k = chain.row_ptr[skel]; k < chain.row_ptr[skel + 1]; ++k) {
            const std::uint32_t succ = chain.entries[k].first;
            if (!entered[succ]) {
                entered[succ] = 1;
                frontier.push(succ);
            }
        }
    };
    push_succ(0);
    while (!frontier.empty()) {
        const std::uint32_t skel = frontier.front();
        frontier.pop();
        push_succ(skel);
    }
    r.reached.assign(model.state_count(), 0);
    r.reached[0] = 1;
    for (std::size_t skel = 0; skel < skels; ++skel) {
        if (!entered[skel]) continue;
        std::fill_n(r.reached.begin() + skel * combos, combos, std::uint8_t{1});
    }
}

// Tarjan strongly connected components, iterative, restricted to `alive`.
std::vector<std::vector<std::uint32_t>> closed_components(const SkeletonChain& chain,
                                                          const std::vector<std::uint8_t>& alive) {
    const std::size_t n = alive.size();
    std::vector<std::int32_t> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<std::uint8_t> on_stack(n, 0);
    std::vector<std::uint32_t> stack;
    std::vector<std::vector<std::uint32_t>> comps;
    std::int32_t counter = 0;

    struct Frame {
        std::uint32_t v;
        std::uint32_t edge;
    };
    std::vector<Frame> call;
    for (std::uint32_t root = 0; root < n; ++root) {
        if (!alive[root] || index[root] >= 0) continue;
        call.push_back({root, chain.row_ptr[root]});
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            Frame& f = call.back();
            if (f.edge < chain.row_ptr[f.v + 1]) {
                const std::uint32_t w = chain.entries[f.edge++].first;
                if (!alive[w]) continue;
                if (index[w] < 0) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.push_back({w, chain.row_ptr[w]});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
            } else {
                if (low[f.v] == index[f.v]) {
                    comps.emplace_back();
                    std::uint32_t w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on_stack[w] = 0;
                        comp[w] = static_cast<std::int32_t>(comps.size()) - 1;
                        comps.back().push_back(w);
                    } while (w != f.v);
                }
                const std::uint32_t child = f.v;
                call.pop_back();
                if (!call.empty())
                    low[call.back().v] = std::min(low[call.back().v], low[child]);
            }
        }
    }
    // keep components with no edge leaving them
    std::vector<std::vector<std::uint32_t>> closed;
    for (const auto& c : comps) {
        bool leaves = false;
        for (std::uint32_t v : c) {
            for (std::uint32_t k = chain.row_ptr[v]; k < chain.row_ptr[v + 1] && !leaves; ++k) {
                const std::uint32_t w = chain.entries[k].first;
                if (alive[w] && comp[w] != comp[v]) leaves = true;
            }
            if (leaves) break;
        }
        if (!leaves) closed.push_back(c);
    }
    return closed;
}

}  // namespace

PolicyEvaluation evaluate_policy(const MdpModel& model, const Policy& policy,
                                 std::span<const double> weights) {
    if (policy.actions.size() != model.state_count())
        throw InvalidRequestError("policy arity does not match the model");
    if (weights.size() != model.device_count())
        throw InvalidConfigError("weights arity mismatch");

    const SkeletonChain chain = build_skeleton_chain(model, policy);
    const std::size_t skels = model.skeleton_count();
    const std::size_t combos = model.channel_combo_count();
    const std::size_t K = model.device_count();

    // reachable skeletons from the reference skeleton
    std::vector<std::uint8_t> reachable(skels, 0);
    {
        std::queue<std::uint32_t> frontier;
        reachable[0] = 1;
        frontier.push(0);
        while (!frontier.empty()) {
            const std::uint32_t skel = frontier.front();
            frontier.pop();
            for (std::uint32_t k = chain.row_ptr[skel]; k < chain.row_ptr[skel + 1]; ++k) {
                const std::uint32_t succ = chain.entries[k].first;
                if (!reachable[succ]) {
                    reachable[succ] = 1;
                    frontier.push(succ);
                }
            }
        }
    }

    PolicyEvaluation out;
    out.reachable_skeletons =
        static_cast<std::size_t>(std::count(reachable.begin(), reachable.end(), 1));

    // damped power iteration on the skeleton marginal; the full stationary
    // law factorizes as mu(skeleton) x uniform(channels)
    std::vector<double> mu(skels, 0.0), mu_next(skels, 0.0);
    mu[0] = 1.0;
    const long max_power_iters = 20000;
    bool converged = false;
    for (long it = 1; it <= max_power_iters; ++it) {
        std::fill(mu_next.begin(), mu_next.end(), 0.0);
        for (std::size_t skel = 0; skel < skels; ++skel) {
            const double mass = mu[skel];
            if (mass == 0.0) continue;
            for (std::uint32_t k = chain.row_ptr[skel]; k < chain.row_ptr[skel + 1]; ++k)
                mu_next[chain.entries[k].first] += mass * chain.entries[k].second;
        }
        double tv = 0.0;
        for (std::size_t skel = 0; skel < skels; ++skel) {
            mu_next[skel] = 0.5 * mu_next[skel] + 0.5 * mu[skel];
            tv += std::abs(mu_next[skel] - mu[skel]);
        }
        mu.swap(mu_next);
        out.iterations = static_cast<std::size_t>(it);
        if (0.5 * tv <= 1e-12) {
            converged = true;
            break;
        }
    }

    if (!converged) {
        if (out.reachable_skeletons >= 50'000)
            throw ConvergenceError(
                "stationary distribution iteration did not reach 1e-12 total variation "
                "and the reached class is too large for the exact fallback",
                0.0);
        const auto closed = closed_components(chain, reachable);
        if (closed.size() != 1)
            throw ConvergenceError(
                "policy-induced chain has " + std::to_string(closed.size()) +
                    " closed recurrent classes reachable from the reference state; "
                    "expected a unichain model",
                0.0);
        const auto& cls = closed.front();
        const std::size_t m = cls.size();
        std::vector<std::int32_t> col(skels, -1);
        for (std::size_t i = 0; i < m; ++i) col[cls[i]] = static_cast<std::int32_t>(i);
        // stationary law of the class: (P^T - I) pi = 0 with the last row
        // replaced by the normalization sum(pi) = 1
        Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
        b(m - 1) = 1.0;
        Eigen::VectorXd pi(m);
        if (m <= 2500) {
            Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
            for (std::size_t i = 0; i < m; ++i) {
                const std::uint32_t skel = cls[i];
                A(col[skel], col[skel]) -= 1.0;
                for (std::uint32_t k = chain.row_ptr[skel]; k < chain.row_ptr[skel + 1]; ++k)
                    A(col[chain.entries[k].first], col[skel]) += chain.entries[k].second;
            }
            for (std::size_t j = 0; j < m; ++j) A(m - 1, j) = 1.0;
            pi = Eigen::PartialPivLU<Eigen::MatrixXd>(A).solve(b);
        } else {
            const std::int32_t last = static_cast<std::int32_t>(m) - 1;
            std::vector<Eigen::Triplet<double>> trips;
            for (std::size_t i = 0; i < m; ++i) {
                const std::uint32_t skel = cls[i];
                if (col[skel] != last) trips.emplace_back(col[skel], col[skel], -1.0);
                for (std::uint32_t k = chain.row_ptr[skel]; k < chain.row_ptr[skel + 1]; ++k) {
                    const std::int32_t row = col[chain.entries[k].first];
                    if (row != last)
                        trips.emplace_back(row, col[skel], chain.entries[k].second);
                }
            }
            for (std::size_t j = 0; j < m; ++j)
                trips.emplace_back(last, static_cast<int>(j), 1.0);
            Eigen::SparseMatrix<double> A(m, m);
            A.setFromTriplets(trips.begin(), trips.end(),
                              [](double a, double v) { return a + v; });
            Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
            lu.compute(A);
            if (lu.info() != Eigen::Success)
                throw ConvergenceError("stationary-distribution system is singular", 0.0);
            pi = lu.solve(b);
        }
        std::fill(mu.begin(), mu.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) mu[cls[i]] = std::max(0.0, pi(i));
        out.used_exact_solve = true;
    }

    out.avg_aoi.assign(K, 0.0);
    double throughput = 0.0;
    const double inv_combos = 1.0 / static_cast<double>(combos);
    for (std::size_t skel = 0; skel < skels; ++skel) {
        const double mass = mu[skel];
        if (mass == 0.0) continue;
        for (std::size_t d = 0; d < K; ++d)
            out.avg_aoi[d] += mass * model.skeleton_age(skel, d);
        double bits = 0.0;
        for (std::size_t c = 0; c < combos; ++c) {
            const int a = policy.actions[skel * combos + c];
            if (a > 0) bits += model.config().devices[a - 1].packet_size;
        }
        throughput += mass * bits * inv_combos;
    }
    out.throughput_bits_per_slot = throughput;
    out.weighted_cost = 0.0;
    for (std::size_t d = 0; d < K; ++d) out.weighted_cost += weights[d] * out.avg_aoi[d];
    return out;
}

double bellman_residual(const GenericMdp& mdp, const SolveResult& result) {
    GenericBackend backend(mdp);
    // re-express in minimization form
    std::vector<double> values = result.relative_values;
    double gain = result.gain;
    if (result.objective == Objective::Throughput) {
        for (double& v : values) v = -v;
        gain = -gain;
    }
    backend.begin_pass(values);
    double residual = 0.0;
    for (std::size_t s = 0; s < mdp.state_count(); ++s)
        residual = std::max(residual,
                            std::abs(backend.best(s, 1.0, nullptr) - values[s] - gain));
    return residual;
}

double bellman_residual(const MdpModel& model, Objective objective,
                        std::span<const double> weights, const SolveResult& result) {
    StructuredBackend backend(model, objective, weights);
    std::vector<double> values = result.relative_values;
    double gain = result.gain;
    if (result.objective == Objective::Throughput) {
        for (double& v : values) v = -v;
        gain = -gain;
    }
    backend.begin_pass(values);
    double residual = 0.0;
    for (std::size_t s = 0; s < model.state_count(); ++s)
        residual = std::max(residual,
                            std::abs(backend.best(s, 1.0, nullptr) - values[s] - gain));
    return residual;
}

void write_solve_json(const MdpModel& model, const SolveResult& result,
                      const PolicyEvaluation& eval, std::ostream& out) {
    nlohmann::ordered_json j;
    j["gain"] = result.gain;
    j["objective"] = (result.objective == Objective::AoI) ? "aoi" : "throughput";
    j["iterations"] = result.iterations;
    j["residual"] = result.residual;
    j["per_device_avg_aoi"] = eval.avg_aoi;
    j["throughput_bits_per_slot"] = eval.throughput_bits_per_slot;
    j["states"] = model.state_count();
    j["reached_states"] =
        std::count(result.reached.begin(), result.reached.end(), std::uint8_t{1});
    out << j.dump(2) << '\n';
}

void write_policy_csv(const MdpModel& model, const Policy& policy, std::ostream& out) {
    if (policy.actions.size() != model.state_count())
        throw InvalidRequestError("policy arity does not match the model");
    const std::size_t K = model.device_count();
    const bool independent = model.config().channel_mode == ChannelMode::Independent;
    out << "state_idx";
    for (std::size_t d = 1; d <= K; ++d) {
        out << ",b_" << d;
        if (independent)
            out << ",hup_" << d << ",hdn_" << d;
        else
            out << ",h_" << d;
        out << ",a_" << d;
    }
    out << ",action\n";
    for (std::size_t s = 0; s < model.state_count(); ++s) {
        const SystemState st = model.decode(s);
        out << s;
        for (std::size_t d = 0; d < K; ++d) {
            out << ',' << st.battery[d];
            out << ',' << st.channel[d];
            if (independent) out << ',' << st.channel_down[d];
            out << ',' << st.aoi[d];
        }
        out << ',' << Action::from_index(policy.actions[s]).symbol() << '\n';
    }
}

}  // namespace aoisched
