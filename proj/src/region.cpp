#include "aoisched/region.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <functional>
#include <ostream>
#include <thread>

#include "aoisched/errors.hpp"

namespace aoisched {

namespace {

std::string fmt(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

// All simplex lattice points with m levels per axis (compositions of m-1),
// lexicographic by weight vector.
std::vector<std::vector<double>> simplex_grid(std::size_t dims, int m) {
    if (m < 2) throw InvalidRequestError("grid resolution must be >= 2");
    std::vector<std::vector<double>> grid;
    if (dims == 1) {
        grid.push_back({1.0});
        return grid;
    }
    const int total = m - 1;
    std::vector<int> levels(dims, 0);
    std::function<void(std::size_t, int)> descend = [&](std::size_t d, int used) {
        if (d == dims - 1) {
            levels[d] = total - used;
            std::vector<double> w(dims);
            for (std::size_t i = 0; i < dims; ++i)
                w[i] = static_cast<double>(levels[i]) / total;
            grid.push_back(std::move(w));
            return;
        }
        for (int v = 0; v + used <= total; ++v) {
            levels[d] = v;
            descend(d + 1, used + v);
        }
    };
    descend(0, 0);
    std::sort(grid.begin(), grid.end());
    return grid;
}

RegionPoint solve_point(const MdpModel& model, const std::vector<double>& weights,
                        const SolverOptions& solver) {
    RegionPoint point;
    point.weights = weights;
    try {
        const SolveResult r =
            relative_value_iteration(model, Objective::AoI, weights, solver);
        const PolicyEvaluation eval = evaluate_policy(model, r.policy, weights);
        point.avg_aoi = eval.avg_aoi;
        point.gain = r.gain;
    } catch (const std::exception& e) {
        point.failed = true;
        point.error = e.what();
    }
    return point;
}

std::vector<RegionPoint> solve_points(const MdpModel& model,
                                      const std::vector<std::vector<double>>& weight_list,
                                      const SolverOptions& solver, int threads) {
    std::vector<RegionPoint> points(weight_list.size());
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers =
        std::min<std::size_t>(weight_list.size(),
                              threads > 0 ? static_cast<unsigned>(threads) : hw);
    if (workers <= 1) {
        for (std::size_t i = 0; i < weight_list.size(); ++i)
            points[i] = solve_point(model, weight_list[i], solver);
        return points;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= weight_list.size()) return;
                points[i] = solve_point(model, weight_list[i], solver);
            }
        });
    for (auto& t : pool) t.join();
    return points;
}

double max_aoi(const RegionPoint& p) {
    return *std::max_element(p.avg_aoi.begin(), p.avg_aoi.end());
}

bool weights_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > 1e-12) return false;
    return true;
}

}  // namespace

std::vector<RegionPoint> sweep_weights(const MdpModel& model, int grid,
                                       const SolverOptions& solver, int threads) {
    return solve_points(model, simplex_grid(model.device_count(), grid), solver, threads);
}

std::vector<RegionPoint> sweep_weights(const SystemConfig& config, int grid,
                                       const SolverOptions& solver, int threads) {
    return sweep_weights(MdpModel::build(config), grid, solver, threads);
}

std::vector<RegionPoint> pareto_frontier(const std::vector<RegionPoint>& points) {
    std::vector<RegionPoint> alive;
    for (const RegionPoint& p : points)
        if (!p.failed) alive.push_back(p);
    if (alive.empty()) throw InvalidRequestError("no points to filter");
    std::vector<RegionPoint> kept;
    for (std::size_t i = 0; i < alive.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < alive.size() && !dominated; ++j) {
            if (i == j) continue;
            bool all_le = true, one_lt = false;
            for (std::size_t d = 0; d < alive[i].avg_aoi.size(); ++d) {
                if (alive[j].avg_aoi[d] > alive[i].avg_aoi[d]) all_le = false;
                if (alive[j].avg_aoi[d] < alive[i].avg_aoi[d]) one_lt = true;
            }
            dominated = all_le && one_lt;
        }
        if (!dominated) kept.push_back(alive[i]);
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const RegionPoint& a, const RegionPoint& b) {
                         return a.weights < b.weights;
                     });
    return kept;
}

RegionPoint sum_aoi_point(const MdpModel& model, const SolverOptions& solver) {
    const std::vector<double> equal(model.device_count(),
                                    1.0 / static_cast<double>(model.device_count()));
    RegionPoint p = solve_point(model, equal, solver);
    if (p.failed) throw ConvergenceError("sum-AoI point solve failed: " + p.error, 0.0);
    p.label = "S";
    return p;
}

RegionPoint sum_aoi_point(const SystemConfig& config, const SolverOptions& solver) {
    return sum_aoi_point(MdpModel::build(config), solver);
}

namespace {

RegionPoint min_max_from_sweep(const MdpModel& model,
                               const std::vector<RegionPoint>& sweep, int grid,
                               int refine, const SolverOptions& solver, int threads) {
    if (grid < 3) throw InvalidRequestError("min-max search needs grid >= 3");
    const std::size_t K = model.device_count();
    RegionPoint incumbent;
    incumbent.failed = true;
    for (const RegionPoint& p : sweep)
        if (!p.failed && (incumbent.failed || max_aoi(p) < max_aoi(incumbent)))
            incumbent = p;
    if (incumbent.failed)
        throw ConvergenceError("min-max search: every grid point failed", 0.0);
    if (K == 1) {
        incumbent.label = "F";
        return incumbent;
    }

    std::vector<std::vector<double>> seen;
    for (const RegionPoint& p : sweep) seen.push_back(p.weights);
    double delta = 1.0 / (grid - 1);
    for (int round = 0; round < refine; ++round) {
        std::vector<std::vector<double>> candidates;
        for (std::size_t i = 0; i < K; ++i) {
            for (std::size_t j = 0; j < K; ++j) {
                if (i == j) continue;
                for (double step : {delta, delta / 2.0}) {
                    std::vector<double> w = incumbent.weights;
                    if (w[j] < step) continue;
                    w[i] += step;
                    w[j] -= step;
                    bool fresh = true;
                    for (const auto& s : seen)
                        if (weights_equal(s, w)) {
                            fresh = false;
                            break;
                        }
                    if (fresh) {
                        candidates.push_back(w);
                        seen.push_back(w);
                    }
                }
            }
        }
        for (const RegionPoint& p : solve_points(model, candidates, solver, threads))
            if (!p.failed && max_aoi(p) < max_aoi(incumbent)) incumbent = p;
        delta /= 2.0;
    }
    incumbent.label = "F";
    return incumbent;
}

}  // namespace

RegionPoint min_max_point(const MdpModel& model, int grid, int refine,
                          const SolverOptions& solver, int threads) {
    const auto sweep = sweep_weights(model, grid, solver, threads);
    return min_max_from_sweep(model, sweep, grid, refine, solver, threads);
}

RegionPoint min_max_point(const SystemConfig& config, int grid, int refine,
                          const SolverOptions& solver, int threads) {
    return min_max_point(MdpModel::build(config), grid, refine, solver, threads);
}

RegionResult compute_region(const SystemConfig& config, const RegionOptions& options) {
    const MdpModel model = MdpModel::build(config);
    RegionResult result;
    result.sweep = sweep_weights(model, options.grid, options.solver, options.threads);
    result.minmax = min_max_from_sweep(model, result.sweep, options.grid, options.refine,
                                       options.solver, options.threads);
    result.sum = sum_aoi_point(model, options.solver);

    // label the sweep rows: S at the equal-weight row (appended if the grid
    // lacks it), F at the best grid row
    bool have_s = false;
    for (RegionPoint& p : result.sweep)
        if (!p.failed && weights_equal(p.weights, result.sum.weights)) {
            p.label = "S";
            have_s = true;
            break;
        }
    if (!have_s) result.sweep.push_back(result.sum);
    std::size_t best = result.sweep.size();
    for (std::size_t i = 0; i < result.sweep.size(); ++i) {
        const RegionPoint& p = result.sweep[i];
        if (p.failed) continue;
        if (best == result.sweep.size() || max_aoi(p) < max_aoi(result.sweep[best]))
            best = i;
    }
    if (best < result.sweep.size()) {
        if (result.sweep[best].label.empty())
            result.sweep[best].label = "F";
        else
            result.sweep[best].label += "F";  // S and F can coincide
    }
    result.frontier = pareto_frontier(result.sweep);
    return result;
}

void write_region_csv(const std::vector<RegionPoint>& points, std::size_t device_count,
                      std::ostream& out) {
    for (std::size_t d = 1; d <= device_count; ++d)
        out << "w_" << d << ',';
    for (std::size_t d = 1; d <= device_count; ++d)
        out << "aoi_" << d << ',';
    out << "gain,label\n";
    for (const RegionPoint& p : points) {
        if (p.failed) continue;
        for (double w : p.weights) out << fmt(w) << ',';
        for (double a : p.avg_aoi) out << fmt(a) << ',';
        out << fmt(p.gain) << ',' << p.label << '\n';
    }
}

}  // namespace aoisched
