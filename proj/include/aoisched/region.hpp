#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "aoisched/mdp.hpp"
#include "aoisched/solver.hpp"

namespace aoisched {

/// One operating point of the achievable-AoI region: the simplex weight
/// vector, the exact per-device average ages of the weight-optimal policy,
/// and the solver gain.
struct RegionPoint {
    std::vector<double> weights;
    std::vector<double> avg_aoi;
    double gain = 0.0;
    std::string label;  ///< "S", "F" or empty
    bool failed = false;
    std::string error;
};

struct RegionOptions {
    int grid = 21;    ///< points per simplex axis (m)
    int refine = 3;   ///< local refinement rounds for the min-max point
    int threads = 0;  ///< 0 = hardware concurrency
    SolverOptions solver;
};

/// Solves the weighted-age MDP on the uniform simplex grid with `grid` points
/// per axis; points are ordered by weight vector and failed solves are
/// flagged rather than aborting the sweep.
std::vector<RegionPoint> sweep_weights(const MdpModel& model, int grid,
                                       const SolverOptions& solver = {}, int threads = 0);
std::vector<RegionPoint> sweep_weights(const SystemConfig& config, int grid,
                                       const SolverOptions& solver = {}, int threads = 0);

/// Non-dominated subset (minimization, weak dominance with one strict
/// coordinate), stable order by first weight.
std::vector<RegionPoint> pareto_frontier(const std::vector<RegionPoint>& points);

/// Equal-weight optimum: the sum-AoI operating point, labeled "S".
RegionPoint sum_aoi_point(const MdpModel& model, const SolverOptions& solver = {});
RegionPoint sum_aoi_point(const SystemConfig& config, const SolverOptions& solver = {});

/// Grid search plus local refinement minimizing the maximum per-device
/// average age; labeled "F". Refinement halves the weight cell around the
/// incumbent `refine` times.
RegionPoint min_max_point(const MdpModel& model, int grid, int refine,
                          const SolverOptions& solver = {}, int threads = 0);
RegionPoint min_max_point(const SystemConfig& config, int grid, int refine,
                          const SolverOptions& solver = {}, int threads = 0);

/// Full region computation: sweep, frontier, and both operating points. The
/// sweep rows carry exactly one "S" and one "F" label (S solved separately
/// and appended when the grid lacks the equal-weight point, F labeling the
/// best grid point); `minmax` holds the refined point.
struct RegionResult {
    std::vector<RegionPoint> sweep;
    std::vector<RegionPoint> frontier;
    RegionPoint sum;
    RegionPoint minmax;
};

RegionResult compute_region(const SystemConfig& config, const RegionOptions& options = {});

/// CSV schema: "w_1,...,w_K,aoi_1,...,aoi_K,gain,label" (failed points are
/// skipped).
void write_region_csv(const std::vector<RegionPoint>& points, std::size_t device_count,
                      std::ostream& out);

}  // namespace aoisched
