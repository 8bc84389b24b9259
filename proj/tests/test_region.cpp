#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <sstream>

#include "aoisched/errors.hpp"
#include "aoisched/policy_analysis.hpp"
#include "aoisched/region.hpp"
#include "doctest.h"
#include "support/test_support.hpp"

using namespace aoisched;

namespace {

RegionPoint make_point(std::vector<double> aoi) {
    RegionPoint p;
    p.weights = {0.5, 0.5};
    p.avg_aoi = std::move(aoi);
    return p;
}

double max_aoi(const RegionPoint& p) {
    return *std::max_element(p.avg_aoi.begin(), p.avg_aoi.end());
}

double sum_aoi(const RegionPoint& p) {
    double s = 0.0;
    for (double a : p.avg_aoi) s += a;
    return s;
}

}  // namespace

TEST_CASE("pareto filtering") {
    SUBCASE("interior points fall away") {
        const std::vector<RegionPoint> pts{make_point({1, 3}), make_point({2, 2}),
                                           make_point({3, 1}), make_point({2.5, 2.5})};
        const auto frontier = pareto_frontier(pts);
        REQUIRE(frontier.size() == 3);
        for (const auto& p : frontier)
            CHECK((p.avg_aoi != std::vector<double>{2.5, 2.5}));
    }
    SUBCASE("a single point is its own frontier") {
        const auto frontier = pareto_frontier({make_point({4, 2})});
        CHECK(frontier.size() == 1);
    }
    SUBCASE("a strictly decreasing curve survives whole") {
        std::vector<RegionPoint> pts;
        for (int i = 0; i < 6; ++i) {
            pts.push_back(make_point({1.0 + i, 6.0 - i}));
            pts.back().weights = {i / 5.0, 1.0 - i / 5.0};
        }
        const auto frontier = pareto_frontier(pts);
        CHECK(frontier.size() == 6);
        CHECK(std::is_sorted(frontier.begin(), frontier.end(),
                             [](const RegionPoint& a, const RegionPoint& b) {
                                 return a.weights < b.weights;
                             }));
    }
    SUBCASE("failed points are dropped") {
        std::vector<RegionPoint> pts{make_point({1, 1})};
        pts.push_back(make_point({0.5, 0.5}));
        pts.back().failed = true;
        CHECK(pareto_frontier(pts).size() == 1);
    }
}

TEST_CASE("single-device sweeps collapse to one point") {
    const MdpModel m = MdpModel::build(testsup::tiny_single_config());
    const auto sweep = sweep_weights(m, 5);
    REQUIRE(sweep.size() == 1);  // the 1-simplex has a single vertex
    CHECK(sweep[0].weights == std::vector<double>{1.0});

    const RegionPoint s = sum_aoi_point(m);
    const RegionPoint f = min_max_point(m, 5, 2);
    CHECK(s.avg_aoi[0] == doctest::Approx(f.avg_aoi[0]).epsilon(1e-12));
    CHECK(f.label == "F");
    CHECK(s.label == "S");
}

TEST_CASE("two identical devices: mirror symmetry of the swept gains") {
    SystemConfig c = testsup::tiny_two_device_config();
    c.devices[1] = c.devices[0];
    const MdpModel m = MdpModel::build(c);
    const auto sweep = sweep_weights(m, 9);
    REQUIRE(sweep.size() == 9);
    for (const auto& p : sweep) REQUIRE(!p.failed);
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const auto& mirrored = sweep[sweep.size() - 1 - i];
        CHECK(sweep[i].weights[0] == doctest::Approx(mirrored.weights[1]).epsilon(1e-12));
        CHECK(sweep[i].gain == doctest::Approx(mirrored.gain).epsilon(1e-7));
    }
    const RegionPoint s = sum_aoi_point(m);
    CHECK(std::abs(s.avg_aoi[0] - s.avg_aoi[1]) <= 1.0);  // tie-breaking skew only
    const RegionPoint f = min_max_point(m, 9, 3);
    CHECK(std::abs(f.avg_aoi[0] - f.avg_aoi[1]) <= 1.0);
}

TEST_CASE("asymmetric pair: sweep structure and operating points") {
    const MdpModel m = MdpModel::build(testsup::tiny_two_device_config());
    const int grid = 9;
    const auto sweep = sweep_weights(m, grid);
    REQUIRE(sweep.size() == grid);
    for (const auto& p : sweep) {
        REQUIRE(!p.failed);
        for (std::size_t d = 0; d < 2; ++d) {
            CHECK(p.avg_aoi[d] >= 1.0 - 1e-9);
            CHECK(p.avg_aoi[d] <= m.config().devices[d].aoi_cap + 1e-9);
        }
    }

    SUBCASE("weight ordering moves the ages the right way") {
        for (std::size_t i = 1; i < sweep.size(); ++i)
            CHECK(sweep[i].avg_aoi[0] <= sweep[i - 1].avg_aoi[0] + 1e-9);
    }
    SUBCASE("every point supports its own weighted objective") {
        for (const auto& p : sweep)
            for (const auto& q : sweep) {
                double own = 0.0, other = 0.0;
                for (std::size_t d = 0; d < 2; ++d) {
                    own += p.weights[d] * p.avg_aoi[d];
                    other += p.weights[d] * q.avg_aoi[d];
                }
                CHECK(own <= other + 1e-6);
            }
    }
    SUBCASE("the nearer device ages less at the equal-weight point") {
        const RegionPoint s = sum_aoi_point(m);
        CHECK(s.avg_aoi[0] < s.avg_aoi[1]);
    }
    SUBCASE("operating-point optimality against the sweep") {
        const RegionPoint s = sum_aoi_point(m);
        const RegionPoint f = min_max_point(m, grid, 3);
        for (const auto& p : sweep) {
            CHECK(sum_aoi(s) <= sum_aoi(p) + 1e-6);
            CHECK(max_aoi(f) <= max_aoi(p) + 1e-6);
        }
        CHECK(sum_aoi(s) <= sum_aoi(f) + 1e-6);
        CHECK(max_aoi(f) <= max_aoi(s) + 1e-6);
    }
    SUBCASE("swept ages are reproduced by long simulations") {
        const auto small_sweep = sweep_weights(m, 5);
        for (const auto& p : small_sweep) {
            const SolveResult r =
                relative_value_iteration(m, Objective::AoI, p.weights);
            const SimulationResult sim =
                simulate_policy(m, r.policy, 1000000, 314159, std::nullopt, false);
            for (std::size_t d = 0; d < 2; ++d)
                CHECK(std::abs(sim.summary.avg_aoi[d] - p.avg_aoi[d]) <=
                      std::max(0.01 * p.avg_aoi[d], sim.summary.avg_aoi_halfwidth[d]));
        }
    }
}

TEST_CASE("full region computation labels exactly one S and one F") {
    RegionOptions options;
    options.grid = 9;
    options.refine = 2;
    options.threads = 2;
    const RegionResult region = compute_region(testsup::tiny_two_device_config(), options);
    REQUIRE(region.sweep.size() == 9);  // odd grid holds the equal-weight point

    int s_labels = 0, f_labels = 0;
    for (const auto& p : region.sweep) {
        if (p.label.find('S') != std::string::npos) ++s_labels;
        if (p.label.find('F') != std::string::npos) ++f_labels;
    }
    CHECK(s_labels == 1);
    CHECK(f_labels == 1);
    CHECK(region.sum.label == "S");
    CHECK(region.minmax.label == "F");
    CHECK(max_aoi(region.minmax) <= max_aoi(region.sum) + 1e-9);

    // the frontier is non-dominated and ordered by the first weight
    for (const auto& p : region.frontier)
        for (const auto& q : region.frontier) {
            const bool dominates = q.avg_aoi[0] <= p.avg_aoi[0] &&
                                   q.avg_aoi[1] <= p.avg_aoi[1] &&
                                   (q.avg_aoi[0] < p.avg_aoi[0] || q.avg_aoi[1] < p.avg_aoi[1]);
            CHECK(!dominates);
        }

    std::ostringstream csv;
    write_region_csv(region.sweep, 2, csv);
    std::istringstream lines(csv.str());
    std::string header;
    std::getline(lines, header);
    CHECK(header == "w_1,w_2,aoi_1,aoi_2,gain,label");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == region.sweep.size());
}

TEST_CASE("deterministic across thread counts") {
    const MdpModel m = MdpModel::build(testsup::tiny_two_device_config());
    const auto serial = sweep_weights(m, 7, {}, 1);
    const auto parallel = sweep_weights(m, 7, {}, 4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].weights == parallel[i].weights);
        CHECK(serial[i].gain == parallel[i].gain);  // bitwise: same solve either way
        CHECK(serial[i].avg_aoi == parallel[i].avg_aoi);
    }
}

TEST_CASE("harder physics shrink the region pointwise") {
    const MdpModel base = MdpModel::build(testsup::tiny_two_device_config());
    SystemConfig heavier = testsup::tiny_two_device_config();
    for (auto& d : heavier.devices) d.packet_size *= 1.25;
    const MdpModel heavy = MdpModel::build(heavier);

    const auto base_sweep = sweep_weights(base, 7);
    const auto heavy_sweep = sweep_weights(heavy, 7);
    REQUIRE(base_sweep.size() == heavy_sweep.size());
    for (std::size_t i = 0; i < base_sweep.size(); ++i)
        for (std::size_t d = 0; d < 2; ++d)
            CHECK(heavy_sweep[i].avg_aoi[d] >= base_sweep[i].avg_aoi[d] - 1e-6);
}

TEST_CASE("bad grids are rejected") {
    const MdpModel m = MdpModel::build(testsup::tiny_single_config());
    CHECK_THROWS_AS(sweep_weights(m, 1), InvalidRequestError);
    CHECK_THROWS_AS(min_max_point(m, 2, 1), InvalidRequestError);
    CHECK_THROWS_AS(pareto_frontier({}), InvalidRequestError);
}
