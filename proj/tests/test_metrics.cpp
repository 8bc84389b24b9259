#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <sstream>

#include "aoisched/errors.hpp"
#include "aoisched/metrics.hpp"
#include "doctest.h"
#include "support/test_support.hpp"

using namespace aoisched;

namespace {

UpdateTrace periodic_trace(int n, double period, double delay) {
    std::vector<UpdatePacket> packets;
    for (int i = 0; i < n; ++i)
        packets.push_back({i * period, i * period + delay});
    return UpdateTrace(std::move(packets));
}

}  // namespace

TEST_CASE("trace construction enforces ordering") {
    CHECK_NOTHROW(UpdateTrace({{0.0, 1.0}, {2.0, 3.0}}));
    CHECK_NOTHROW(UpdateTrace({{0.0, 0.0}, {1.0, 1.0}}));  // zero system time is fine
    CHECK_THROWS_AS(UpdateTrace({{0.0, 1.0}, {0.0, 2.0}}), InvalidRequestError);
    CHECK_THROWS_AS(UpdateTrace({{0.0, 2.0}, {1.0, 1.5}}), InvalidRequestError);
    CHECK_THROWS_AS(UpdateTrace({{1.0, 0.5}}), InvalidRequestError);
}

TEST_CASE("age queries") {
    const UpdateTrace trace({{0.0, 1.0}});
    CHECK(aoi_at(trace, 1.0) == doctest::Approx(1.0));    // reset to the system time
    CHECK(aoi_at(trace, 2.5) == doctest::Approx(2.5));    // linear growth since t_gen = 0
    CHECK_THROWS_AS(aoi_at(trace, -0.5), InvalidRequestError);

    const UpdateTrace empty;
    CHECK(aoi_at(empty, 2.0, 5.0, 0.0) == doctest::Approx(7.0));
    CHECK_THROWS_AS(aoi_at(empty, 2.0), InvalidRequestError);  // start is required
}

TEST_CASE("average age of reference sawtooths") {
    // generation every 2 s, delivery 1 s later: the age oscillates 1 -> 3
    const UpdateTrace saw = periodic_trace(4, 2.0, 1.0);
    CHECK(average_aoi(saw, 1.0, 5.0) == doctest::Approx(2.0).epsilon(1e-12));

    // instantaneous delivery each second: symmetric 0 -> 1 sawtooth
    const UpdateTrace instant = periodic_trace(11, 1.0, 0.0);
    CHECK(average_aoi(instant, 0.0, 10.0) == doctest::Approx(0.5).epsilon(1e-12));

    // one packet, window [1, 3]: linear ramp from 1 to 3
    const UpdateTrace single({{0.0, 1.0}});
    CHECK(average_aoi(single, 1.0, 3.0) == doctest::Approx(2.0).epsilon(1e-12));

    CHECK_THROWS_AS(average_aoi(single, 3.0, 3.0), InvalidRequestError);
    CHECK_THROWS_AS(average_aoi(single, 3.0, 1.0), InvalidRequestError);
}

TEST_CASE("closed-form average age equals dense integration on random traces") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const UpdateTrace trace = testsup::random_trace(rng);
        const double start = trace.packets().front().generated;
        const double last = trace.packets().back().received;
        std::uniform_real_distribution<double> in_window(start, last);
        double a = in_window(rng), b = in_window(rng);
        if (a > b) std::swap(a, b);
        if (b - a < 1e-6) b = a + 1.0;
        const double got = average_aoi(trace, a, b);
        const double want = testsup::oracle_average_aoi(trace.packets(), a, b, 0.0, start);
        CHECK(std::abs(got - want) <= 1e-9 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("window concatenation is exact") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 50; ++trial) {
        const UpdateTrace trace = testsup::random_trace(rng);
        const double start = trace.packets().front().generated;
        const double end = trace.packets().back().received + 2.0;
        const double a = start, c = end, b = 0.5 * (a + c);
        const double whole = average_aoi(trace, a, c) * (c - a);
        const double split = average_aoi(trace, a, b) * (b - a) + average_aoi(trace, b, c) * (c - b);
        CHECK(std::abs(whole - split) <= 1e-9 * std::max(1.0, std::abs(whole)));
    }
}

TEST_CASE("peak age decomposition") {
    // X_2 = 2, T_2 = 1
    const UpdateTrace simple({{0.0, 1.0}, {2.0, 3.0}});
    const auto peaks = peak_aoi(simple);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0] == doctest::Approx(3.0));

    // instantaneous delivery with period p: every peak equals p
    const UpdateTrace instant = periodic_trace(6, 1.5, 0.0);
    for (double a : peak_aoi(instant)) CHECK(a == doctest::Approx(1.5));

    const UpdateTrace mixed({{0.0, 2.0}, {1.0, 2.5}, {3.0, 4.0}});
    const auto mixed_peaks = peak_aoi(mixed);
    REQUIRE(mixed_peaks.size() == 2);
    CHECK(mixed_peaks[0] == doctest::Approx(2.5));
    CHECK(mixed_peaks[1] == doctest::Approx(3.0));

    CHECK_THROWS_AS(peak_aoi(UpdateTrace({{0.0, 1.0}})), InvalidRequestError);
}

TEST_CASE("peak age is the left limit of the age at receptions") {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 50; ++trial) {
        const UpdateTrace trace = testsup::random_trace(rng);
        const auto peaks = peak_aoi(trace);
        for (std::size_t n = 2; n <= trace.size(); ++n) {
            const double eps = 1e-9;
            const double before = aoi_at(trace, trace.packets()[n - 1].received - eps);
            CHECK(std::abs(peaks[n - 2] - (before + eps)) <= 1e-6);
        }
    }
}

TEST_CASE("update values") {
    const UpdateTrace simple({{0.0, 1.0}, {2.0, 3.0}});
    CHECK(voiu(simple)[0] == doctest::Approx(2.0 / 3.0));

    for (double v : voiu(periodic_trace(6, 1.5, 0.0))) CHECK(v == doctest::Approx(1.0));

    const UpdateTrace slow({{0.0, 0.5}, {1.0, 10.0}});  // X = 1, T = 9
    CHECK(voiu(slow)[0] == doctest::Approx(0.1));
}

TEST_CASE("update-value identities on random traces") {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 200; ++trial) {
        const UpdateTrace trace = testsup::random_trace(rng);
        const auto peaks = peak_aoi(trace);
        const auto values = voiu(trace);
        for (std::size_t n = 2; n <= trace.size(); ++n) {
            const double x = trace.interarrival(n);
            const double t = trace.system_time(n);
            CHECK(peaks[n - 2] == x + t);  // exact arithmetic identity
            CHECK(values[n - 2] > 0.0);
            CHECK(values[n - 2] <= 1.0);
            CHECK((values[n - 2] == 1.0) == (t == 0.0));
        }
    }
}

TEST_CASE("age penalties") {
    const UpdateTrace saw = periodic_trace(4, 2.0, 1.0);

    SUBCASE("linear penalty reduces to the average age") {
        const double aoi = average_aoi(saw, 1.0, 5.0);
        const double coud = average_coud(saw, PenaltyFunction::linear(), 1.0, 5.0);
        CHECK(coud == doctest::Approx(aoi).epsilon(1e-12));
    }
    SUBCASE("quadratic penalty over the 1 -> 3 sawtooth") {
        const double coud = average_coud(saw, PenaltyFunction::polynomial(0, 0, 1), 1.0, 5.0);
        CHECK(coud == doctest::Approx(13.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("constant penalty") {
        const double coud = average_coud(saw, PenaltyFunction::constant(2.5), 1.0, 5.0);
        CHECK(coud == doctest::Approx(2.5).epsilon(1e-12));
    }
    SUBCASE("custom penalty against the quadrature oracle") {
        const PenaltyFunction cubic = PenaltyFunction::custom([](double a) { return a * a * a; });
        const double got = average_coud(saw, cubic, 1.0, 5.0);
        const double want = testsup::oracle_average_penalty(
            saw.packets(), [](double a) { return a * a * a; }, 1.0, 5.0, 0.0, 0.0);
        CHECK(got == doctest::Approx(want).epsilon(1e-7));
    }
    SUBCASE("non-monotone penalties are rejected at construction") {
        CHECK_THROWS_AS(PenaltyFunction::custom([](double a) { return -a; }),
                        InvalidRequestError);
        CHECK_THROWS_AS(PenaltyFunction::custom([](double a) { return std::cos(a); }),
                        InvalidRequestError);
        CHECK_THROWS_AS(PenaltyFunction::polynomial(-1.0, 1.0), InvalidRequestError);
    }
}

TEST_CASE("fcfs queue generator") {
    SUBCASE("no queueing when the service is faster than arrivals") {
        const UpdateTrace t = simulate_fcfs_queue([](auto&) { return 2.0; },
                                                  [](auto&) { return 1.0; }, 4, 1);
        for (std::size_t n = 0; n < 4; ++n) {
            CHECK(t.packets()[n].generated == doctest::Approx(2.0 * n));
            CHECK(t.packets()[n].received == doctest::Approx(2.0 * n + 1.0));
        }
    }
    SUBCASE("queue builds when the service is slower") {
        const UpdateTrace t = simulate_fcfs_queue([](auto&) { return 1.0; },
                                                  [](auto&) { return 2.0; }, 5, 1);
        for (std::size_t n = 1; n <= 5; ++n)
            CHECK(t.packets()[n - 1].received == doctest::Approx(2.0 * n));
    }
    SUBCASE("same seed, same trace") {
        auto exp_sampler = [](std::mt19937_64& rng) {
            return std::exponential_distribution<double>(1.3)(rng) + 1e-9;
        };
        const UpdateTrace a = simulate_fcfs_queue(exp_sampler, exp_sampler, 50, 99);
        const UpdateTrace b = simulate_fcfs_queue(exp_sampler, exp_sampler, 50, 99);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a.packets()[i].generated == b.packets()[i].generated);
            CHECK(a.packets()[i].received == b.packets()[i].received);
        }
    }
    SUBCASE("bad samplers and sizes are rejected") {
        CHECK_THROWS_AS(simulate_fcfs_queue([](auto&) { return 0.0; },
                                            [](auto&) { return 1.0; }, 3, 1),
                        InvalidRequestError);
        CHECK_THROWS_AS(simulate_fcfs_queue([](auto&) { return 1.0; },
                                            [](auto&) { return -2.0; }, 3, 1),
                        InvalidRequestError);
        CHECK_THROWS_AS(simulate_fcfs_queue([](auto&) { return 1.0; },
                                            [](auto&) { return 1.0; }, 0, 1),
                        InvalidRequestError);
    }
}

TEST_CASE("trace CSV round trip and validation") {
    std::mt19937_64 rng(46);
    const UpdateTrace trace = testsup::random_trace(rng);
    std::stringstream buf;
    write_trace_csv(trace, buf);
    const UpdateTrace loaded = read_trace_csv(buf);
    REQUIRE(loaded.size() == trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        CHECK(loaded.packets()[i].generated == trace.packets()[i].generated);
        CHECK(loaded.packets()[i].received == trace.packets()[i].received);
    }

    std::stringstream bad_header("time,gen,recv\n1,0,1\n");
    CHECK_THROWS_AS(read_trace_csv(bad_header), IoError);
    std::stringstream bad_order("n,t_gen,t_recv\n1,0,2\n2,1,1.5\n");
    CHECK_THROWS_AS(read_trace_csv(bad_order), InvalidRequestError);
    std::stringstream bad_numbering("n,t_gen,t_recv\n1,0,1\n3,2,3\n");
    CHECK_THROWS_AS(read_trace_csv(bad_numbering), IoError);
}

TEST_CASE("report CSVs have the declared shape") {
    const UpdateTrace saw = periodic_trace(4, 2.0, 1.0);
    std::stringstream summary;
    write_metrics_summary_csv(saw, PenaltyFunction::linear(), 1.0, 5.0, 0.0, summary);
    std::string line;
    std::getline(summary, line);
    CHECK(line == "metric,value");
    bool saw_avg = false, saw_coud = false;
    double avg = 0.0, coud = 0.0;
    while (std::getline(summary, line)) {
        const auto comma = line.find(',');
        const std::string key = line.substr(0, comma);
        if (key == "average_aoi") {
            saw_avg = true;
            avg = std::stod(line.substr(comma + 1));
        }
        if (key == "average_coud") {
            saw_coud = true;
            coud = std::stod(line.substr(comma + 1));
        }
    }
    CHECK(saw_avg);
    CHECK(saw_coud);
    CHECK(avg == doctest::Approx(2.0));
    CHECK(coud == doctest::Approx(avg));  // linear penalty

    std::stringstream packets;
    write_per_packet_csv(saw, packets);
    std::getline(packets, line);
    CHECK(line == "n,X,T,A,voiu");
    std::getline(packets, line);
    CHECK(line.substr(0, 2) == "1,");
    CHECK(line.find(",,") != std::string::npos);  // X/A/voiu excluded for the first packet
    int rows = 1;
    while (std::getline(packets, line)) ++rows;
    CHECK(rows == 4);
}
