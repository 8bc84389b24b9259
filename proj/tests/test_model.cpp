#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "aoisched/errors.hpp"
#include "aoisched/model.hpp"
#include "doctest.h"
#include "support/test_support.hpp"

using namespace aoisched;

TEST_CASE("fading quantizer matches the closed forms") {
    const ChannelQuantizer q = quantize_fading(10);
    REQUIRE(q.boundaries.size() == 9);
    REQUIRE(q.representatives.size() == 10);

    // independent evaluation of the quantile edges and midpoints
    for (int k = 1; k <= 9; ++k)
        CHECK(q.boundaries[k - 1] == doctest::Approx(-std::log(1.0 - k / 10.0)).epsilon(1e-12));
    CHECK(q.boundaries[0] == doctest::Approx(0.10536051565782628).epsilon(1e-12));
    CHECK(q.boundaries[1] == doctest::Approx(0.22314355131420976).epsilon(1e-12));
    CHECK(q.boundaries[2] == doctest::Approx(0.35667494393873245).epsilon(1e-12));

    CHECK(q.representatives[0] == doctest::Approx(0.05268025782891314).epsilon(1e-12));
    CHECK(q.representatives[1] == doctest::Approx(0.16425203348601802).epsilon(1e-12));
    CHECK(q.representatives[2] == doctest::Approx(0.2899092476264711).epsilon(1e-12));
    // unbounded bin: conditional mean of exp(1) above the last edge
    CHECK(q.representatives[9] == doctest::Approx(3.302585092994046).epsilon(1e-12));

    for (double p : q.probabilities) CHECK(p == 0.1);
    double sum = 0.0;
    for (double p : q.probabilities) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("two-level quantizer is the median split") {
    const ChannelQuantizer q = quantize_fading(2);
    REQUIRE(q.boundaries.size() == 1);
    CHECK(q.boundaries[0] == doctest::Approx(0.6931471805599453).epsilon(1e-12));
    CHECK(q.representatives[0] == doctest::Approx(0.34657359027997264).epsilon(1e-12));
    CHECK(q.representatives[1] == doctest::Approx(1.6931471805599453).epsilon(1e-12));
    CHECK(q.probabilities[0] == 0.5);
    CHECK(q.probabilities[1] == 0.5);
}

TEST_CASE("quantizer rejects degenerate level counts") {
    CHECK_THROWS_AS(quantize_fading(1), InvalidConfigError);
    CHECK_THROWS_AS(quantize_fading(0), InvalidConfigError);
    CHECK_THROWS_AS(quantize_fading(-3), InvalidConfigError);
}

TEST_CASE("quantizer representatives sit inside their bins and increase") {
    for (int L : {2, 5, 10, 33}) {
        const ChannelQuantizer q = quantize_fading(L);
        for (int k = 0; k < L; ++k) {
            const double lo = (k == 0) ? 0.0 : q.boundaries[k - 1];
            CHECK(q.representatives[k] > lo);
            if (k < L - 1) CHECK(q.representatives[k] < q.boundaries[k]);
            if (k > 0) CHECK(q.representatives[k] > q.representatives[k - 1]);
        }
    }
}

TEST_CASE("quantizer mean approaches the distribution mean") {
    const ChannelQuantizer q = quantize_fading(100);
    double mean = 0.0;
    for (int k = 0; k < 100; ++k) mean += q.representatives[k] * q.probabilities[k];
    CHECK(std::abs(mean - 1.0) <= 0.05);
}

TEST_CASE("transmit quanta reproduce the reference single-device table") {
    const SystemConfig c = testsup::single_device_config();
    const std::vector<int> expected{12, 4, 3, 2, 2, 1, 1, 1, 1, 1};
    for (int level = 1; level <= 10; ++level)
        CHECK(tx_energy_quanta(c, 0, level) == expected[level - 1]);
    // the worst channel level needs more quanta than a full battery holds
    CHECK(tx_energy_quanta(c, 0, 1) > c.battery_levels - 1);
}

TEST_CASE("energy quantum of the reference device") {
    const SystemConfig c = testsup::single_device_config();
    CHECK(c.energy_quantum(0) == doctest::Approx(3.0e-4 / 9.0).epsilon(1e-15));
}

TEST_CASE("vanishing packets still cost one quantum") {
    SystemConfig c = testsup::single_device_config();
    c.devices[0].packet_size = 1e-9;
    for (int level = 1; level <= 10; ++level)
        CHECK(tx_energy_quanta(c, 0, level) == 1);
}

TEST_CASE("harvest quanta at the reference setup") {
    const SystemConfig c = testsup::single_device_config();
    const ChannelQuantizer q = quantize_fading(10);

    // independent arithmetic: eta * P * G * c0 * d^-beta * g * T / e_unit
    const double e_unit = 3.0e-4 / 9.0;
    for (int level : {1, 5}) {
        const double gain = c.antenna_gain * c.intercept * std::pow(40.0, -2.0) *
                            q.representatives[level - 1];
        const double harvested = 0.5 * c.dest_tx_power * gain * 1.0;
        CHECK(harvest_quanta(c, 0, level) == static_cast<int>(std::floor(harvested / e_unit)));
    }
    CHECK(harvest_quanta(c, 0, 1) == 0);
    CHECK(harvest_quanta(c, 0, 5) == 2);
}

TEST_CASE("zero efficiency harvests nothing") {
    SystemConfig c = testsup::single_device_config();
    c.harvest_efficiency = 0.0;
    for (int level = 1; level <= 10; ++level) CHECK(harvest_quanta(c, 0, level) == 0);
}

TEST_CASE("quanta tables are monotone in the channel level") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(10.0, 80.0);
    std::uniform_real_distribution<double> size(1e6, 2e7);
    for (int trial = 0; trial < 20; ++trial) {
        SystemConfig c = testsup::single_device_config();
        c.devices[0].distance = dist(rng);
        c.devices[0].packet_size = size(rng);
        for (int level = 2; level <= 10; ++level) {
            CHECK(tx_energy_quanta(c, 0, level) <= tx_energy_quanta(c, 0, level - 1));
            CHECK(harvest_quanta(c, 0, level) >= harvest_quanta(c, 0, level - 1));
        }
    }
}

TEST_CASE("packet growth and battery growth push the cost table as expected") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> size(1e6, 1.5e7);
    for (int trial = 0; trial < 10; ++trial) {
        SystemConfig base = testsup::single_device_config();
        base.devices[0].packet_size = size(rng);

        SystemConfig bigger_packets = base;
        bigger_packets.devices[0].packet_size *= 1.5;
        SystemConfig bigger_battery = base;
        bigger_battery.devices[0].battery_capacity *= 2.0;  // coarser quanta

        for (int level = 1; level <= 10; ++level) {
            CHECK(tx_energy_quanta(bigger_packets, 0, level) >=
                  tx_energy_quanta(base, 0, level));
            CHECK(tx_energy_quanta(bigger_battery, 0, level) <=
                  tx_energy_quanta(base, 0, level));
        }
    }
}

TEST_CASE("no-storage battery level is accepted but transmit never fits") {
    SystemConfig c = testsup::single_device_config();
    c.battery_levels = 1;
    c.validate();
    CHECK(std::isinf(c.energy_quantum(0)));
    for (int level = 1; level <= 10; ++level) {
        CHECK(harvest_quanta(c, 0, level) == 0);
        CHECK(tx_energy_quanta(c, 0, level) > c.battery_levels - 1);
    }
}

TEST_CASE("configuration validation rejects bad inputs") {
    auto broken = [] { return testsup::single_device_config(); };
    {
        SystemConfig c = broken();
        c.devices.clear();
        CHECK_THROWS_AS(c.validate(), InvalidConfigError);
    }
    {
        SystemConfig c = broken();
        c.devices[0].distance = -1.0;
        CHECK_THROWS_AS(c.validate(), InvalidConfigError);
    }
    {
        SystemConfig c = broken();
        c.devices[0].weight = 0.0;  // sum of weights must stay positive
        CHECK_THROWS_AS(c.validate(), InvalidConfigError);
    }
    {
        SystemConfig c = broken();
        c.harvest_efficiency = 1.5;
        CHECK_THROWS_AS(c.validate(), InvalidConfigError);
    }
    {
        SystemConfig c = broken();
        c.channel_levels = 1;
        CHECK_THROWS_AS(c.validate(), InvalidConfigError);
    }
    {
        SystemConfig c = broken();
        c.devices[0].aoi_cap = 0;
        CHECK_THROWS_AS(c.validate(), InvalidConfigError);
    }
    {
        SystemConfig c = broken();
        c.noise_power = 0.0;
        CHECK_THROWS_AS(c.validate(), InvalidConfigError);
    }
}

TEST_CASE("device and level indices are checked") {
    const SystemConfig c = testsup::single_device_config();
    CHECK_THROWS_AS(tx_energy_quanta(c, 1, 1), InvalidRequestError);
    CHECK_THROWS_AS(tx_energy_quanta(c, 0, 0), InvalidRequestError);
    CHECK_THROWS_AS(harvest_quanta(c, 0, 11), InvalidRequestError);
}
