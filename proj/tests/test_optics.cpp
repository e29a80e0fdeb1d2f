#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dpr/optics.hpp"
#include "dpr/rng.hpp"
#include "support.hpp"

using namespace dpr;
using optics::Pulse;
using optics::PulseTrain;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("pulse stores power exactly and canonicalizes the phase") {
    Pulse p{1000.0, 0.0};
    CHECK(p.power_uw() == 1000.0);
    CHECK(p.phase_rad() == 0.0);

    Pulse wrapped{5.0, 2.0 * kPi};
    CHECK(wrapped.phase_rad() == 0.0);
    Pulse negative{5.0, -kPi / 2.0};
    CHECK(negative.phase_rad() == doctest::Approx(3.0 * kPi / 2.0));

    Pulse vacuum{0.0, 1.234};
    CHECK(vacuum.is_vacuum());
    CHECK(vacuum.phase_rad() == 0.0);

    CHECK_THROWS_AS(Pulse(-1.0, 0.0), std::invalid_argument);
}

TEST_CASE("quarter-turn phases are exact multiples of fl(pi/2)") {
    CHECK(optics::phase_from_quarter_turns(0) == 0.0);
    CHECK(optics::phase_from_quarter_turns(1) == kPi / 2.0);
    CHECK(optics::phase_from_quarter_turns(2) == kPi); // 2 * fl(pi/2) == fl(pi)
    CHECK(optics::phase_from_quarter_turns(4) == 0.0);
    CHECK(optics::phase_from_quarter_turns(-1) == 3.0 * (kPi / 2.0));
    // The interference code relies on these phase differences having exact
    // cosines at the +-1 extremes.
    CHECK(std::cos(optics::phase_from_quarter_turns(2)) == -1.0);
    CHECK(std::cos(0.0) == 1.0);
}

TEST_CASE("coupler_split: worked values and conservation") {
    // 1000 µW trigger train through a 50:50 coupler.
    auto [kept, tapped] = optics::coupler_split(Pulse{1000.0, 0.0}, 0.5);
    CHECK(kept.power_uw() == 500.0);
    CHECK(tapped.power_uw() == 500.0);

    // Identity split.
    auto [all, none] = optics::coupler_split(Pulse{123.0, 1.0}, 1.0);
    CHECK(all.power_uw() == 123.0);
    CHECK(none.power_uw() == 0.0);

    // Raised data-slot level.
    auto [k2, t2] = optics::coupler_split(Pulse{1500.0, 0.3}, 0.5);
    CHECK(k2.power_uw() == 750.0);
    CHECK(t2.power_uw() == 750.0);
    CHECK(k2.phase_rad() == t2.phase_rad());

    CHECK_THROWS_AS(optics::coupler_split(Pulse{1.0, 0.0}, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(optics::coupler_split(Pulse{1.0, 0.0}, -0.1), std::invalid_argument);

    Rng rng{7};
    for (int i = 0; i < 200; ++i) {
        const double power = 2000.0 * rng.unit();
        const double t = rng.unit();
        auto [a, b] = optics::coupler_split(Pulse{power, 0.0}, t);
        CHECK(a.power_uw() + b.power_uw() == doctest::Approx(power).epsilon(1e-15));
        CHECK(a.power_uw() >= 0.0);
        CHECK(b.power_uw() >= 0.0);
    }
}

TEST_CASE("mzi_port_powers: equal pulses in phase route everything constructively") {
    PulseTrain train{{Pulse{1000.0, 0.0}, Pulse{1000.0, 0.0}}};
    const auto ports = optics::mzi_port_powers(train);
    REQUIRE(ports.size() == 3);
    CHECK(ports.constructive_uw[0] == 250.0);
    CHECK(ports.destructive_uw[0] == 250.0);
    CHECK(ports.constructive_uw[1] == 1000.0);
    CHECK(ports.destructive_uw[1] == 0.0); // exact null
    CHECK(ports.constructive_uw[2] == 250.0);
    CHECK(ports.destructive_uw[2] == 250.0);
}

TEST_CASE("mzi_port_powers: pi phase difference routes to the destructive port") {
    PulseTrain train{{Pulse{640.0, 0.0}, Pulse{640.0, kPi}}};
    const auto ports = optics::mzi_port_powers(train);
    CHECK(ports.constructive_uw[1] == 0.0); // exact null
    CHECK(ports.destructive_uw[1] == 640.0);
}

TEST_CASE("mzi_port_powers: orthogonal phases split the power evenly") {
    // Two 500 µW pulses, pi/2 apart: each port sees P/2.
    PulseTrain train{{Pulse{500.0, 0.0}, Pulse{500.0, kPi / 2.0}}};
    const auto ports = optics::mzi_port_powers(train);
    CHECK(test::rel_err(ports.constructive_uw[1], 250.0) < 1e-12);
    CHECK(test::rel_err(ports.destructive_uw[1], 250.0) < 1e-12);

    // Unequal pulses, still orthogonal: (750+500)/4 at each port.
    PulseTrain mixed{{Pulse{500.0, 0.0}, Pulse{750.0, kPi / 2.0}}};
    const auto p2 = optics::mzi_port_powers(mixed);
    CHECK(test::rel_err(p2.constructive_uw[1], 312.5) < 1e-12);
    CHECK(test::rel_err(p2.destructive_uw[1], 312.5) < 1e-12);
}

TEST_CASE("mzi_port_powers: unequal in-phase pulses against the amplitude oracle") {
    PulseTrain train{{Pulse{500.0, 0.0}, Pulse{750.0, 0.0}}};
    const auto ports = optics::mzi_port_powers(train);
    const auto oracle = test::mzi_oracle({{500.0, 0.0}, {750.0, 0.0}});
    // Frozen from the oracle: (1250 ± 2*sqrt(375000)) / 4.
    CHECK(ports.constructive_uw[1] == doctest::Approx(618.6862178478973).epsilon(1e-12));
    CHECK(ports.destructive_uw[1] == doctest::Approx(6.3137821521027377).epsilon(1e-9));
    CHECK(test::rel_err(ports.constructive_uw[1], oracle.constructive[1]) < 1e-12);
    CHECK(std::abs(ports.destructive_uw[1] - oracle.destructive[1]) < 1e-9);
}

TEST_CASE("mzi_port_powers: empty and single-pulse trains") {
    const auto empty = optics::mzi_port_powers(PulseTrain{});
    REQUIRE(empty.size() == 1);
    CHECK(empty.constructive_uw[0] == 0.0);
    CHECK(empty.destructive_uw[0] == 0.0);

    const auto single = optics::mzi_port_powers(PulseTrain{{Pulse{100.0, 1.0}}});
    REQUIRE(single.size() == 2);
    // A lone pulse splits evenly at both output slots, phase-independent.
    CHECK(single.constructive_uw[0] == 25.0);
    CHECK(single.destructive_uw[0] == 25.0);
    CHECK(single.constructive_uw[1] == 25.0);
    CHECK(single.destructive_uw[1] == 25.0);
}

TEST_CASE("mzi_port_powers agrees with the amplitude oracle on random trains") {
    Rng rng{42};
    for (int it = 0; it < 500; ++it) {
        const std::size_t n = rng.below(16);
        std::vector<Pulse> pulses;
        std::vector<std::pair<double, double>> raw;
        for (std::size_t k = 0; k < n; ++k) {
            const double power = rng.bernoulli(0.2) ? 0.0 : 1500.0 * rng.unit();
            const double phase = 2.0 * kPi * rng.unit();
            pulses.emplace_back(power, phase);
            raw.emplace_back(pulses.back().power_uw(), pulses.back().phase_rad());
        }
        const auto ports = optics::mzi_port_powers(PulseTrain{pulses});
        const auto oracle = test::mzi_oracle(raw);
        REQUIRE(ports.size() == oracle.constructive.size());
        for (std::size_t k = 0; k < ports.size(); ++k) {
            CHECK(std::abs(ports.constructive_uw[k] - oracle.constructive[k]) <=
                  1e-9 * (1.0 + oracle.constructive[k]));
            CHECK(std::abs(ports.destructive_uw[k] - oracle.destructive[k]) <=
                  1e-9 * (1.0 + oracle.destructive[k]));
            CHECK(ports.constructive_uw[k] >= 0.0);
            CHECK(ports.destructive_uw[k] >= 0.0);
        }
    }
}

TEST_CASE("property: interferometer conserves energy to 1e-12") {
    Rng rng{2024};
    for (int it = 0; it < 2000; ++it) {
        const std::size_t n = 1 + rng.below(64);
        std::vector<Pulse> pulses;
        for (std::size_t k = 0; k < n; ++k) {
            const double power = rng.bernoulli(0.15) ? 0.0 : 2000.0 * rng.unit();
            pulses.emplace_back(power, 2.0 * kPi * rng.unit());
        }
        PulseTrain train{pulses};
        const auto ports = optics::mzi_port_powers(train);
        const double in = train.total_power_uw();
        const double out = ports.total_uw();
        if (in == 0.0) {
            CHECK(out == 0.0);
        } else {
            CHECK(test::rel_err(out, in) <= 1e-12);
        }
    }
}

TEST_CASE("property: a global phase shift leaves the port powers unchanged") {
    Rng rng{11};
    for (int it = 0; it < 200; ++it) {
        const std::size_t n = 1 + rng.below(32);
        const double shift = 20.0 * (rng.unit() - 0.5);
        std::vector<Pulse> pulses;
        std::vector<Pulse> shifted;
        for (std::size_t k = 0; k < n; ++k) {
            const double power = 1000.0 * rng.unit();
            const double phase = 2.0 * kPi * rng.unit();
            pulses.emplace_back(power, phase);
            shifted.emplace_back(power, phase + shift);
        }
        const auto a = optics::mzi_port_powers(PulseTrain{pulses});
        const auto b = optics::mzi_port_powers(PulseTrain{shifted});
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(std::abs(a.constructive_uw[k] - b.constructive_uw[k]) <=
                  1e-12 * (1.0 + a.constructive_uw[k]));
            CHECK(std::abs(a.destructive_uw[k] - b.destructive_uw[k]) <=
                  1e-12 * (1.0 + a.destructive_uw[k]));
        }
    }
}

TEST_CASE("property: adding pi to odd-indexed pulses swaps the interior ports") {
    Rng rng{13};
    for (int it = 0; it < 200; ++it) {
        const std::size_t n = 2 + rng.below(24);
        std::vector<Pulse> pulses;
        std::vector<Pulse> flipped;
        for (std::size_t k = 0; k < n; ++k) {
            const double power = 10.0 + 990.0 * rng.unit();
            const double phase = 2.0 * kPi * rng.unit();
            pulses.emplace_back(power, phase);
            flipped.emplace_back(power, phase + (k % 2 ? kPi : 0.0));
        }
        const auto a = optics::mzi_port_powers(PulseTrain{pulses});
        const auto b = optics::mzi_port_powers(PulseTrain{flipped});
        for (std::size_t k = 1; k < n; ++k) { // interior slots only
            CHECK(std::abs(a.constructive_uw[k] - b.destructive_uw[k]) <=
                  1e-12 * (1.0 + a.constructive_uw[k]));
            CHECK(std::abs(a.destructive_uw[k] - b.constructive_uw[k]) <=
                  1e-12 * (1.0 + a.destructive_uw[k]));
        }
    }
}

TEST_CASE("attenuate scales powers and keeps phases") {
    PulseTrain train{{Pulse{800.0, 0.4}, Pulse{200.0, 1.7}}};
    const auto quarter = optics::attenuate(train, 0.25);
    CHECK(quarter[0].power_uw() == 200.0);
    CHECK(quarter[1].power_uw() == 50.0);
    CHECK(quarter[0].phase_rad() == train[0].phase_rad());
    CHECK(quarter[1].phase_rad() == train[1].phase_rad());

    const auto same = optics::attenuate(train, 1.0);
    CHECK(same == train);

    const auto dark = optics::attenuate(train, 0.0);
    CHECK(dark[0].is_vacuum());
    CHECK(dark[1].is_vacuum());

    CHECK_THROWS_AS(optics::attenuate(train, 1.2), std::invalid_argument);
    CHECK_THROWS_AS(optics::attenuate(train, -0.5), std::invalid_argument);
}
