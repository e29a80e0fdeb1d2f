#include <doctest.h>

#include <cmath>

#include "dpr/analysis.hpp"
#include "support.hpp"

using namespace dpr;
using analysis::FeasibilityReport;
using detectors::LinearModeConfig;
using protocols::DetectorId;
using protocols::Protocol;
using protocols::RunStatistics;

namespace {

LinearModeConfig linear(double p_never, double p_always) {
    LinearModeConfig cfg;
    cfg.p_never_uw = p_never;
    cfg.p_always_uw = p_always;
    return cfg;
}

RunStatistics make_stats(Protocol protocol, std::size_t slots,
                         std::size_t d_first, std::size_t d_second,
                         std::size_t pairs, std::size_t errors) {
    RunStatistics s;
    s.protocol = protocol;
    s.slots = slots;
    if (protocol == Protocol::dps) {
        s.clicks_by_detector[DetectorId::D0] = d_first;
        s.clicks_by_detector[DetectorId::D1] = d_second;
    } else {
        s.clicks_by_detector[DetectorId::DB] = d_first;
        s.clicks_by_detector[DetectorId::DM2] = d_second;
    }
    s.clicked_slots = d_first + d_second;
    s.sifted_pairs = pairs;
    s.sifted_errors = errors;
    if (pairs > 0) s.qber = static_cast<double>(errors) / static_cast<double>(pairs);
    return s;
}

} // namespace

TEST_CASE("check_dps_feasibility: worked values") {
    const auto ok = analysis::check_dps_feasibility(linear(400.0, 500.0), false);
    CHECK(ok.overall);
    REQUIRE(ok.entries.size() == 1);
    CHECK(ok.entries[0].lhs_uw == 500.0);
    CHECK(ok.entries[0].rhs_uw == 800.0);
    CHECK(ok.entries[0].margin_uw == 300.0);

    const auto bad = analysis::check_dps_feasibility(linear(400.0, 900.0), false);
    CHECK_FALSE(bad.overall); // 900 >= 800

    const auto relaxed = analysis::check_dps_feasibility(linear(400.0, 1500.0), true);
    CHECK(relaxed.overall); // 1500 < 1600
    CHECK(relaxed.relaxed_mode);
    const auto tight = analysis::check_dps_feasibility(linear(400.0, 1500.0), false);
    CHECK_FALSE(tight.overall);
}

TEST_CASE("check_cow_feasibility: worked values and one-monitor annotation") {
    const auto reference = analysis::check_cow_feasibility(linear(400.0, 500.0),
                                                      linear(600.0, 750.0), 0.5,
                                                      false, false);
    CHECK(reference.overall);
    const auto* a = reference.find("data_silence");
    REQUIRE(a != nullptr);
    CHECK(a->lhs_uw == 500.0);
    CHECK(a->rhs_uw == 600.0);
    CHECK(a->margin_uw == 100.0);
    const auto* b = reference.find("monitor_silence");
    REQUIRE(b != nullptr);
    CHECK(b->lhs_uw == 750.0);
    CHECK(b->rhs_uw == 800.0);
    CHECK(b->margin_uw == 50.0);
    const auto* pair = reference.find("monitor_pair");
    REQUIRE(pair != nullptr);
    CHECK(pair->satisfied); // 500 < 800
    CHECK(pair->note.empty());

    // Entry A violated: 500 >= 450.
    const auto bad_a = analysis::check_cow_feasibility(linear(400.0, 500.0),
                                                       linear(450.0, 750.0), 0.5,
                                                       false, false);
    CHECK_FALSE(bad_a.overall);
    CHECK_FALSE(bad_a.find("data_silence")->satisfied);

    // Entry B violated at the Table-1 bound: 900 >= 800.
    const auto bad_b = analysis::check_cow_feasibility(linear(400.0, 500.0),
                                                       linear(600.0, 900.0), 0.5,
                                                       false, false);
    CHECK_FALSE(bad_b.overall);
    CHECK_FALSE(bad_b.find("monitor_silence")->satisfied);

    const auto one_mon = analysis::check_cow_feasibility(linear(400.0, 500.0),
                                                         linear(600.0, 750.0), 0.5,
                                                         false, true);
    CHECK_FALSE(one_mon.find("monitor_silence")->note.empty());

    // The pulse-pair regime relaxes the splitting factor on both monitor-side
    // entries: a (400, 1200) monitor pair fails strict but passes relaxed.
    const auto strict = analysis::check_cow_feasibility(linear(400.0, 1200.0),
                                                        linear(1300.0, 1500.0), 0.5,
                                                        false, false);
    CHECK_FALSE(strict.find("monitor_pair")->satisfied); // 1200 >= 800
    CHECK_FALSE(strict.find("monitor_silence")->satisfied); // 1500 >= 800
    const auto relaxed = analysis::check_cow_feasibility(linear(400.0, 1200.0),
                                                         linear(1300.0, 1500.0), 0.5,
                                                         true, false);
    CHECK(relaxed.find("monitor_pair")->satisfied); // 1200 < 1600
    CHECK(relaxed.find("monitor_silence")->satisfied); // 1500 < 1600
    CHECK(relaxed.overall);

    CHECK_THROWS_AS(analysis::check_cow_feasibility(linear(400.0, 500.0),
                                                    linear(600.0, 750.0), 1.0,
                                                    false, false),
                    std::invalid_argument);
}

TEST_CASE("table1_rows: the four splitting ratios") {
    const double t_bs[] = {0.5, 0.8, 0.9, 0.95};
    const auto rows = analysis::table1_rows(t_bs, 400.0, 500.0);
    REQUIRE(rows.size() == 4);
    const double expected_never[] = {500.0, 2000.0, 4500.0, 9500.0};
    const double expected_always[] = {800.0, 3200.0, 7200.0, 15200.0};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(test::rel_err(rows[i].min_p_never_b_uw, expected_never[i]) < 1e-12);
        CHECK(test::rel_err(rows[i].max_p_always_b_uw, expected_always[i]) < 1e-12);
    }
    // t_b = 0.5 divides exactly; the other ratios carry ~1 ulp of error,
    // which the 6-significant-digit power formatting removes.
    CHECK(rows[0].min_p_never_b_uw == 500.0);
    CHECK(rows[0].max_p_always_b_uw == 800.0);

    const double bad[] = {1.0};
    CHECK_THROWS_AS(analysis::table1_rows(bad, 400.0, 500.0), std::invalid_argument);
}

TEST_CASE("property: requirement forms (direct vs rewritten) agree on verdicts") {
    Rng rng{654};
    for (int it = 0; it < 4000; ++it) {
        const double t_b = 0.05 + 0.9 * rng.unit();
        const double p_never_m = 100.0 + 900.0 * rng.unit();
        const double p_always_m = p_never_m * (1.0 + rng.unit());
        const double p_never_b = 100.0 + 9000.0 * rng.unit();
        const double p_always_b = p_never_b * (1.0 + rng.unit());

        const auto report = analysis::check_cow_feasibility(
            linear(p_never_m, p_always_m), linear(p_never_b, p_always_b), t_b,
            false, false);

        // Rewritten forms: bounds on the data-detector thresholds.
        const double ratio = t_b / (1.0 - t_b);
        const bool a_rewritten = p_never_b > ratio * p_always_m;
        const bool b_rewritten = p_always_b < 2.0 * ratio * p_never_m;
        CHECK(report.find("data_silence")->satisfied == a_rewritten);
        CHECK(report.find("monitor_silence")->satisfied == b_rewritten);
    }
}

TEST_CASE("property: feasibility verdicts are scale invariant") {
    Rng rng{321};
    for (int it = 0; it < 2000; ++it) {
        const double scale = std::exp(6.0 * (rng.unit() - 0.5));
        const double p_never = 50.0 + 500.0 * rng.unit();
        const double p_always = p_never * (1.0 + 3.0 * rng.unit());
        const bool relaxed = rng.bernoulli(0.5);
        const auto base = analysis::check_dps_feasibility(linear(p_never, p_always), relaxed);
        const auto scaled = analysis::check_dps_feasibility(
            linear(scale * p_never, scale * p_always), relaxed);
        CHECK(base.overall == scaled.overall);

        const double t_b = 0.1 + 0.8 * rng.unit();
        const double p_never_b = 100.0 + 5000.0 * rng.unit();
        const double p_always_b = p_never_b * (1.0 + rng.unit());
        const auto cow_base = analysis::check_cow_feasibility(
            linear(p_never, p_always), linear(p_never_b, p_always_b), t_b, relaxed, false);
        const auto cow_scaled = analysis::check_cow_feasibility(
            linear(scale * p_never, scale * p_always),
            linear(scale * p_never_b, scale * p_always_b), t_b, relaxed, false);
        for (std::size_t e = 0; e < cow_base.entries.size(); ++e) {
            CHECK(cow_base.entries[e].satisfied == cow_scaled.entries[e].satisfied);
        }
    }
}

TEST_CASE("compare_statistics: identical runs are indistinguishable") {
    const auto stats = make_stats(Protocol::dps, 100000, 9000, 9100, 18000, 0);
    const auto report = analysis::compare_statistics(stats, stats, 3.0);
    CHECK_FALSE(report.flagged);
    CHECK(report.max_abs_z == 0.0);
    for (const auto& m : report.metrics) CHECK(m.z == 0.0);
}

TEST_CASE("compare_statistics: rate shifts are flagged through the z test") {
    const auto honest = make_stats(Protocol::dps, 100000, 9000, 9000, 17900, 0);
    const auto attacked = make_stats(Protocol::dps, 100000, 11000, 9000, 19900, 0);
    const auto report = analysis::compare_statistics(honest, attacked, 3.0);
    CHECK(report.flagged);
    CHECK(report.max_abs_z > 3.0);
}

TEST_CASE("compare_statistics: exact comparison guards small denominators") {
    // QBER 0 on both sides: zero pooled successes, exact equality, no flag.
    const auto honest = make_stats(Protocol::dps, 50000, 4500, 4500, 8900, 0);
    auto attacked = make_stats(Protocol::dps, 50000, 4520, 4480, 8910, 0);
    const auto clean = analysis::compare_statistics(honest, attacked, 3.0);
    CHECK_FALSE(clean.flagged);

    // A handful of errors against an exactly-zero honest QBER: flagged even
    // though the z approximation would be shaky.
    attacked.sifted_errors = 3;
    attacked.qber = 3.0 / 8910.0;
    const auto dirty = analysis::compare_statistics(honest, attacked, 3.0);
    CHECK(dirty.flagged);
    bool qber_flagged = false;
    for (const auto& m : dirty.metrics) {
        if (m.name == "qber" && m.flagged) {
            qber_flagged = true;
            CHECK(m.comparison == analysis::MetricComparison::exact);
        }
    }
    CHECK(qber_flagged);
}

TEST_CASE("compare_statistics: symmetric up to the sign of z") {
    const auto a = make_stats(Protocol::dps, 80000, 7000, 7200, 14100, 0);
    const auto b = make_stats(Protocol::dps, 80000, 7300, 7100, 14300, 0);
    const auto ab = analysis::compare_statistics(a, b, 3.0);
    const auto ba = analysis::compare_statistics(b, a, 3.0);
    REQUIRE(ab.metrics.size() == ba.metrics.size());
    for (std::size_t i = 0; i < ab.metrics.size(); ++i) {
        CHECK(ab.metrics[i].z == doctest::Approx(-ba.metrics[i].z).epsilon(1e-12));
        CHECK(ab.metrics[i].flagged == ba.metrics[i].flagged);
    }
    CHECK(ab.flagged == ba.flagged);
}

TEST_CASE("compare_statistics: usage errors") {
    const auto ok = make_stats(Protocol::dps, 1000, 90, 90, 170, 0);
    RunStatistics empty;
    empty.protocol = Protocol::dps;
    CHECK_THROWS_AS(analysis::compare_statistics(ok, empty, 3.0), std::logic_error);
    auto cow = make_stats(Protocol::cow, 1000, 90, 90, 170, 0);
    CHECK_THROWS_AS(analysis::compare_statistics(ok, cow, 3.0), std::logic_error);
}

TEST_CASE("cow visibility enters the comparison as the DM2 fraction") {
    auto honest = make_stats(Protocol::cow, 100000, 5000, 4000, 4900, 0);
    honest.coherent_dm1_clicks = 0;
    honest.coherent_dm2_clicks = 3000;
    honest.monitor_visibility = 1.0;
    auto attacked = honest;
    attacked.coherent_dm1_clicks = 300;
    attacked.coherent_dm2_clicks = 2700;
    attacked.monitor_visibility = (2700.0 - 300.0) / 3000.0;

    const auto report = analysis::compare_statistics(honest, attacked, 3.0);
    bool fraction_flagged = false;
    for (const auto& m : report.metrics) {
        if (m.name == "coherent_dm2_fraction" && m.flagged) fraction_flagged = true;
    }
    CHECK(fraction_flagged);
    CHECK(report.flagged);
}
