#include "dpr/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpr::analysis {

using detectors::LinearModeConfig;
using protocols::DetectorId;
using protocols::Protocol;
using protocols::RunStatistics;

namespace {

FeasibilityEntry make_entry(std::string name, double lhs, double rhs,
                            std::string note = {}) {
    FeasibilityEntry e;
    e.name = std::move(name);
    e.lhs_uw = lhs;
    e.rhs_uw = rhs;
    e.margin_uw = rhs - lhs;
    e.satisfied = lhs < rhs; // strict, per the threshold definitions
    e.note = std::move(note);
    return e;
}

void finalize(FeasibilityReport& report) {
    report.overall = std::all_of(report.entries.begin(), report.entries.end(),
                                 [](const FeasibilityEntry& e) { return e.satisfied; });
}

} // namespace

const FeasibilityEntry* FeasibilityReport::find(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

FeasibilityReport check_dps_feasibility(const LinearModeConfig& thresholds,
                                        bool relaxed) {
    thresholds.validate();
    FeasibilityReport report;
    report.relaxed_mode = relaxed;
    const double f = relaxed ? 4.0 : 2.0;
    report.entries.push_back(make_entry("vacuum_slot_silence", thresholds.p_always_uw,
                                        f * thresholds.p_never_uw));
    finalize(report);
    return report;
}

FeasibilityReport check_cow_feasibility(const LinearModeConfig& monitor,
                                        const LinearModeConfig& data, double t_b,
                                        bool relaxed, bool one_monitor) {
    monitor.validate();
    data.validate();
    if (!(t_b > 0.0 && t_b < 1.0)) {
        throw std::invalid_argument("check_cow_feasibility: t_b must lie in (0, 1)");
    }

    FeasibilityReport report;
    report.relaxed_mode = relaxed;
    const double f = relaxed ? 4.0 : 2.0;
    const std::string one_monitor_note =
        one_monitor ? "conservative: with a single monitored port the vacuum-slot "
                      "illumination can be routed to the open output"
                    : "";

    report.entries.push_back(make_entry("monitor_pair", monitor.p_always_uw,
                                        f * monitor.p_never_uw, one_monitor_note));
    report.entries.push_back(make_entry("data_silence",
                                        (t_b / (1.0 - t_b)) * monitor.p_always_uw,
                                        data.p_never_uw));
    report.entries.push_back(make_entry("monitor_silence",
                                        ((1.0 - t_b) / t_b) * data.p_always_uw,
                                        f * monitor.p_never_uw, one_monitor_note));
    finalize(report);
    return report;
}

std::vector<Table1Row> table1_rows(std::span<const double> t_b_values,
                                   double p_never_m_uw, double p_always_m_uw) {
    LinearModeConfig monitor;
    monitor.p_never_uw = p_never_m_uw;
    monitor.p_always_uw = p_always_m_uw;
    monitor.validate();

    std::vector<Table1Row> rows;
    rows.reserve(t_b_values.size());
    for (double t_b : t_b_values) {
        if (!(t_b > 0.0 && t_b < 1.0)) {
            throw std::invalid_argument("table1_rows: t_b must lie in (0, 1)");
        }
        const double ratio = t_b / (1.0 - t_b);
        rows.push_back(Table1Row{t_b, ratio * p_always_m_uw, 2.0 * ratio * p_never_m_uw});
    }
    return rows;
}

namespace {

struct Proportion {
    std::size_t successes = 0;
    std::size_t trials = 0;
    double value() const {
        return trials == 0 ? 0.0
                           : static_cast<double>(successes) / static_cast<double>(trials);
    }
};

/// Two-proportion z statistic with pooled variance; falls back on exact
/// comparison when the normal approximation is not valid.
MetricDivergence compare_proportions(std::string name, const Proportion& honest,
                                     const Proportion& attacked, double z_threshold) {
    MetricDivergence m;
    m.name = std::move(name);
    if (honest.trials > 0) m.honest = honest.value();
    if (attacked.trials > 0) m.attacked = attacked.value();
    if (honest.trials == 0 || attacked.trials == 0) {
        // Metric undefined on at least one side; nothing to screen.
        m.comparison = MetricComparison::exact;
        return m;
    }

    const std::size_t pooled_successes = honest.successes + attacked.successes;
    const std::size_t pooled_failures =
        (honest.trials - honest.successes) + (attacked.trials - attacked.successes);

    if (pooled_successes < 5 || pooled_failures < 5) {
        m.comparison = MetricComparison::exact;
        if (*m.honest != *m.attacked) {
            m.z = std::numeric_limits<double>::infinity();
            m.flagged = true;
        }
        return m;
    }

    const double p_pooled =
        static_cast<double>(pooled_successes) /
        static_cast<double>(honest.trials + attacked.trials);
    const double se = std::sqrt(p_pooled * (1.0 - p_pooled) *
                                (1.0 / static_cast<double>(honest.trials) +
                                 1.0 / static_cast<double>(attacked.trials)));
    m.comparison = MetricComparison::z_test;
    m.z = se > 0.0 ? (*m.attacked - *m.honest) / se : 0.0;
    m.flagged = std::abs(m.z) > z_threshold;
    return m;
}

std::size_t detector_count(const RunStatistics& s, DetectorId id) {
    auto it = s.clicks_by_detector.find(id);
    return it == s.clicks_by_detector.end() ? 0 : it->second;
}

} // namespace

DivergenceReport compare_statistics(const RunStatistics& honest,
                                    const RunStatistics& attacked,
                                    double z_threshold) {
    if (honest.slots == 0 || attacked.slots == 0) {
        throw std::logic_error("compare_statistics: zero-length run");
    }
    if (honest.protocol != attacked.protocol) {
        throw std::logic_error("compare_statistics: runs use different protocols");
    }

    DivergenceReport report;
    report.z_threshold = z_threshold;

    const std::vector<DetectorId> ids =
        honest.protocol == Protocol::dps
            ? std::vector<DetectorId>{DetectorId::D0, DetectorId::D1}
            : std::vector<DetectorId>{DetectorId::DB, DetectorId::DM1, DetectorId::DM2};

    for (DetectorId id : ids) {
        report.metrics.push_back(compare_proportions(
            std::string("rate_") + protocols::to_string(id),
            Proportion{detector_count(honest, id), honest.slots},
            Proportion{detector_count(attacked, id), attacked.slots}, z_threshold));
    }
    report.metrics.push_back(
        compare_proportions("raw_detection_rate",
                            Proportion{honest.clicked_slots, honest.slots},
                            Proportion{attacked.clicked_slots, attacked.slots},
                            z_threshold));
    report.metrics.push_back(
        compare_proportions("double_click_rate",
                            Proportion{honest.multi_click_slots, honest.slots},
                            Proportion{attacked.multi_click_slots, attacked.slots},
                            z_threshold));
    report.metrics.push_back(compare_proportions(
        "qber", Proportion{honest.sifted_errors, honest.sifted_pairs},
        Proportion{attacked.sifted_errors, attacked.sifted_pairs}, z_threshold));

    if (honest.protocol == Protocol::cow) {
        // Visibility recast as the DM2 fraction of coherent-boundary clicks,
        // which is a proportion and z-testable.
        report.metrics.push_back(compare_proportions(
            "coherent_dm2_fraction",
            Proportion{honest.coherent_dm2_clicks,
                       honest.coherent_dm1_clicks + honest.coherent_dm2_clicks},
            Proportion{attacked.coherent_dm2_clicks,
                       attacked.coherent_dm1_clicks + attacked.coherent_dm2_clicks},
            z_threshold));
    }

    for (const auto& m : report.metrics) {
        if (m.flagged) report.flagged = true;
        if (std::isfinite(m.z)) {
            report.max_abs_z = std::max(report.max_abs_z, std::abs(m.z));
        } else if (m.flagged) {
            report.max_abs_z = std::numeric_limits<double>::infinity();
        }
    }
    return report;
}

} // namespace dpr::analysis
