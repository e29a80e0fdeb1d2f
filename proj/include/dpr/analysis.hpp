// Feasibility inequalities for perfect detector control, the data-detector
// threshold table, and the honest-vs-attacked statistical comparison.

#ifndef DPR_ANALYSIS_HPP
#define DPR_ANALYSIS_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpr/detectors.hpp"
#include "dpr/protocols.hpp"

namespace dpr::analysis {

/// One strict inequality lhs < rhs, in µW. margin = rhs - lhs, so
/// satisfied <=> margin > 0.
struct FeasibilityEntry {
    std::string name;
    double lhs_uw = 0.0;
    double rhs_uw = 0.0;
    bool satisfied = false;
    double margin_uw = 0.0;
    std::string note;
};

struct FeasibilityReport {
    bool relaxed_mode = false; // pulse-pair regime: splitting factor 2 -> 4
    std::vector<FeasibilityEntry> entries;
    bool overall = false; // conjunction of entries

    const FeasibilityEntry* find(const std::string& name) const;
};

/// DPS / BB84-style requirement: a trigger pulse split between the two
/// detectors must stay silent, P_always < f * P_never with f = 2
/// (f = 4 with two guaranteed vacuum slots between detection events).
FeasibilityReport check_dps_feasibility(const detectors::LinearModeConfig& thresholds,
                                        bool relaxed);

/// COW requirements. Entries:
///   monitor_pair:      P_always_M < f * P_never_M   (monitor line is
///                      controlled exactly like the DPS pair)
///   data_silence:      (t_b/(1-t_b)) * P_always_M < P_never_B
///   monitor_silence:   ((1-t_b)/t_b) * P_always_B < f * P_never_M
/// With only one monitoring detector the two monitor-side entries are
/// conservative, since Eve can route light to the open port instead.
FeasibilityReport check_cow_feasibility(const detectors::LinearModeConfig& monitor,
                                        const detectors::LinearModeConfig& data,
                                        double t_b, bool relaxed, bool one_monitor);

struct Table1Row {
    double t_b = 0.0;
    double min_p_never_b_uw = 0.0; // data detector must never click below this
    double max_p_always_b_uw = 0.0; // and must always click below this
};

/// Data-detector threshold bounds for each splitting ratio:
/// P_never_B > (t_b/(1-t_b)) * P_always_M and
/// P_always_B < 2 * (t_b/(1-t_b)) * P_never_M.
std::vector<Table1Row> table1_rows(std::span<const double> t_b_values,
                                   double p_never_m_uw, double p_always_m_uw);

enum class MetricComparison : std::uint8_t {
    z_test, // two-proportion normal approximation
    exact   // small denominators: values must match exactly
};

struct MetricDivergence {
    std::string name;
    std::optional<double> honest;
    std::optional<double> attacked;
    double z = 0.0; // +-inf marks an exact-comparison mismatch
    MetricComparison comparison = MetricComparison::z_test;
    bool flagged = false;
};

struct DivergenceReport {
    double z_threshold = 3.0;
    std::vector<MetricDivergence> metrics;
    bool flagged = false; // any |z| > z_threshold
    double max_abs_z = 0.0;

    const char* verdict() const { return flagged ? "flagged" : "indistinguishable"; }
};

/// Compare two runs of the same protocol metric by metric. Rate metrics use
/// the two-proportion z statistic; when the pooled success or failure count
/// is too small for the normal approximation the values are compared
/// exactly instead (with zero dark counts an honest run cannot produce a
/// single error, so any exact mismatch is evidence). This is a statistical
/// screen, not a security proof.
DivergenceReport compare_statistics(const protocols::RunStatistics& honest,
                                    const protocols::RunStatistics& attacked,
                                    double z_threshold);

} // namespace dpr::analysis

#endif // DPR_ANALYSIS_HPP
