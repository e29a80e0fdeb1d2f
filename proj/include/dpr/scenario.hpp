// Scenario runner and sweep engine: declarative JSON configs in,
// deterministic JSON/CSV documents out. This is the library half of the
// command-line tool; the binary in tools/ is a thin flag wrapper.

#ifndef DPR_SCENARIO_HPP
#define DPR_SCENARIO_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dpr/analysis.hpp"
#include "dpr/attack.hpp"
#include "dpr/detectors.hpp"
#include "dpr/protocols.hpp"

namespace dpr::cli {

/// Structured configuration error carrying the dotted path of the offending
/// field, e.g. "attack.fsg.loss_target".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(path.empty() ? message : path + ": " + message),
          path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

enum class RunMode : std::uint8_t { honest, attack };

/// Seed of the paired honest baseline in attack mode:
/// master seed XOR this constant.
inline constexpr std::uint64_t kHonestBaselineSeedXor = 0xBADC0FFEE0DDF00DULL;

struct DpsSection {
    detectors::DetectorConfig d0;
    detectors::DetectorConfig d1;
};

struct CowSection {
    double t_b = 0.5;
    double decoy_prob = 0.0;
    bool one_monitor = false;
    protocols::MonitorPort monitored_port = protocols::MonitorPort::destructive;
    detectors::DetectorConfig db;
    detectors::DetectorConfig dm1;
    detectors::DetectorConfig dm2;
};

struct FsgSection {
    attack::FsgMode mode = attack::FsgMode::continuous_train;
    std::optional<double> trigger_power_uw;
    std::optional<double> train_power_uw;
    std::optional<double> data_power_uw;
    std::optional<double> loss_target;
    // Convenience form of loss_target: derive the click probability that
    // makes Bob's rates match an honest line of this transmittance.
    std::optional<double> loss_target_transmittance;
};

struct DpsAttackDetectors {
    detectors::DetectorConfig bob_prime_d0;
    detectors::DetectorConfig bob_prime_d1;
    detectors::LinearModeConfig blinded_d0;
    detectors::LinearModeConfig blinded_d1;
};

struct CowAttackDetectors {
    detectors::DetectorConfig bob_prime_db;
    detectors::DetectorConfig bob_prime_dm1;
    detectors::DetectorConfig bob_prime_dm2;
    detectors::LinearModeConfig blinded_db;
    detectors::LinearModeConfig blinded_dm1;
    detectors::LinearModeConfig blinded_dm2;
};

struct AttackSection {
    double position_transmittance = 1.0;
    FsgSection fsg;
    std::variant<DpsAttackDetectors, CowAttackDetectors> detectors;
};

/// Fully self-describing run description: the file plus the seed reproduce a
/// run bit-exactly.
struct ScenarioConfig {
    protocols::Protocol protocol = protocols::Protocol::dps;
    RunMode mode = RunMode::honest;
    std::uint64_t seed = 1;
    std::size_t n_bits = 1000;
    double mean_photons = 0.2;
    double channel_transmittance = 1.0;
    bool emit_record = false;
    double z_star = 3.0;
    std::optional<std::string> out_path; // default output target for the CLI
    DpsSection dps;
    CowSection cow;
    std::optional<AttackSection> attack;

    /// Canonical resolved form (defaults filled in).
    nlohmann::json echo() const;
};

ScenarioConfig parse_scenario_config(const nlohmann::json& j);

struct SimulationResult {
    protocols::RunStatistics statistics;
    std::optional<protocols::RunStatistics> baseline_statistics;
    std::optional<analysis::FeasibilityReport> feasibility;
    std::optional<analysis::DivergenceReport> divergence;
    std::vector<std::string> fsg_warnings;
    nlohmann::json document; // full result document
};

/// Run one scenario. In attack mode this also runs the paired honest
/// baseline on seed XOR kHonestBaselineSeedXor and compares the two.
SimulationResult simulate(const ScenarioConfig& cfg);

struct SweepAxis {
    std::string path; // dotted config path, e.g. "cow.t_b"
    std::vector<nlohmann::json> values;
};

struct SweepConfig {
    nlohmann::json base;
    std::vector<SweepAxis> axes;
    std::size_t replicates = 1;
};

SweepConfig parse_sweep_config(const nlohmann::json& j);

/// Run the full grid and return the CSV table. Row order is deterministic:
/// lexicographic over the axes (first axis outermost), then replicate. The
/// per-point seed is derive_seed(base seed, grid_index * replicates +
/// replicate). `threads` > 1 runs grid points concurrently; the output is
/// identical to a serial run.
std::string run_sweep(const SweepConfig& cfg, unsigned threads = 1);

/// Format a power in µW with up to 6 significant digits (the fixed CSV rule).
std::string format_power_uw(double value);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

/// The data-detector threshold table as CSV.
std::string table1_csv(std::span<const double> t_b_values, double p_never_m_uw,
                       double p_always_m_uw);

nlohmann::json statistics_to_json(const protocols::RunStatistics& stats);
nlohmann::json record_to_json(const protocols::DetectionRecord& record);
nlohmann::json feasibility_to_json(const analysis::FeasibilityReport& report);
nlohmann::json divergence_to_json(const analysis::DivergenceReport& report);

} // namespace dpr::cli

#endif // DPR_SCENARIO_HPP
