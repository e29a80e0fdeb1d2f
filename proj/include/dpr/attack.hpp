// Eve's side of the detector-control attack: an intercepting measurement
// unit built from a copy of Bob's receiver, and faked-state generators that
// turn an intended detection record into a bright tailored pulse train for
// Bob's blinded (linear-mode) detectors.

#ifndef DPR_ATTACK_HPP
#define DPR_ATTACK_HPP

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dpr/detectors.hpp"
#include "dpr/optics.hpp"
#include "dpr/protocols.hpp"
#include "dpr/rng.hpp"

namespace dpr::attack {

/// Eve's measurement unit: position in the line (Alice->Eve transmittance)
/// and a copy of Bob's receiver layout with her own detector configs.
struct InterceptConfig {
    double position_transmittance = 1.0;
    std::variant<protocols::DpsConfig, protocols::CowConfig> bob_prime;
};

/// Attenuate by the position transmittance, then measure with Bob-prime.
/// The result is the record Eve will mirror into Bob.
protocols::DetectionRecord eve_intercept(const optics::PulseTrain& train,
                                         const InterceptConfig& cfg, Rng& rng);

enum class FsgMode : std::uint8_t {
    continuous_train, // bright pulse in every slot, phase-steered
    pulse_pair        // two pulses per intended click, vacuum elsewhere
};

/// Which MZI output port is left without a detector in the one-monitor COW
/// variant; `none` means both monitors are present.
enum class UnmonitoredPort : std::uint8_t { none, constructive, destructive };

struct FsgConfig {
    FsgMode mode = FsgMode::continuous_train;
    // Explicit trigger powers; when absent they are derived from the target
    // thresholds (P_always, scaled by the coupler ratio for COW).
    std::optional<double> trigger_power_uw; // DPS
    std::optional<double> train_power_uw;   // COW monitor-targeting baseline
    std::optional<double> data_power_uw;    // COW data-targeting level
    // When set, deterministic triggering is replaced by powers that click
    // with this probability, so Bob statistically sees a lossy line.
    std::optional<double> loss_target;
    UnmonitoredPort unmonitored_port = UnmonitoredPort::none;
};

struct FsgBuild {
    optics::PulseTrain train;
    std::vector<std::string> warnings;
};

/// Build the DPS faked train for an intended record over D0/D1. Phase
/// differences follow the interference case rules: 0 triggers D0, pi
/// triggers D1, pi/2 leaves a vacuum slot. Intended clicks at the two edge
/// interference slots cannot be produced and are dropped with a warning;
/// records that violate the feasibility inequality are built anyway with a
/// warning so failed attacks can be demonstrated.
FsgBuild build_dps_faked_train(const protocols::DetectionRecord& intended,
                               const FsgConfig& cfg,
                               const detectors::LinearModeConfig& thresholds);

struct CowThresholds {
    detectors::LinearModeConfig monitor;
    detectors::LinearModeConfig data;
};

/// Build the COW faked train: a baseline train at P_always_M/(1-t_b) with
/// phase-steered interference for the monitor line, raised to
/// P_always_B/t_b on slots with intended data clicks.
FsgBuild build_cow_faked_train(const protocols::DetectionRecord& intended,
                               const FsgConfig& cfg, const CowThresholds& thresholds,
                               double t_b);

/// Trigger power that clicks a linear-mode detector with the given
/// probability: the inverse of the configured ramp.
double loss_exploit_power(double target_prob, const detectors::LinearModeConfig& cfg);

/// Click probability Eve must target so that Bob's detection rate matches an
/// honest run over a line of the given transmittance: the exact ratio of the
/// honest per-slot click probability to Eve's own, not the small-signal
/// approximation (which is just the transmittance).
double loss_target_for_transmittance(double transmittance, double mean_photons,
                                     const detectors::GeigerConfig& bob,
                                     const detectors::GeigerConfig& eve);

/// Combined thresholds of a detector group: the largest power that never
/// clicks any of them and the smallest that always clicks an arbitrary one.
detectors::LinearModeConfig effective_thresholds(const detectors::LinearModeConfig& a,
                                                 const detectors::LinearModeConfig& b);

} // namespace dpr::attack

#endif // DPR_ATTACK_HPP
