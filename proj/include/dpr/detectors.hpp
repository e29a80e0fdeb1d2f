// Click models: single-photon (Geiger) operation and blinded/linear
// operation with the P_never / P_always trigger thresholds.

#ifndef DPR_DETECTORS_HPP
#define DPR_DETECTORS_HPP

#include <cstddef>
#include <cstdint>
#include <variant>

#include "dpr/rng.hpp"

namespace dpr::detectors {

/// Shape of the click-probability curve between P_never and P_always.
/// The true curve is device-specific; it is a swappable policy here.
enum class ClickRamp : std::uint8_t { linear, logistic };

/// Linear-mode (blinded) detector: click probability is exactly 0 at or
/// below p_never_uw, exactly 1 at or above p_always_uw, and follows the
/// configured monotone ramp in between.
struct LinearModeConfig {
    double p_never_uw = 0.0;
    double p_always_uw = 0.0;
    ClickRamp ramp = ClickRamp::linear;

    void validate() const; // throws std::invalid_argument
};

/// Geiger-mode single-photon detector. kappa_per_uw converts slot power to
/// mean photon number (default 1, so honest signal strengths can be given
/// directly as mean photon numbers).
struct GeigerConfig {
    double efficiency = 1.0;       // eta in [0, 1]
    double dark_prob = 0.0;        // per-slot dark-click probability in [0, 1)
    double kappa_per_uw = 1.0;     // photons per µW, > 0
    std::size_t deadtime_slots = 0;

    void validate() const;
};

using DetectorConfig = std::variant<LinearModeConfig, GeigerConfig>;

void validate(const DetectorConfig& cfg);

/// Mutable per-run detector state. Slots must be processed in strictly
/// increasing order; dead_until only increases during a run.
struct DetectorState {
    std::size_t dead_until = 0;       // slot index (exclusive)
    std::int64_t last_slot = -1;
};

/// 0 for power <= p_never, 1 for power >= p_always, ramp in between.
double linear_click_prob(double power_uw, const LinearModeConfig& cfg);

/// 1 - (1 - dark_prob) * exp(-eta * kappa * power).
double geiger_click_prob(double power_uw, const GeigerConfig& cfg);

double click_probability(double power_uw, const DetectorConfig& cfg);

/// One detection attempt at `slot`. Returns false without consuming any
/// randomness while the detector is dead or when the click probability is
/// exactly 0; returns true without consuming randomness when it is exactly
/// 1. Otherwise performs one Bernoulli draw. On a click the detector is
/// dead until slot + deadtime_slots + 1.
bool detect(double power_uw, const DetectorConfig& cfg, DetectorState& state,
            std::size_t slot, Rng& rng);

} // namespace dpr::detectors

#endif // DPR_DETECTORS_HPP
