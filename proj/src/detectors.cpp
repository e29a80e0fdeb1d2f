#include "dpr/detectors.hpp"

#include <cmath>
#include <stdexcept>

namespace dpr::detectors {

namespace {

// Steepness of the logistic ramp alternative. The curve is rescaled so it
// still hits exactly 0 at p_never and exactly 1 at p_always.
constexpr double kLogisticSteepness = 10.0;

double logistic_raw(double t) {
    return 1.0 / (1.0 + std::exp(-kLogisticSteepness * (t - 0.5)));
}

double ramp_value(double t, ClickRamp ramp) {
    switch (ramp) {
        case ClickRamp::linear:
            return t;
        case ClickRamp::logistic: {
            const double lo = logistic_raw(0.0);
            const double hi = logistic_raw(1.0);
            return (logistic_raw(t) - lo) / (hi - lo);
        }
    }
    throw std::logic_error("unknown ClickRamp");
}

} // namespace

void LinearModeConfig::validate() const {
    if (!(p_never_uw > 0.0) || !(p_always_uw > p_never_uw)) {
        throw std::invalid_argument(
            "LinearModeConfig: requires 0 < p_never < p_always (µW)");
    }
}

void GeigerConfig::validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
        throw std::invalid_argument("GeigerConfig: efficiency must lie in [0, 1]");
    }
    if (!(dark_prob >= 0.0 && dark_prob < 1.0)) {
        throw std::invalid_argument("GeigerConfig: dark_prob must lie in [0, 1)");
    }
    if (!(kappa_per_uw > 0.0)) {
        throw std::invalid_argument("GeigerConfig: kappa_per_uw must be > 0");
    }
}

void validate(const DetectorConfig& cfg) {
    std::visit([](const auto& c) { c.validate(); }, cfg);
}

double linear_click_prob(double power_uw, const LinearModeConfig& cfg) {
    if (power_uw <= cfg.p_never_uw) return 0.0;
    if (power_uw >= cfg.p_always_uw) return 1.0;
    const double t =
        (power_uw - cfg.p_never_uw) / (cfg.p_always_uw - cfg.p_never_uw);
    return ramp_value(t, cfg.ramp);
}

double geiger_click_prob(double power_uw, const GeigerConfig& cfg) {
    const double mean_photons = cfg.efficiency * cfg.kappa_per_uw * power_uw;
    return 1.0 - (1.0 - cfg.dark_prob) * std::exp(-mean_photons);
}

double click_probability(double power_uw, const DetectorConfig& cfg) {
    if (const auto* linear = std::get_if<LinearModeConfig>(&cfg)) {
        return linear_click_prob(power_uw, *linear);
    }
    return geiger_click_prob(power_uw, std::get<GeigerConfig>(cfg));
}

bool detect(double power_uw, const DetectorConfig& cfg, DetectorState& state,
            std::size_t slot, Rng& rng) {
    if (static_cast<std::int64_t>(slot) <= state.last_slot) {
        throw std::logic_error("detect: slots must be processed in increasing order");
    }
    state.last_slot = static_cast<std::int64_t>(slot);

    if (slot < state.dead_until) return false;

    const double p = click_probability(power_uw, cfg);
    bool clicked;
    if (p <= 0.0) {
        clicked = false;
    } else if (p >= 1.0) {
        clicked = true;
    } else {
        clicked = rng.bernoulli(p);
    }

    if (clicked) {
        std::size_t deadtime = 0;
        if (const auto* geiger = std::get_if<GeigerConfig>(&cfg)) {
            deadtime = geiger->deadtime_slots;
        }
        state.dead_until = slot + deadtime + 1;
    }
    return clicked;
}

} // namespace dpr::detectors
