#include "dpr/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dpr/analysis.hpp"

namespace dpr::attack {

using detectors::LinearModeConfig;
using optics::Pulse;
using optics::PulseTrain;
using protocols::DetectionRecord;
using protocols::DetectorId;

namespace {

constexpr double kLogisticSteepness = 10.0; // keep in sync with detectors.cpp

/// Raise `power` by ulps until factor * power >= target. Keeps deterministic
/// triggering honest when target/factor does not divide exactly in binary.
double raise_until(double power, double factor, double target) {
    while (factor * power < target) {
        power = std::nextafter(power, std::numeric_limits<double>::infinity());
    }
    return power;
}

void warn_edge_clicks(const DetectionRecord& intended, std::size_t last_slot,
                      std::initializer_list<DetectorId> interference_ids,
                      std::vector<std::string>& warnings) {
    for (std::size_t slot : {std::size_t{0}, last_slot}) {
        auto it = intended.clicks().find(slot);
        if (it == intended.clicks().end()) continue;
        for (DetectorId id : interference_ids) {
            if (it->second.contains(id)) {
                warnings.push_back("intended click at edge interference slot " +
                                   std::to_string(slot) +
                                   " cannot be triggered deterministically; dropped");
                break;
            }
        }
        if (last_slot == 0) break;
    }
}

void check_pair_spacing(const std::vector<std::size_t>& event_slots) {
    for (std::size_t i = 1; i < event_slots.size(); ++i) {
        if (event_slots[i] - event_slots[i - 1] < 3) {
            throw std::invalid_argument(
                "pulse-pair mode requires at least two vacuum slots between "
                "intended detection events");
        }
    }
}

} // namespace

protocols::DetectionRecord eve_intercept(const optics::PulseTrain& train,
                                         const InterceptConfig& cfg, Rng& rng) {
    const PulseTrain received = optics::attenuate(train, cfg.position_transmittance);
    if (const auto* dps = std::get_if<protocols::DpsConfig>(&cfg.bob_prime)) {
        return protocols::dps_bob_measure(received, *dps, rng);
    }
    return protocols::cow_bob_measure(received,
                                      std::get<protocols::CowConfig>(cfg.bob_prime), rng);
}

double loss_exploit_power(double target_prob, const LinearModeConfig& cfg) {
    cfg.validate();
    if (!(target_prob >= 0.0 && target_prob <= 1.0)) {
        throw std::invalid_argument("loss_exploit_power: target_prob must lie in [0, 1]");
    }
    if (target_prob <= 0.0) return cfg.p_never_uw;
    if (target_prob >= 1.0) return cfg.p_always_uw;

    const double span = cfg.p_always_uw - cfg.p_never_uw;
    double t;
    switch (cfg.ramp) {
        case detectors::ClickRamp::linear:
            t = target_prob;
            break;
        case detectors::ClickRamp::logistic: {
            const double lo = 1.0 / (1.0 + std::exp(kLogisticSteepness * 0.5));
            const double hi = 1.0 / (1.0 + std::exp(-kLogisticSteepness * 0.5));
            const double y = target_prob * (hi - lo) + lo;
            t = 0.5 - std::log(1.0 / y - 1.0) / kLogisticSteepness;
            break;
        }
        default:
            throw std::logic_error("unknown ClickRamp");
    }
    return cfg.p_never_uw + t * span;
}

double loss_target_for_transmittance(double transmittance, double mean_photons,
                                     const detectors::GeigerConfig& bob,
                                     const detectors::GeigerConfig& eve) {
    if (!(transmittance >= 0.0 && transmittance <= 1.0)) {
        throw std::invalid_argument(
            "loss_target_for_transmittance: transmittance must lie in [0, 1]");
    }
    const double honest_rate =
        1.0 - (1.0 - bob.dark_prob) *
                  std::exp(-bob.efficiency * bob.kappa_per_uw * mean_photons *
                           transmittance);
    const double eve_rate =
        1.0 - (1.0 - eve.dark_prob) *
                  std::exp(-eve.efficiency * eve.kappa_per_uw * mean_photons);
    if (!(eve_rate > 0.0)) {
        throw std::invalid_argument(
            "loss_target_for_transmittance: intercept detection rate is zero");
    }
    return std::clamp(honest_rate / eve_rate, 0.0, 1.0);
}

detectors::LinearModeConfig effective_thresholds(const LinearModeConfig& a,
                                                 const LinearModeConfig& b) {
    LinearModeConfig out = a;
    out.p_never_uw = std::min(a.p_never_uw, b.p_never_uw);
    out.p_always_uw = std::max(a.p_always_uw, b.p_always_uw);
    return out;
}

FsgBuild build_dps_faked_train(const DetectionRecord& intended, const FsgConfig& cfg,
                               const LinearModeConfig& thresholds) {
    thresholds.validate();
    FsgBuild build;
    if (intended.length() == 0) return build;

    for (const auto& [slot, set] : intended.clicks()) {
        for (DetectorId id : set.to_vector()) {
            if (id != DetectorId::D0 && id != DetectorId::D1) {
                throw std::invalid_argument(
                    "build_dps_faked_train: intended record must use only D0/D1");
            }
        }
    }

    const std::size_t n_slots = intended.length();
    const std::size_t train_len = n_slots - 1;

    double trigger = cfg.trigger_power_uw.value_or(thresholds.p_always_uw);
    if (cfg.loss_target) {
        trigger = loss_exploit_power(*cfg.loss_target, thresholds);
    }

    const bool relaxed = cfg.mode == FsgMode::pulse_pair;
    const analysis::FeasibilityReport report =
        analysis::check_dps_feasibility(thresholds, relaxed);
    if (!report.overall) {
        build.warnings.push_back(
            "thresholds violate the detector-control feasibility inequality; "
            "the attack will leave a trace");
    }

    warn_edge_clicks(intended, n_slots - 1, {DetectorId::D0, DetectorId::D1},
                     build.warnings);

    auto pick_detector = [&](const protocols::DetectorSet& set,
                             std::size_t slot) -> DetectorId {
        if (set.contains(DetectorId::D0) && set.contains(DetectorId::D1)) {
            build.warnings.push_back(
                "simultaneous D0+D1 intended at slot " + std::to_string(slot) +
                " cannot be triggered; preferring D0");
            return DetectorId::D0;
        }
        return set.contains(DetectorId::D1) ? DetectorId::D1 : DetectorId::D0;
    };

    std::vector<Pulse> slots;
    if (cfg.mode == FsgMode::continuous_train) {
        slots.reserve(train_len);
        int quarters = 0;
        for (std::size_t k = 0; k < train_len; ++k) {
            if (k > 0) {
                int dq = 1; // pi/2: vacuum event at this interference slot
                auto it = intended.clicks().find(k);
                if (it != intended.clicks().end()) {
                    dq = pick_detector(it->second, k) == DetectorId::D0 ? 0 : 2;
                }
                quarters = (quarters + dq) % 4;
            }
            slots.emplace_back(trigger, optics::phase_from_quarter_turns(quarters));
        }
    } else {
        slots.assign(train_len, Pulse::vacuum());
        std::vector<std::size_t> event_slots;
        for (const auto& [slot, set] : intended.clicks()) {
            if (slot == 0 || slot == n_slots - 1) continue; // warned above
            event_slots.push_back(slot);
        }
        check_pair_spacing(event_slots);
        for (std::size_t slot : event_slots) {
            const DetectorId id = pick_detector(intended.clicks().at(slot), slot);
            const int dq = id == DetectorId::D0 ? 0 : 2;
            slots[slot - 1] = Pulse{trigger, optics::phase_from_quarter_turns(0)};
            slots[slot] = Pulse{trigger, optics::phase_from_quarter_turns(dq)};
        }
    }
    build.train = PulseTrain{std::move(slots)};
    return build;
}

FsgBuild build_cow_faked_train(const DetectionRecord& intended, const FsgConfig& cfg,
                               const CowThresholds& thresholds, double t_b) {
    thresholds.monitor.validate();
    thresholds.data.validate();
    if (!(t_b > 0.0 && t_b < 1.0)) {
        throw std::invalid_argument("build_cow_faked_train: t_b must lie in (0, 1)");
    }

    FsgBuild build;
    if (intended.length() == 0) return build;

    for (const auto& [slot, set] : intended.clicks()) {
        for (DetectorId id : set.to_vector()) {
            if (id != DetectorId::DB && id != DetectorId::DM1 && id != DetectorId::DM2) {
                throw std::invalid_argument(
                    "build_cow_faked_train: intended record must use DB/DM1/DM2");
            }
        }
    }

    const std::size_t n_slots = intended.length();
    const std::size_t train_len = n_slots - 1;
    const bool one_monitor = cfg.unmonitored_port != UnmonitoredPort::none;

    // Baseline drives the monitor line, the raised level drives the data
    // detector through the coupler; bump by ulps so the branch power meets
    // the threshold exactly even when the division rounds down.
    double train_power;
    double data_power;
    if (cfg.loss_target) {
        train_power =
            loss_exploit_power(*cfg.loss_target, thresholds.monitor) / (1.0 - t_b);
        data_power = loss_exploit_power(*cfg.loss_target, thresholds.data) / t_b;
    } else {
        train_power = raise_until(thresholds.monitor.p_always_uw / (1.0 - t_b),
                                  1.0 - t_b, thresholds.monitor.p_always_uw);
        data_power = raise_until(thresholds.data.p_always_uw / t_b, t_b,
                                 thresholds.data.p_always_uw);
    }
    if (cfg.train_power_uw) train_power = *cfg.train_power_uw;
    if (cfg.data_power_uw) data_power = *cfg.data_power_uw;

    const bool relaxed = cfg.mode == FsgMode::pulse_pair;
    const analysis::FeasibilityReport report = analysis::check_cow_feasibility(
        thresholds.monitor, thresholds.data, t_b, relaxed, one_monitor);
    if (!report.overall) {
        build.warnings.push_back(
            "thresholds violate the detector-control feasibility inequalities; "
            "the attack will leave a trace");
    }

    warn_edge_clicks(intended, n_slots - 1, {DetectorId::DM1, DetectorId::DM2},
                     build.warnings);
    if (intended.contains(n_slots - 1, DetectorId::DB)) {
        build.warnings.push_back(
            "intended DB click at slot " + std::to_string(n_slots - 1) +
            " lies beyond the last train slot; dropped");
    }

    const DetectorId unmonitored_id = cfg.unmonitored_port == UnmonitoredPort::constructive
                                          ? DetectorId::DM2
                                          : DetectorId::DM1;
    // Routing that keeps the monitored port dark; with both monitors present
    // the illumination must be split instead (pi/2).
    const int vacuum_dq =
        !one_monitor ? 1 : (cfg.unmonitored_port == UnmonitoredPort::constructive ? 0 : 2);

    auto monitor_dq = [&](std::size_t slot) -> int {
        auto it = intended.clicks().find(slot);
        if (it == intended.clicks().end()) return vacuum_dq;
        const auto& set = it->second;
        const bool dm1 = set.contains(DetectorId::DM1);
        const bool dm2 = set.contains(DetectorId::DM2);
        if (dm1 && dm2) {
            build.warnings.push_back(
                "simultaneous DM1+DM2 intended at slot " + std::to_string(slot) +
                " cannot be triggered; preferring DM2");
            return 0;
        }
        if (one_monitor && ((dm1 && unmonitored_id == DetectorId::DM1) ||
                            (dm2 && unmonitored_id == DetectorId::DM2))) {
            build.warnings.push_back("intended click at slot " + std::to_string(slot) +
                                     " targets the unmonitored port; Bob cannot see it");
        }
        if (dm2) return 0;
        if (dm1) return 2;
        return vacuum_dq;
    };

    std::vector<Pulse> slots;
    if (cfg.mode == FsgMode::continuous_train) {
        slots.reserve(train_len);
        int quarters = 0;
        for (std::size_t k = 0; k < train_len; ++k) {
            // Boundary k mixes pulses k-1 and k; k runs over the steerable
            // interior interference slots 1..n_slots-2.
            if (k > 0) quarters = (quarters + monitor_dq(k)) % 4;
            const double power =
                intended.contains(k, DetectorId::DB) ? data_power : train_power;
            slots.emplace_back(power, optics::phase_from_quarter_turns(quarters));
        }
    } else {
        slots.assign(train_len, Pulse::vacuum());
        std::vector<std::size_t> event_slots;
        for (const auto& [slot, set] : intended.clicks()) {
            const bool edge_monitor =
                (slot == 0 || slot == n_slots - 1) &&
                (set.contains(DetectorId::DM1) || set.contains(DetectorId::DM2));
            const bool db_only = set.contains(DetectorId::DB) &&
                                 !set.contains(DetectorId::DM1) &&
                                 !set.contains(DetectorId::DM2);
            if (edge_monitor && !set.contains(DetectorId::DB)) continue;
            if (slot == n_slots - 1 && db_only) continue;
            event_slots.push_back(slot);
        }
        check_pair_spacing(event_slots);
        for (std::size_t slot : event_slots) {
            const auto& set = intended.clicks().at(slot);
            const bool db = set.contains(DetectorId::DB) && slot < train_len;
            const bool monitor = (set.contains(DetectorId::DM1) ||
                                  set.contains(DetectorId::DM2)) &&
                                 slot >= 1 && slot <= n_slots - 2;
            if (monitor) {
                const int dq = monitor_dq(slot);
                slots[slot - 1] = Pulse{train_power, optics::phase_from_quarter_turns(0)};
                slots[slot] = Pulse{db ? data_power : train_power,
                                    optics::phase_from_quarter_turns(dq)};
            } else if (db) {
                slots[slot] = Pulse{data_power, optics::phase_from_quarter_turns(0)};
            }
        }
    }
    build.train = PulseTrain{std::move(slots)};
    return build;
}

} // namespace dpr::attack
