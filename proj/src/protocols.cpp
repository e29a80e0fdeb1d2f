#include "dpr/protocols.hpp"

#include <bit>
#include <stdexcept>

namespace dpr::protocols {

using optics::Pulse;
using optics::PulseTrain;

const char* to_string(Protocol p) {
    return p == Protocol::dps ? "dps" : "cow";
}

const char* to_string(DetectorId id) {
    switch (id) {
        case DetectorId::D0: return "D0";
        case DetectorId::D1: return "D1";
        case DetectorId::DB: return "DB";
        case DetectorId::DM1: return "DM1";
        case DetectorId::DM2: return "DM2";
    }
    return "?";
}

int DetectorSet::count() const { return std::popcount(bits_); }

std::vector<DetectorId> DetectorSet::to_vector() const {
    std::vector<DetectorId> ids;
    for (auto id : {DetectorId::D0, DetectorId::D1, DetectorId::DB,
                    DetectorId::DM1, DetectorId::DM2}) {
        if (contains(id)) ids.push_back(id);
    }
    return ids;
}

void DetectionRecord::add_click(std::size_t slot, DetectorId id) {
    if (slot >= length_) {
        throw std::out_of_range("DetectionRecord: slot beyond record length");
    }
    clicks_[slot].add(id);
}

bool DetectionRecord::contains(std::size_t slot, DetectorId id) const {
    auto it = clicks_.find(slot);
    return it != clicks_.end() && it->second.contains(id);
}

std::size_t DetectionRecord::count(DetectorId id) const {
    std::size_t n = 0;
    for (const auto& [slot, set] : clicks_) {
        if (set.contains(id)) ++n;
    }
    return n;
}

void CowConfig::validate() const {
    if (!(t_b > 0.0 && t_b < 1.0)) {
        throw std::invalid_argument("CowConfig: t_b must lie strictly in (0, 1)");
    }
    if (!(decoy_prob >= 0.0 && decoy_prob < 1.0)) {
        throw std::invalid_argument("CowConfig: decoy_prob must lie in [0, 1)");
    }
    if (!(mean_photons >= 0.0)) {
        throw std::invalid_argument("CowConfig: mean_photons must be >= 0");
    }
}

DetectorId CowConfig::absent_monitor() const {
    return monitored_port == MonitorPort::destructive ? DetectorId::DM2
                                                      : DetectorId::DM1;
}

double RunStatistics::rate(DetectorId id) const {
    if (slots == 0) return 0.0;
    auto it = clicks_by_detector.find(id);
    const std::size_t n = it == clicks_by_detector.end() ? 0 : it->second;
    return static_cast<double>(n) / static_cast<double>(slots);
}

double RunStatistics::raw_detection_rate() const {
    if (slots == 0) return 0.0;
    return static_cast<double>(clicked_slots) / static_cast<double>(slots);
}

double RunStatistics::double_click_rate() const {
    if (slots == 0) return 0.0;
    return static_cast<double>(multi_click_slots) / static_cast<double>(slots);
}

namespace {

/// Record-level counters shared by both sift paths.
void fill_record_counts(const DetectionRecord& record, RunStatistics& stats) {
    stats.slots = record.length();
    for (const auto& [slot, set] : record.clicks()) {
        ++stats.clicked_slots;
        if (set.count() >= 2) ++stats.multi_click_slots;
        for (DetectorId id : set.to_vector()) ++stats.clicks_by_detector[id];
    }
}

} // namespace

// --- DPS ---------------------------------------------------------------------

DpsEmission dps_alice_emit(std::span<const int> bits, double mean_photons, Rng& rng) {
    if (!(mean_photons >= 0.0)) {
        throw std::invalid_argument("dps_alice_emit: mean_photons must be >= 0");
    }
    // Phases live on the {0, pi} grid; track them in quarter turns so every
    // slot-to-slot difference stays exact.
    int quarters = rng.bernoulli(0.5) ? 2 : 0;

    std::vector<Pulse> slots;
    std::vector<double> phases;
    slots.reserve(bits.size() + 1);
    phases.reserve(bits.size() + 1);

    phases.push_back(optics::phase_from_quarter_turns(quarters));
    slots.emplace_back(mean_photons, phases.back());
    for (int bit : bits) {
        quarters = (quarters + (bit ? 2 : 0)) % 4;
        phases.push_back(optics::phase_from_quarter_turns(quarters));
        slots.emplace_back(mean_photons, phases.back());
    }
    return DpsEmission{PulseTrain{std::move(slots)}, std::move(phases)};
}

DetectionRecord dps_bob_measure(const optics::PulseTrain& train,
                                const DpsConfig& cfg, Rng& rng) {
    const optics::PortPowers ports = optics::mzi_port_powers(train);
    DetectionRecord record{ports.size()};
    detectors::DetectorState state_d0;
    detectors::DetectorState state_d1;
    for (std::size_t slot = 0; slot < ports.size(); ++slot) {
        if (detectors::detect(ports.constructive_uw[slot], cfg.d0, state_d0, slot, rng)) {
            record.add_click(slot, DetectorId::D0);
        }
        if (detectors::detect(ports.destructive_uw[slot], cfg.d1, state_d1, slot, rng)) {
            record.add_click(slot, DetectorId::D1);
        }
    }
    return record;
}

SiftResult dps_sift(std::span<const int> alice_bits,
                    std::span<const double> alice_phases,
                    const DetectionRecord& record) {
    const std::size_t n_pulses = alice_bits.size() + 1;
    if (alice_phases.size() != n_pulses || record.length() != n_pulses + 1) {
        throw std::logic_error("dps_sift: bits/phases/record lengths do not match");
    }
    for (std::size_t k = 0; k < alice_bits.size(); ++k) {
        const double diff = optics::canonical_phase(alice_phases[k + 1] - alice_phases[k]);
        const int encoded = diff == 0.0 ? 0 : 1;
        if (encoded != (alice_bits[k] ? 1 : 0)) {
            throw std::logic_error("dps_sift: phases are inconsistent with bits");
        }
    }

    SiftResult result;
    result.stats.protocol = Protocol::dps;
    fill_record_counts(record, result.stats);

    for (const auto& [slot, set] : record.clicks()) {
        if (slot < 1 || slot > n_pulses - 1) continue; // edge interference slots
        if (set.count() != 1) continue;                // double clicks discarded
        const int bob_bit = set.contains(DetectorId::D1) ? 1 : 0;
        const int alice_bit = alice_bits[slot - 1] ? 1 : 0;
        result.key_pairs.emplace_back(alice_bit, bob_bit);
        ++result.stats.sifted_pairs;
        if (alice_bit != bob_bit) ++result.stats.sifted_errors;
    }
    if (result.stats.sifted_pairs > 0) {
        result.stats.qber = static_cast<double>(result.stats.sifted_errors) /
                            static_cast<double>(result.stats.sifted_pairs);
    }
    return result;
}

// --- COW ---------------------------------------------------------------------

CowEmission cow_alice_emit(std::span<const int> bits, double mean_photons,
                           double decoy_prob, Rng& rng) {
    if (!(mean_photons >= 0.0)) {
        throw std::invalid_argument("cow_alice_emit: mean_photons must be >= 0");
    }
    if (!(decoy_prob >= 0.0 && decoy_prob < 1.0)) {
        throw std::invalid_argument("cow_alice_emit: decoy_prob must lie in [0, 1)");
    }

    std::vector<Pulse> slots;
    std::vector<FrameKind> frames;
    slots.reserve(2 * bits.size());
    frames.reserve(bits.size());

    const Pulse on{mean_photons, 0.0}; // single coherent laser, phase 0
    const Pulse off = Pulse::vacuum();

    for (int bit : bits) {
        FrameKind kind;
        if (decoy_prob > 0.0 && rng.bernoulli(decoy_prob)) {
            kind = FrameKind::decoy;
        } else {
            kind = bit ? FrameKind::bit1 : FrameKind::bit0;
        }
        frames.push_back(kind);
        switch (kind) {
            case FrameKind::bit0:
                slots.push_back(on);
                slots.push_back(off);
                break;
            case FrameKind::bit1:
                slots.push_back(off);
                slots.push_back(on);
                break;
            case FrameKind::decoy:
                slots.push_back(on);
                slots.push_back(on);
                break;
        }
    }
    return CowEmission{PulseTrain{std::move(slots)}, std::move(frames)};
}

CowBranchPowers cow_branch_powers(const optics::PulseTrain& train, double t_b) {
    CowBranchPowers out;
    out.data_line_uw.reserve(train.size());
    std::vector<Pulse> tapped;
    tapped.reserve(train.size());
    for (const Pulse& p : train) {
        auto [kept, tap] = optics::coupler_split(p, t_b);
        out.data_line_uw.push_back(kept.power_uw());
        tapped.push_back(tap);
    }
    out.monitor = optics::mzi_port_powers(PulseTrain{std::move(tapped)});
    return out;
}

DetectionRecord cow_bob_measure(const optics::PulseTrain& train,
                                const CowConfig& cfg, Rng& rng) {
    cfg.validate();
    const CowBranchPowers branches = cow_branch_powers(train, cfg.t_b);
    const std::size_t n = train.size();

    DetectionRecord record{n + 1};
    detectors::DetectorState state_db;
    detectors::DetectorState state_dm1;
    detectors::DetectorState state_dm2;
    const DetectorId absent = cfg.absent_monitor();

    for (std::size_t slot = 0; slot <= n; ++slot) {
        if (slot < n &&
            detectors::detect(branches.data_line_uw[slot], cfg.db, state_db, slot, rng)) {
            record.add_click(slot, DetectorId::DB);
        }
        const bool dm2_present = !(cfg.one_monitor && absent == DetectorId::DM2);
        const bool dm1_present = !(cfg.one_monitor && absent == DetectorId::DM1);
        if (dm2_present &&
            detectors::detect(branches.monitor.constructive_uw[slot], cfg.dm2,
                              state_dm2, slot, rng)) {
            record.add_click(slot, DetectorId::DM2);
        }
        if (dm1_present &&
            detectors::detect(branches.monitor.destructive_uw[slot], cfg.dm1,
                              state_dm1, slot, rng)) {
            record.add_click(slot, DetectorId::DM1);
        }
    }
    return record;
}

bool cow_slot_has_pulse(std::span<const FrameKind> frames, std::size_t slot) {
    const std::size_t frame = slot / 2;
    if (frame >= frames.size()) return false;
    switch (frames[frame]) {
        case FrameKind::bit0: return slot % 2 == 0;
        case FrameKind::bit1: return slot % 2 == 1;
        case FrameKind::decoy: return true;
    }
    return false;
}

bool cow_coherent_boundary(std::span<const FrameKind> frames, std::size_t slot) {
    if (slot == 0 || slot >= 2 * frames.size()) return false;
    return cow_slot_has_pulse(frames, slot - 1) && cow_slot_has_pulse(frames, slot);
}

SiftResult cow_sift(std::span<const FrameKind> frames, const DetectionRecord& record) {
    const std::size_t n = 2 * frames.size();
    if (record.length() != n + 1) {
        throw std::logic_error("cow_sift: frame log and record lengths do not match");
    }

    SiftResult result;
    result.stats.protocol = Protocol::cow;
    fill_record_counts(record, result.stats);

    for (std::size_t f = 0; f < frames.size(); ++f) {
        if (frames[f] == FrameKind::decoy) continue;
        const bool first = record.contains(2 * f, DetectorId::DB);
        const bool second = record.contains(2 * f + 1, DetectorId::DB);
        if (first == second) continue; // no click or ambiguous both-slot click
        const int bob_bit = second ? 1 : 0;
        const int alice_bit = frames[f] == FrameKind::bit1 ? 1 : 0;
        result.key_pairs.emplace_back(alice_bit, bob_bit);
        ++result.stats.sifted_pairs;
        if (alice_bit != bob_bit) ++result.stats.sifted_errors;
    }
    if (result.stats.sifted_pairs > 0) {
        result.stats.qber = static_cast<double>(result.stats.sifted_errors) /
                            static_cast<double>(result.stats.sifted_pairs);
    }

    for (const auto& [slot, set] : record.clicks()) {
        if (!cow_coherent_boundary(frames, slot)) continue;
        if (set.contains(DetectorId::DM1)) ++result.stats.coherent_dm1_clicks;
        if (set.contains(DetectorId::DM2)) ++result.stats.coherent_dm2_clicks;
    }
    const std::size_t total =
        result.stats.coherent_dm1_clicks + result.stats.coherent_dm2_clicks;
    if (total > 0) {
        result.stats.monitor_visibility =
            (static_cast<double>(result.stats.coherent_dm2_clicks) -
             static_cast<double>(result.stats.coherent_dm1_clicks)) /
            static_cast<double>(total);
    }
    return result;
}

} // namespace dpr::protocols
