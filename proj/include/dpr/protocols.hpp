// Honest-party state machines for the DPS and COW protocols: Alice's
// emitters, Bob's measurement units, sifting, and per-run statistics.
//
// Conventions (slot indices are 0-based):
//   * An n-pulse train produces n+1 interference slots at the Mach-Zehnder
//     output; interference slot k mixes input slots k-1 and k.
//   * DPS: bit k is the phase difference between pulses k and k+1 and shows
//     up at interference slot k+1. Detection records cover slots 0..n.
//   * COW: bit frames occupy two consecutive input slots; bit 0 is
//     (pulse, vacuum), bit 1 is (vacuum, pulse), a decoy is (pulse, pulse).
//     The data detector sees input slots 0..n-1, the monitor detectors see
//     interference slots 0..n, so records have length n+1.

#ifndef DPR_PROTOCOLS_HPP
#define DPR_PROTOCOLS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpr/detectors.hpp"
#include "dpr/optics.hpp"
#include "dpr/rng.hpp"

namespace dpr::protocols {

enum class Protocol : std::uint8_t { dps, cow };

const char* to_string(Protocol p);

/// D0/DM2 sit on the MZI constructive port (zero phase difference routes
/// light there), D1/DM1 on the destructive port; DB is the COW data detector.
enum class DetectorId : std::uint8_t { D0, D1, DB, DM1, DM2 };

const char* to_string(DetectorId id);

/// Small set of detector ids clicking in one slot.
class DetectorSet {
public:
    void add(DetectorId id) { bits_ |= mask(id); }
    bool contains(DetectorId id) const { return bits_ & mask(id); }
    bool empty() const { return bits_ == 0; }
    int count() const;
    std::vector<DetectorId> to_vector() const;

    friend bool operator==(const DetectorSet&, const DetectorSet&) = default;

private:
    static std::uint8_t mask(DetectorId id) {
        return static_cast<std::uint8_t>(1u << static_cast<unsigned>(id));
    }
    std::uint8_t bits_ = 0;
};

/// Per-slot sets of clicked detectors; slots without clicks are absent.
class DetectionRecord {
public:
    DetectionRecord() = default;
    explicit DetectionRecord(std::size_t length) : length_(length) {}

    std::size_t length() const { return length_; }
    void add_click(std::size_t slot, DetectorId id);
    bool contains(std::size_t slot, DetectorId id) const;
    const std::map<std::size_t, DetectorSet>& clicks() const { return clicks_; }
    std::size_t count(DetectorId id) const;
    std::size_t clicked_slots() const { return clicks_.size(); }

    friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;

private:
    std::size_t length_ = 0;
    std::map<std::size_t, DetectorSet> clicks_;
};

struct DpsConfig {
    double mean_photons = 0.2; // per pulse, honest source strength
    std::size_t n_bits = 0;
    detectors::DetectorConfig d0;
    detectors::DetectorConfig d1;
};

/// Which MZI output port carries the single monitoring detector in the
/// one-monitor COW variant.
enum class MonitorPort : std::uint8_t { constructive, destructive };

struct CowConfig {
    double mean_photons = 0.2;
    std::size_t n_bits = 0;
    double t_b = 0.5;        // coupler fraction routed to the data detector
    double decoy_prob = 0.0; // per-frame probability of a (pulse, pulse) decoy
    bool one_monitor = false;
    MonitorPort monitored_port = MonitorPort::destructive; // used when one_monitor
    detectors::DetectorConfig db;
    detectors::DetectorConfig dm1;
    detectors::DetectorConfig dm2;

    void validate() const;
    /// The detector that is absent in one-monitor mode (DM2 when the
    /// destructive port is the monitored one).
    DetectorId absent_monitor() const;
};

/// Per-run detection and sifting statistics. Counts are kept alongside the
/// derived rates so that statistical comparisons can use real denominators.
struct RunStatistics {
    Protocol protocol = Protocol::dps;
    std::size_t slots = 0;
    std::map<DetectorId, std::size_t> clicks_by_detector;
    std::size_t clicked_slots = 0;     // slots with >= 1 click
    std::size_t multi_click_slots = 0; // slots with >= 2 distinct detectors
    std::size_t sifted_pairs = 0;
    std::size_t sifted_errors = 0;
    std::optional<double> qber;                // absent when sifted_pairs == 0
    std::size_t coherent_dm1_clicks = 0;       // COW monitor line, coherent boundaries
    std::size_t coherent_dm2_clicks = 0;
    std::optional<double> monitor_visibility;  // (n2 - n1)/(n2 + n1), absent on 0/0

    double rate(DetectorId id) const;
    double raw_detection_rate() const;
    double double_click_rate() const;
};

struct SiftResult {
    std::vector<std::pair<int, int>> key_pairs; // (alice bit, bob bit)
    RunStatistics stats;
};

// --- DPS -------------------------------------------------------------------

struct DpsEmission {
    optics::PulseTrain train;           // n_bits + 1 pulses
    std::vector<double> phases_rad;     // per pulse, canonical
};

/// Phase-encode `bits` onto a train of coherent pulses of power
/// mean_photons µW (kappa = 1 convention): phase difference 0 encodes bit 0,
/// pi encodes bit 1. The first pulse phase is drawn from {0, pi}.
DpsEmission dps_alice_emit(std::span<const int> bits, double mean_photons, Rng& rng);

/// Interfere the train and detect: constructive port feeds D0, destructive
/// feeds D1. Both detectors may click in one slot.
DetectionRecord dps_bob_measure(const optics::PulseTrain& train,
                                const DpsConfig& cfg, Rng& rng);

/// Pair Bob's singly-clicked interior slots with Alice's bits. Double-clicked
/// and edge slots are discarded. alice_phases is the emitted phase sequence
/// and is checked for consistency with alice_bits.
SiftResult dps_sift(std::span<const int> alice_bits,
                    std::span<const double> alice_phases,
                    const DetectionRecord& record);

// --- COW -------------------------------------------------------------------

enum class FrameKind : std::uint8_t { bit0, bit1, decoy };

struct CowEmission {
    optics::PulseTrain train;      // 2 * n_frames slots, all phases 0
    std::vector<FrameKind> frames; // what each frame carried
};

CowEmission cow_alice_emit(std::span<const int> bits, double mean_photons,
                           double decoy_prob, Rng& rng);

/// Analog signal levels inside Bob's COW receiver: per-slot power on the
/// data-detector branch and MZI port powers on the monitor branch.
struct CowBranchPowers {
    std::vector<double> data_line_uw;  // length n
    optics::PortPowers monitor;        // length n + 1
};

CowBranchPowers cow_branch_powers(const optics::PulseTrain& train, double t_b);

DetectionRecord cow_bob_measure(const optics::PulseTrain& train,
                                const CowConfig& cfg, Rng& rng);

/// True when train slot `slot` carries a pulse under the given frame log.
bool cow_slot_has_pulse(std::span<const FrameKind> frames, std::size_t slot);

/// True when interference slot `slot` lies between two pulse-carrying input
/// slots, i.e. where adjacent-pulse coherence is defined (within decoy
/// frames and across pulse-pulse frame junctions).
bool cow_coherent_boundary(std::span<const FrameKind> frames, std::size_t slot);

/// Extract the key from DB clicks inside data frames (both-slot clicks are
/// discarded) and estimate the monitor visibility from DM1/DM2 click counts
/// at coherent boundaries.
SiftResult cow_sift(std::span<const FrameKind> frames, const DetectionRecord& record);

} // namespace dpr::protocols

#endif // DPR_PROTOCOLS_HPP
