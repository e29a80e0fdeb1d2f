// Complex-amplitude model of coherent pulse trains, the asymmetric coupler,
// and the one-slot-delay unbalanced Mach-Zehnder interferometer.
//
// All magnitudes are optical powers in microwatts; the field amplitude of a
// pulse is sqrt(power)*exp(i*phase). Slot index is the only notion of time.

#ifndef DPR_OPTICS_HPP
#define DPR_OPTICS_HPP

#include <cstddef>
#include <utility>
#include <vector>

namespace dpr::optics {

/// One time slot of the optical signal: power (µW) and phase (radians).
/// Phase is stored as its canonical representative in [0, 2*pi); a vacuum
/// slot is exactly power == 0 and phase == 0.
class Pulse {
public:
    Pulse() = default;
    Pulse(double power_uw, double phase_rad);

    static Pulse vacuum() { return Pulse{}; }

    double power_uw() const { return power_uw_; }
    double phase_rad() const { return phase_rad_; }
    bool is_vacuum() const { return power_uw_ == 0.0; }

    friend bool operator==(const Pulse&, const Pulse&) = default;

private:
    double power_uw_ = 0.0;
    double phase_rad_ = 0.0;
};

/// Map any real phase onto its canonical representative in [0, 2*pi).
double canonical_phase(double phase_rad);

/// Phase of `quarters` quarter-turns. Multiples of pi/2 are the only phases
/// the protocol and attack code ever emit; routing them through one helper
/// keeps slot-to-slot phase differences exact in floating point, which in
/// turn keeps ideal interference nulls exactly zero.
double phase_from_quarter_turns(int quarters);

/// Fixed-length ordered sequence of pulses, slot-indexed from 0.
class PulseTrain {
public:
    PulseTrain() = default;
    explicit PulseTrain(std::vector<Pulse> slots) : slots_(std::move(slots)) {}

    std::size_t size() const { return slots_.size(); }
    bool empty() const { return slots_.empty(); }
    const Pulse& operator[](std::size_t slot) const { return slots_[slot]; }
    auto begin() const { return slots_.begin(); }
    auto end() const { return slots_.end(); }

    double total_power_uw() const;

    friend bool operator==(const PulseTrain&, const PulseTrain&) = default;

private:
    std::vector<Pulse> slots_;
};

/// Per-interference-slot output powers of the Mach-Zehnder interferometer.
/// For an n-pulse input there are n+1 interference slots: slot k mixes input
/// slots k-1 and k, with vacuum padding at both ends (no pulse enters the
/// interferometer before the train or after it).
struct PortPowers {
    std::vector<double> constructive_uw;
    std::vector<double> destructive_uw;

    std::size_t size() const { return constructive_uw.size(); }
    double total_uw() const;
};

/// Asymmetric coupler with splitting ratio t : (1-t). Returns the kept
/// branch (fraction t of the power) and the tapped branch; both keep the
/// input phase, since the two branches never re-interfere downstream.
std::pair<Pulse, Pulse> coupler_split(const Pulse& pulse, double t);

/// 50/50 lossless Mach-Zehnder with a delay of exactly one slot.
/// constructive[k] = |A_k + A_{k-1}|^2 / 4, destructive[k] = |A_k - A_{k-1}|^2 / 4.
PortPowers mzi_port_powers(const PulseTrain& train);

/// Scale every slot power by `transmittance`; phases unchanged.
PulseTrain attenuate(const PulseTrain& train, double transmittance);

} // namespace dpr::optics

#endif // DPR_OPTICS_HPP
