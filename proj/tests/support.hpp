// Shared test helpers: independent oracles and random-case generators.
//
// The interference oracle below works directly on complex field amplitudes
// and must stay independent of the production implementation in
// src/optics.cpp, which computes port powers from powers and phase
// differences.

#ifndef DPR_TESTS_SUPPORT_HPP
#define DPR_TESTS_SUPPORT_HPP

#include <cmath>
#include <complex>
#include <cstdlib>
#include <string>
#include <vector>

#include "dpr/optics.hpp"
#include "dpr/protocols.hpp"
#include "dpr/rng.hpp"

namespace dpr::test {

inline double rel_err(double actual, double expected) {
    const double scale = std::max(std::abs(expected), 1.0e-300);
    return std::abs(actual - expected) / scale;
}

struct OraclePorts {
    std::vector<double> constructive;
    std::vector<double> destructive;
};

/// Complex-amplitude reference for the one-slot-delay Mach-Zehnder:
/// A_k = sqrt(P_k) e^{i phi_k}, out[k] = |A_k ± A_{k-1}|^2 / 4 with vacuum
/// padding at both ends.
inline OraclePorts mzi_oracle(const std::vector<std::pair<double, double>>& pulses) {
    const std::size_t n = pulses.size();
    OraclePorts out;
    out.constructive.resize(n + 1);
    out.destructive.resize(n + 1);
    auto field = [&](std::size_t idx) -> std::complex<double> {
        if (idx >= n) return {0.0, 0.0};
        return std::polar(std::sqrt(pulses[idx].first), pulses[idx].second);
    };
    for (std::size_t k = 0; k <= n; ++k) {
        const std::complex<double> cur = k < n ? field(k) : std::complex<double>{};
        const std::complex<double> prev = k > 0 ? field(k - 1) : std::complex<double>{};
        out.constructive[k] = std::norm(cur + prev) / 4.0;
        out.destructive[k] = std::norm(cur - prev) / 4.0;
    }
    return out;
}

/// Monte Carlo click frequency of a repeated Bernoulli experiment.
template <typename TrialFn>
double mc_frequency(std::size_t trials, TrialFn&& trial) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < trials; ++i) {
        if (trial()) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(trials);
}

/// Three-sigma binomial band check: |freq - p| <= 3 sqrt(p(1-p)/n).
inline bool within_3_sigma(double freq, double p, std::size_t n) {
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    return std::abs(freq - p) <= 3.0 * sigma;
}

/// Random intended DPS record over the controllable interior interference
/// slots, single detector per click. With `paired_spacing` consecutive click
/// slots are at least three slots apart (two guaranteed vacuum slots).
inline protocols::DetectionRecord random_dps_record(std::size_t length,
                                                    double click_density,
                                                    bool paired_spacing, Rng& rng) {
    protocols::DetectionRecord record{length};
    if (length < 3) return record;
    std::size_t next_allowed = 1;
    for (std::size_t slot = 1; slot + 1 < length; ++slot) {
        if (paired_spacing && slot < next_allowed) continue;
        if (!rng.bernoulli(click_density)) continue;
        record.add_click(slot, rng.bernoulli(0.5) ? protocols::DetectorId::D0
                                                  : protocols::DetectorId::D1);
        if (paired_spacing) next_allowed = slot + 3;
    }
    return record;
}

struct CowCase {
    protocols::DetectionRecord record;
    std::vector<protocols::FrameKind> frames;
};

/// Random protocol-consistent intended COW record: DB clicks only on
/// pulse-carrying slots of the frame log, DM1 only away from coherent
/// boundaries (so the honest visibility stays 1), DM2 anywhere interior,
/// including simultaneous DB+monitor events.
inline CowCase random_cow_case(std::size_t n_frames, double decoy_prob,
                               double event_density, bool paired_spacing, Rng& rng) {
    CowCase out;
    out.frames.reserve(n_frames);
    std::vector<int> bits;
    for (std::size_t f = 0; f < n_frames; ++f) {
        if (rng.bernoulli(decoy_prob)) {
            out.frames.push_back(protocols::FrameKind::decoy);
        } else {
            out.frames.push_back(rng.bernoulli(0.5) ? protocols::FrameKind::bit1
                                                    : protocols::FrameKind::bit0);
        }
    }
    const std::size_t n_slots = 2 * n_frames;
    out.record = protocols::DetectionRecord{n_slots + 1};

    std::size_t next_allowed = 0;
    bool have_coherent_dm2 = false;
    for (std::size_t slot = 0; slot < n_slots; ++slot) {
        if (paired_spacing && slot < next_allowed) continue;
        if (!rng.bernoulli(event_density)) continue;

        const bool pulse_here = protocols::cow_slot_has_pulse(out.frames, slot);
        const bool coherent = protocols::cow_coherent_boundary(out.frames, slot);
        // Interference slot `slot` is steerable when pulses slot-1 and slot
        // both exist; the trailing edge slot n_slots is never generated.
        const bool interior = slot >= 1;

        bool placed = false;
        const int kind = static_cast<int>(rng.below(3));
        if (kind == 0 && pulse_here) { // data click
            out.record.add_click(slot, protocols::DetectorId::DB);
            placed = true;
        } else if (kind == 1 && interior) { // monitor click
            if (coherent) {
                out.record.add_click(slot, protocols::DetectorId::DM2);
                have_coherent_dm2 = true;
            } else {
                out.record.add_click(slot, rng.bernoulli(0.5)
                                               ? protocols::DetectorId::DM2
                                               : protocols::DetectorId::DM1);
            }
            placed = true;
        } else if (kind == 2 && pulse_here && interior) { // simultaneous DB+monitor
            out.record.add_click(slot, protocols::DetectorId::DB);
            if (coherent) {
                out.record.add_click(slot, protocols::DetectorId::DM2);
                have_coherent_dm2 = true;
            } else {
                out.record.add_click(slot, rng.bernoulli(0.5)
                                               ? protocols::DetectorId::DM2
                                               : protocols::DetectorId::DM1);
            }
            placed = true;
        }
        if (placed && paired_spacing) next_allowed = slot + 3;
    }

    // Keep the visibility defined: force one coherent DM2 click if the frame
    // pattern offers a boundary and none was drawn.
    if (!have_coherent_dm2) {
        for (std::size_t slot = 1; slot < n_slots; ++slot) {
            if (!protocols::cow_coherent_boundary(out.frames, slot)) continue;
            if (paired_spacing) {
                bool clear = true;
                for (const auto& [s, set] : out.record.clicks()) {
                    const std::size_t lo = s < slot ? s : slot;
                    const std::size_t hi = s < slot ? slot : s;
                    if (hi - lo < 3) {
                        clear = false;
                        break;
                    }
                }
                if (!clear) continue;
            }
            out.record.add_click(slot, protocols::DetectorId::DM2);
            break;
        }
    }
    return out;
}

/// Path of the dprsim binary for process-level tests, when provided.
inline const char* dprsim_binary() { return std::getenv("DPRSIM_BIN"); }

} // namespace dpr::test

#endif // DPR_TESTS_SUPPORT_HPP
