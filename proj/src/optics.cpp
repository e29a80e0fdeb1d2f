#include "dpr/optics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dpr::optics {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kQuarterTurn = std::numbers::pi / 2.0;
} // namespace

double canonical_phase(double phase_rad) {
    double r = std::fmod(phase_rad, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0; // rounding of the negative branch can land on 2*pi
    return r;
}

double phase_from_quarter_turns(int quarters) {
    int q = quarters % 4;
    if (q < 0) q += 4;
    // q * fl(pi/2) is exact: the mantissa of pi/2 times 3 still fits in 53 bits.
    return static_cast<double>(q) * kQuarterTurn;
}

Pulse::Pulse(double power_uw, double phase_rad) {
    if (!(power_uw >= 0.0)) {
        throw std::invalid_argument("Pulse: power must be a nonnegative number of µW");
    }
    power_uw_ = power_uw;
    phase_rad_ = (power_uw == 0.0) ? 0.0 : canonical_phase(phase_rad);
}

double PulseTrain::total_power_uw() const {
    double sum = 0.0;
    for (const Pulse& p : slots_) sum += p.power_uw();
    return sum;
}

double PortPowers::total_uw() const {
    double sum = 0.0;
    for (double v : constructive_uw) sum += v;
    for (double v : destructive_uw) sum += v;
    return sum;
}

std::pair<Pulse, Pulse> coupler_split(const Pulse& pulse, double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument("coupler_split: splitting ratio must lie in [0, 1]");
    }
    Pulse kept{t * pulse.power_uw(), pulse.phase_rad()};
    Pulse tapped{(1.0 - t) * pulse.power_uw(), pulse.phase_rad()};
    return {kept, tapped};
}

PortPowers mzi_port_powers(const PulseTrain& train) {
    const std::size_t n = train.size();
    PortPowers out;
    out.constructive_uw.resize(n + 1);
    out.destructive_uw.resize(n + 1);

    for (std::size_t k = 0; k <= n; ++k) {
        const bool has_cur = k < n;
        const bool has_prev = k > 0;
        const double p_cur = has_cur ? train[k].power_uw() : 0.0;
        const double p_prev = has_prev ? train[k - 1].power_uw() : 0.0;

        double cross = 0.0;
        if (p_cur > 0.0 && p_prev > 0.0) {
            // Equal powers take the symbolic |A| product so that ideal
            // interference nulls come out exactly zero.
            const double geometric =
                (p_cur == p_prev) ? p_cur : std::sqrt(p_cur * p_prev);
            cross = 2.0 * geometric *
                    std::cos(train[k].phase_rad() - train[k - 1].phase_rad());
        }

        const double sum = p_cur + p_prev;
        double constructive = (sum + cross) / 4.0;
        double destructive = (sum - cross) / 4.0;
        if (constructive < 0.0) constructive = 0.0;
        if (destructive < 0.0) destructive = 0.0;
        out.constructive_uw[k] = constructive;
        out.destructive_uw[k] = destructive;
    }
    return out;
}

PulseTrain attenuate(const PulseTrain& train, double transmittance) {
    if (!(transmittance >= 0.0 && transmittance <= 1.0)) {
        throw std::invalid_argument("attenuate: transmittance must lie in [0, 1]");
    }
    std::vector<Pulse> slots;
    slots.reserve(train.size());
    for (const Pulse& p : train) {
        slots.emplace_back(transmittance * p.power_uw(), p.phase_rad());
    }
    return PulseTrain{std::move(slots)};
}

} // namespace dpr::optics
