#pragma once

#include <string>
#include <vector>

#include "nilm/core.hpp"

namespace nilm {

/// Synthetic appliance model: a steady-state sine with an exponentially
/// decaying inrush envelope, optional odd harmonics and additive Gaussian
/// noise. Distinct steady amplitudes keep classes separable by per-cycle RMS.
struct ApplianceSignature {
    std::string name;
    double steady_amplitude = 1.0;        // amperes, > 0
    double inrush_ratio = 1.0;            // peak inrush / steady, >= 1
    double inrush_decay = 0.05;           // seconds, > 0
    double phase_shift = 0.0;             // radians, in [-pi/2, pi/2]
    std::vector<double> harmonic_weights; // odd harmonics 3, 5, 7, ... relative to steady
    double noise_std = 0.0;               // amperes

    void validate() const;
};

/// Low-frequency per-appliance power trace used for event detection.
struct PowerSeries {
    std::vector<double> timestamps;  // seconds, strictly increasing
    std::vector<double> power;       // watts

    void validate() const;
};

/// RMS voltage of the synthetic mains sine (European nominal).
inline constexpr double kNominalVoltageRms = 230.0;

/// `count` well-separated signatures named class_00, class_01, ... with
/// geometrically spaced amplitudes and varying inrush/harmonic content.
std::vector<ApplianceSignature> default_signatures(std::size_t count);

/// per_class segments per signature. Current is
///   steady_amplitude * envelope(t) * sin(c(t) - phase)
///   + steady_amplitude * sum_j w_j * sin((3 + 2 j) * c(t))
///   + Gaussian noise,
/// with envelope(t) = 1 + (inrush_ratio - 1) * exp(-t / inrush_decay) and
/// carrier c(t) = 2 pi f0 t + event_phase; event_phase is drawn uniformly
/// per segment because appliance switching is not synchronized to the grid.
/// Voltage is the ideal mains sine on the same carrier, so relative phase
/// and cycle-aligned magnitudes are unaffected by the event phase.
/// Deterministic for a fixed rng seed.
LabeledDataset generate_dataset(const std::vector<ApplianceSignature>& signatures,
                                std::size_t per_class, const SamplingContext& context,
                                Rng& rng);

/// Reads a NILMSEG1 segment file; header geometry must match `context`.
LabeledDataset read_segments(const std::string& path, const SamplingContext& context);

/// Reads a NILMSEG1 segment file, deriving the context from the header.
LabeledDataset read_segments(const std::string& path);

/// Writes a NILMSEG1 segment file; read_segments() restores it exactly.
void write_segments(const LabeledDataset& dataset, const std::string& path);

}  // namespace nilm
