#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nilm/errors.hpp"
#include "nilm/rng.hpp"

namespace nilm {

/// Sampling geometry shared by every segment: high-frequency sampling rate,
/// mains frequency and segment duration. Valid contexts always contain a
/// whole number of samples per mains cycle and a whole number of cycles per
/// segment, so cycle-aligned operations (per-cycle RMS, harmonic bins,
/// pooling schedules) never need fractional indices.
class SamplingContext {
public:
    SamplingContext(std::uint32_t sampling_hz, std::uint32_t mains_hz,
                    double segment_duration = 0.5);

    std::uint32_t sampling_hz() const { return sampling_hz_; }
    std::uint32_t mains_hz() const { return mains_hz_; }
    double segment_duration() const { return segment_duration_; }

    int samples_per_cycle() const { return static_cast<int>(sampling_hz_ / mains_hz_); }
    /// Number of mains cycles per segment (n_p).
    int cycles_per_segment() const { return cycles_per_segment_; }
    int samples_per_segment() const { return samples_per_cycle() * cycles_per_segment_; }

    bool operator==(const SamplingContext& o) const {
        return sampling_hz_ == o.sampling_hz_ && mains_hz_ == o.mains_hz_ &&
               segment_duration_ == o.segment_duration_;
    }

private:
    std::uint32_t sampling_hz_;
    std::uint32_t mains_hz_;
    double segment_duration_;
    int cycles_per_segment_;
};

/// Validating factory; throws NonIntegralCycles when sampling_hz is not a
/// multiple of mains_hz or the duration does not span a whole number of
/// cycles.
SamplingContext make_context(std::uint32_t sampling_hz, std::uint32_t mains_hz,
                             double segment_duration = 0.5);

/// One startup transient: current and voltage over the first segment_duration
/// seconds after an appliance event, plus the class label assigned to it.
struct EventSegment {
    explicit EventSegment(SamplingContext ctx) : context(ctx) {}

    std::vector<double> current;   // amperes
    std::vector<double> voltage;   // volts
    std::string label;             // empty until assigned
    double timestamp = 0.0;        // seconds since epoch
    SamplingContext context;

    /// Throws LengthMismatch on wrong sample counts, Error on non-finite
    /// values.
    void validate() const;
};

/// A collection of labeled segments. class_names is kept sorted and acts as
/// the canonical class-index mapping for classifiers, confusion matrices and
/// the segment file format.
struct LabeledDataset {
    std::vector<EventSegment> segments;
    std::vector<std::string> class_names;

    /// Builds a dataset from segments, deriving class_names as the sorted
    /// set of labels present.
    static LabeledDataset from_segments(std::vector<EventSegment> segments);

    std::size_t size() const { return segments.size(); }
    int class_index(const std::string& label) const;  // -1 if unknown

    /// Checks every invariant: segments valid, every label known, every
    /// class populated.
    void validate() const;
};

}  // namespace nilm
