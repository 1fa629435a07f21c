#pragma once

#include <map>
#include <string>
#include <vector>

#include "nilm/core.hpp"
#include "nilm/ingest.hpp"

namespace nilm {

/// Hysteresis pair for threshold event detection: an appliance turns ON when
/// power rises to on_threshold and OFF when it falls back to off_threshold.
struct EventThresholds {
    double on_threshold = 25.0;   // watts
    double off_threshold = 20.0;  // watts

    /// Throws Error unless on_threshold > off_threshold >= 0.
    void validate() const;
};

enum class EventKind { On, Off };

struct DetectedEvent {
    EventKind kind;
    double timestamp;  // seconds, taken from the crossing sample
};

/// Threshold state machine over a per-appliance power series. Starting from
/// the OFF state, emits ON at the first sample with power >= on_threshold,
/// then OFF at the first later sample with power <= off_threshold, and so on.
/// Dips that stay above off_threshold never re-trigger.
std::vector<DetectedEvent> detect_events(const PowerSeries& series,
                                         const EventThresholds& thresholds);

/// Cuts one segment out of a high-frequency stream. The segment starts at the
/// sample nearest to event_time and spans context.samples_per_segment()
/// samples; the label is left empty for the caller to assign.
EventSegment extract_segment(const std::vector<double>& aggregate_current,
                             const std::vector<double>& aggregate_voltage,
                             const SamplingContext& context, double event_time,
                             double stream_start);

using ThresholdTable = std::map<std::string, EventThresholds>;

/// Built-in per-appliance thresholds (23 residential appliances, keys in
/// snake_case such as "kettle" or "washing_machine") plus "blond_default"
/// (25 W on / 20 W off; the off value sits below the shared 25 W switch
/// threshold so that the hysteresis invariant holds).
const ThresholdTable& builtin_thresholds();

/// Looks up `appliance` in the built-in table. Throws UnknownAppliance.
EventThresholds default_thresholds(const std::string& appliance);

/// Parses a threshold override file: one "name on_watts off_watts" triple per
/// line, '#' starts a comment. Entries override built-ins by name. Throws
/// FormatError on malformed lines and Error on invalid pairs.
ThresholdTable read_threshold_table(const std::string& path);

}  // namespace nilm
