#include "nilm/events.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace nilm {

void EventThresholds::validate() const {
    if (!(off_threshold >= 0.0) || !(on_threshold > off_threshold)) {
        throw Error("thresholds must satisfy on > off >= 0, got on=" +
                    std::to_string(on_threshold) + " off=" + std::to_string(off_threshold));
    }
}

std::vector<DetectedEvent> detect_events(const PowerSeries& series,
                                         const EventThresholds& thresholds) {
    thresholds.validate();
    series.validate();
    std::vector<DetectedEvent> events;
    bool on = false;
    for (std::size_t i = 0; i < series.power.size(); ++i) {
        const double p = series.power[i];
        if (!on && p >= thresholds.on_threshold) {
            events.push_back({EventKind::On, series.timestamps[i]});
            on = true;
        } else if (on && p <= thresholds.off_threshold) {
            events.push_back({EventKind::Off, series.timestamps[i]});
            on = false;
        }
    }
    return events;
}

EventSegment extract_segment(const std::vector<double>& aggregate_current,
                             const std::vector<double>& aggregate_voltage,
                             const SamplingContext& context, double event_time,
                             double stream_start) {
    if (aggregate_current.size() != aggregate_voltage.size()) {
        throw LengthMismatch("aggregate current and voltage lengths differ");
    }
    const long long start =
        std::llround((event_time - stream_start) * static_cast<double>(context.sampling_hz()));
    const long long n = context.samples_per_segment();
    if (start < 0 || start + n > static_cast<long long>(aggregate_current.size())) {
        throw OutOfRange("segment at t=" + std::to_string(event_time) + " needs samples [" +
                         std::to_string(start) + ", " + std::to_string(start + n) +
                         ") but the stream holds " + std::to_string(aggregate_current.size()));
    }
    EventSegment seg(context);
    seg.timestamp = event_time;
    const auto first = static_cast<std::size_t>(start);
    seg.current.assign(aggregate_current.begin() + first, aggregate_current.begin() + first + n);
    seg.voltage.assign(aggregate_voltage.begin() + first, aggregate_voltage.begin() + first + n);
    return seg;
}

const ThresholdTable& builtin_thresholds() {
    static const ThresholdTable table = {
        {"boiler", {70, 20}},
        {"solar_thermal_pump", {40, 20}},
        {"laptop", {20, 2}},
        {"washing_machine", {1500, 1}},
        {"dishwasher", {100, 20}},
        {"tv", {70, 10}},
        {"kitchen_lights", {70, 20}},
        {"htpc", {70, 20}},
        {"kettle", {2000, 10}},
        {"toaster", {1000, 10}},
        {"fridge", {70, 10}},
        {"microwave", {500, 10}},
        {"lcd_office", {30, 4}},
        {"breadmaker", {400, 20}},
        {"amp_livingroom", {18, 10}},
        {"hoover", {400, 10}},
        {"coffee_machine", {1000, 10}},
        {"hair_dryer", {100, 20}},
        {"straightener", {300, 5}},
        {"iron", {1000, 10}},
        {"gas_oven", {35, 10}},
        {"office_fan", {20, 2}},
        {"led_printer", {800, 3}},
        {"blond_default", {25, 20}},
    };
    return table;
}

EventThresholds default_thresholds(const std::string& appliance) {
    const auto& table = builtin_thresholds();
    auto it = table.find(appliance);
    if (it == table.end()) {
        throw UnknownAppliance("no built-in thresholds for '" + appliance + "'");
    }
    return it->second;
}

ThresholdTable read_threshold_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open threshold file '" + path + "'");
    ThresholdTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string name;
        if (!(ls >> name)) continue;  // blank or comment-only line
        EventThresholds t;
        std::string rest;
        if (!(ls >> t.on_threshold >> t.off_threshold) || (ls >> rest)) {
            throw FormatError("'" + path + "' line " + std::to_string(line_no) +
                              ": expected 'name on_watts off_watts'");
        }
        t.validate();
        table[name] = t;
    }
    return table;
}

}  // namespace nilm
