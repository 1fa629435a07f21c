#include "nilm/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace nilm {

SamplingContext::SamplingContext(std::uint32_t sampling_hz, std::uint32_t mains_hz,
                                 double segment_duration)
    : sampling_hz_(sampling_hz), mains_hz_(mains_hz), segment_duration_(segment_duration) {
    if (sampling_hz == 0 || mains_hz == 0) {
        throw NonIntegralCycles("sampling and mains frequencies must be positive");
    }
    if (sampling_hz % mains_hz != 0) {
        throw NonIntegralCycles("sampling frequency " + std::to_string(sampling_hz) +
                                " Hz is not a multiple of mains frequency " +
                                std::to_string(mains_hz) + " Hz");
    }
    const double cycles = segment_duration * static_cast<double>(mains_hz);
    const double rounded = std::round(cycles);
    if (!(segment_duration > 0.0) || std::abs(cycles - rounded) > 1e-9 || rounded < 1.0) {
        throw NonIntegralCycles("segment duration " + std::to_string(segment_duration) +
                                " s does not span a whole number of mains cycles");
    }
    cycles_per_segment_ = static_cast<int>(rounded);
}

SamplingContext make_context(std::uint32_t sampling_hz, std::uint32_t mains_hz,
                             double segment_duration) {
    return SamplingContext(sampling_hz, mains_hz, segment_duration);
}

void EventSegment::validate() const {
    const auto expected = static_cast<std::size_t>(context.samples_per_segment());
    if (current.size() != expected || voltage.size() != expected) {
        throw LengthMismatch("segment has " + std::to_string(current.size()) + "/" +
                             std::to_string(voltage.size()) + " samples, expected " +
                             std::to_string(expected));
    }
    for (double v : current) {
        if (!std::isfinite(v)) throw Error("segment current contains non-finite values");
    }
    for (double v : voltage) {
        if (!std::isfinite(v)) throw Error("segment voltage contains non-finite values");
    }
}

LabeledDataset LabeledDataset::from_segments(std::vector<EventSegment> segments) {
    std::set<std::string> names;
    for (const auto& s : segments) names.insert(s.label);
    LabeledDataset ds;
    ds.segments = std::move(segments);
    ds.class_names.assign(names.begin(), names.end());
    return ds;
}

int LabeledDataset::class_index(const std::string& label) const {
    const auto it = std::lower_bound(class_names.begin(), class_names.end(), label);
    if (it != class_names.end() && *it == label) {
        return static_cast<int>(it - class_names.begin());
    }
    // class_names is normally sorted; fall back to a linear scan so manually
    // assembled datasets still resolve correctly.
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        if (class_names[i] == label) return static_cast<int>(i);
    }
    return -1;
}

void LabeledDataset::validate() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (const auto& s : segments) {
        s.validate();
        const int idx = class_index(s.label);
        if (idx < 0) {
            throw Error("segment label '" + s.label + "' is not in class_names");
        }
        ++counts[static_cast<std::size_t>(idx)];
    }
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) {
            throw Error("class '" + class_names[i] + "' has no segments");
        }
    }
}

std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace nilm
