#include "nilm/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "nilm/binio.hpp"

namespace nilm {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr char kSegmentMagic[8] = {'N', 'I', 'L', 'M', 'S', 'E', 'G', '1'};

}  // namespace

void ApplianceSignature::validate() const {
    if (name.empty()) throw Error("signature name must not be empty");
    if (!(steady_amplitude > 0.0)) throw Error("steady_amplitude must be > 0");
    if (!(inrush_ratio >= 1.0)) throw Error("inrush_ratio must be >= 1");
    if (!(inrush_decay > 0.0)) throw Error("inrush_decay must be > 0");
    if (std::abs(phase_shift) > kPi / 2.0 + 1e-12) {
        throw Error("phase_shift must lie in [-pi/2, pi/2]");
    }
    if (noise_std < 0.0) throw Error("noise_std must be >= 0");
}

void PowerSeries::validate() const {
    if (timestamps.size() != power.size()) {
        throw LengthMismatch("power series has " + std::to_string(timestamps.size()) +
                             " timestamps but " + std::to_string(power.size()) + " values");
    }
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        if (!(timestamps[i] > timestamps[i - 1])) {
            throw Error("power series timestamps must be strictly increasing");
        }
    }
    for (double p : power) {
        if (!std::isfinite(p)) throw Error("power series contains non-finite values");
    }
}

std::vector<ApplianceSignature> default_signatures(std::size_t count) {
    std::vector<ApplianceSignature> sigs;
    sigs.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        ApplianceSignature s;
        char name[32];
        std::snprintf(name, sizeof(name), "class_%02zu", c);
        s.name = name;
        // Amplitude spacing and noise are chosen so integrative features
        // (RMS, harmonics, phase) separate the classes cleanly while raw
        // sample values overlap across neighboring classes once the random
        // event phase is applied.
        s.steady_amplitude = 0.5 * std::pow(1.25, static_cast<double>(c));
        s.inrush_ratio = 1.0 + 0.4 * static_cast<double>(c % 4);
        s.inrush_decay = 0.02 + 0.01 * static_cast<double>(c % 5);
        s.phase_shift = -0.6 + 1.2 * static_cast<double>(c % 7) / 6.0;
        s.harmonic_weights = {0.05 * static_cast<double>((c + 1) % 3),
                              0.04 * static_cast<double>(c % 2),
                              0.02 * static_cast<double>(c % 5) / 4.0};
        s.noise_std = 0.05 * s.steady_amplitude;
        sigs.push_back(std::move(s));
    }
    return sigs;
}

LabeledDataset generate_dataset(const std::vector<ApplianceSignature>& signatures,
                                std::size_t per_class, const SamplingContext& context,
                                Rng& rng) {
    if (signatures.empty()) throw Error("at least one signature is required");
    if (per_class < 1) throw Error("per_class must be >= 1");
    {
        std::set<std::string> names;
        for (const auto& s : signatures) {
            s.validate();
            if (!names.insert(s.name).second) {
                throw DuplicateClassName("duplicate class name '" + s.name + "'");
            }
        }
    }

    const int n = context.samples_per_segment();
    const double fs = static_cast<double>(context.sampling_hz());
    const double f0 = static_cast<double>(context.mains_hz());
    const double v_peak = kNominalVoltageRms * std::sqrt(2.0);

    std::vector<EventSegment> segments;
    segments.reserve(signatures.size() * per_class);
    std::size_t total = 0;
    for (const auto& sig : signatures) {
        for (std::size_t rep = 0; rep < per_class; ++rep) {
            EventSegment seg(context);
            seg.label = sig.name;
            seg.timestamp = static_cast<double>(total++) * context.segment_duration();
            seg.current.resize(static_cast<std::size_t>(n));
            seg.voltage.resize(static_cast<std::size_t>(n));
            // Appliance switching is not synchronized to the grid, so each
            // segment starts at a uniformly random point of the mains cycle.
            // The inrush envelope stays anchored at the segment start (the
            // switch-on instant); only the carrier is shifted, for voltage
            // and current alike, so relative phase and per-cycle RMS are
            // unchanged while raw sample values vary segment to segment.
            const double event_phase = 2.0 * kPi * rng.uniform();
            for (int i = 0; i < n; ++i) {
                const double t = static_cast<double>(i) / fs;
                const double carrier = 2.0 * kPi * f0 * t + event_phase;
                const double envelope =
                    1.0 + (sig.inrush_ratio - 1.0) * std::exp(-t / sig.inrush_decay);
                double cur =
                    sig.steady_amplitude * envelope * std::sin(carrier - sig.phase_shift);
                for (std::size_t h = 0; h < sig.harmonic_weights.size(); ++h) {
                    const double k = static_cast<double>(3 + 2 * h);
                    cur += sig.steady_amplitude * sig.harmonic_weights[h] * std::sin(k * carrier);
                }
                if (sig.noise_std > 0.0) cur += rng.normal(0.0, sig.noise_std);
                seg.current[static_cast<std::size_t>(i)] = cur;
                seg.voltage[static_cast<std::size_t>(i)] = v_peak * std::sin(carrier);
            }
            segments.push_back(std::move(seg));
        }
    }
    LabeledDataset ds = LabeledDataset::from_segments(std::move(segments));
    ds.validate();
    return ds;
}

void write_segments(const LabeledDataset& dataset, const std::string& path) {
    dataset.validate();
    if (dataset.segments.empty()) throw Error("cannot write an empty dataset");
    if (dataset.class_names.size() > 0xFFFF) throw Error("too many classes for u16 index");
    const SamplingContext& ctx = dataset.segments.front().context;
    for (const auto& s : dataset.segments) {
        if (!(s.context == ctx)) throw Error("segments in one file must share a context");
    }

    BinaryWriter w(path);
    w.write_bytes(kSegmentMagic, sizeof(kSegmentMagic));
    w.write_u32(ctx.sampling_hz());
    w.write_u32(ctx.mains_hz());
    w.write_u32(static_cast<std::uint32_t>(ctx.samples_per_segment()));
    w.write_u32(static_cast<std::uint32_t>(dataset.segments.size()));
    w.write_u32(static_cast<std::uint32_t>(dataset.class_names.size()));
    for (const auto& name : dataset.class_names) w.write_string(name);
    for (const auto& s : dataset.segments) {
        w.write_u16(static_cast<std::uint16_t>(dataset.class_index(s.label)));
        w.write_f64(s.timestamp);
        w.write_f64_array(s.current.data(), s.current.size());
        w.write_f64_array(s.voltage.data(), s.voltage.size());
    }
    w.finish();
}

namespace {

LabeledDataset read_segments_impl(BinaryReader& r, const std::string& path,
                                  const SamplingContext& context) {
    const std::uint32_t samples = r.read_u32();
    if (samples != static_cast<std::uint32_t>(context.samples_per_segment())) {
        throw LengthMismatch("'" + path + "' holds " + std::to_string(samples) +
                             "-sample records, context expects " +
                             std::to_string(context.samples_per_segment()));
    }
    const std::uint32_t record_count = r.read_u32();
    const std::uint32_t class_count = r.read_u32();
    std::vector<std::string> table(class_count);
    for (auto& name : table) name = r.read_string();

    std::vector<EventSegment> segments;
    segments.reserve(record_count);
    for (std::uint32_t i = 0; i < record_count; ++i) {
        const std::uint16_t cls = r.read_u16();
        if (cls >= class_count) {
            throw FormatError("'" + path + "': record " + std::to_string(i) +
                              " references unknown class index " + std::to_string(cls));
        }
        EventSegment seg(context);
        seg.label = table[cls];
        seg.timestamp = r.read_f64();
        seg.current.resize(samples);
        seg.voltage.resize(samples);
        r.read_f64_array(seg.current.data(), samples);
        r.read_f64_array(seg.voltage.data(), samples);
        for (double v : seg.current) {
            if (!std::isfinite(v)) throw FormatError("'" + path + "': non-finite current sample");
        }
        for (double v : seg.voltage) {
            if (!std::isfinite(v)) throw FormatError("'" + path + "': non-finite voltage sample");
        }
        segments.push_back(std::move(seg));
    }
    if (!r.at_eof()) throw FormatError("'" + path + "': trailing bytes after last record");

    LabeledDataset ds = LabeledDataset::from_segments(std::move(segments));
    ds.validate();
    return ds;
}

void check_magic(BinaryReader& r, const std::string& path) {
    char magic[8];
    r.read_bytes(magic, sizeof(magic));
    if (!std::equal(magic, magic + 8, kSegmentMagic)) {
        throw FormatError("'" + path + "' is not a NILMSEG1 segment file");
    }
}

}  // namespace

LabeledDataset read_segments(const std::string& path, const SamplingContext& context) {
    BinaryReader r(path);
    check_magic(r, path);
    const std::uint32_t fs = r.read_u32();
    const std::uint32_t f0 = r.read_u32();
    if (fs != context.sampling_hz() || f0 != context.mains_hz()) {
        throw FormatError("'" + path + "' was recorded at " + std::to_string(fs) + "/" +
                          std::to_string(f0) + " Hz, context expects " +
                          std::to_string(context.sampling_hz()) + "/" +
                          std::to_string(context.mains_hz()) + " Hz");
    }
    return read_segments_impl(r, path, context);
}

LabeledDataset read_segments(const std::string& path) {
    BinaryReader r(path);
    check_magic(r, path);
    const std::uint32_t fs = r.read_u32();
    const std::uint32_t f0 = r.read_u32();
    const std::uint32_t samples = r.read_u32();
    if (fs == 0 || f0 == 0 || samples == 0) {
        throw FormatError("'" + path + "': invalid header frequencies");
    }
    SamplingContext context = [&] {
        try {
            return make_context(fs, f0, static_cast<double>(samples) / static_cast<double>(fs));
        } catch (const Error& e) {
            throw FormatError("'" + path + "': inconsistent header (" + e.what() + ")");
        }
    }();
    // Re-open to keep the parse logic in one place.
    BinaryReader r2(path);
    check_magic(r2, path);
    r2.read_u32();
    r2.read_u32();
    return read_segments_impl(r2, path, context);
}

}  // namespace nilm
