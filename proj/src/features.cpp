#include "nilm/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>

namespace nilm {
namespace {

constexpr double kPi = 3.14159265358979323846;

double rms(const std::vector<double>& x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return x.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(x.size()));
}

double mean_abs(const std::vector<double>& x) {
    double acc = 0.0;
    for (double v : x) acc += std::abs(v);
    return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

/// |sum_n x_n e^{-i w n}| via the Goertzel recurrence (no per-sample trig).
double goertzel_magnitude(const std::vector<double>& x, double omega) {
    const double coeff = 2.0 * std::cos(omega);
    double s1 = 0.0, s2 = 0.0;
    for (double v : x) {
        const double s0 = v + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    const double power = s1 * s1 + s2 * s2 - coeff * s1 * s2;
    return std::sqrt(std::max(power, 0.0));
}

/// Phase of the fundamental, defined so that x = sin(w t - phi) yields -phi.
double fundamental_phase(const std::vector<double>& x, double omega) {
    double cs = 0.0, cc = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double a = omega * static_cast<double>(n);
        cs += x[n] * std::sin(a);
        cc += x[n] * std::cos(a);
    }
    if (cs == 0.0 && cc == 0.0) return 0.0;
    return std::atan2(cc, cs);
}

double wrap_angle(double a) {
    while (a > kPi) a -= 2.0 * kPi;
    while (a <= -kPi) a += 2.0 * kPi;
    return a;
}

void warn_silent_current() {
    static std::once_flag flag;
    std::call_once(flag, [] {
        std::cerr << "warning: silent current channel, ratio features set to 0\n";
    });
}

int env_thread_cap() {
    const char* env = std::getenv("NILM_THREADS");
    if (env == nullptr) return 0;
    const long v = std::strtol(env, nullptr, 10);
    return v >= 1 ? static_cast<int>(v) : 0;  // malformed values are ignored
}

std::string indexed_name(const char* prefix, int index, int width) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, index);
    return buf;
}

}  // namespace

void FeatureVector::validate() const {
    if (values.size() != names.size()) {
        throw LengthMismatch("feature vector has " + std::to_string(values.size()) +
                             " values but " + std::to_string(names.size()) + " names");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw Error("feature vector contains non-finite values");
    }
}

void FeatureMatrix::validate() const {
    if (static_cast<long>(names.size()) != values.cols()) {
        throw LengthMismatch("feature matrix has " + std::to_string(values.cols()) +
                             " columns but " + std::to_string(names.size()) + " names");
    }
    if (static_cast<long>(labels.size()) != values.rows()) {
        throw LengthMismatch("feature matrix has " + std::to_string(values.rows()) +
                             " rows but " + std::to_string(labels.size()) + " labels");
    }
    if (!values.allFinite()) throw Error("feature matrix contains non-finite values");
}

void HandcraftedConfig::validate() const {
    if (!(power || shape || phase || harmonics || thd || spectral_flatness || cycle_rms ||
          inrush)) {
        throw EmptyConfig("every feature group is disabled");
    }
    if (harmonic_count < 1) throw Error("harmonic_count must be >= 1");
}

std::vector<double> cycle_rms(const EventSegment& segment) {
    segment.validate();
    const int spc = segment.context.samples_per_cycle();
    const int cycles = segment.context.cycles_per_segment();
    std::vector<double> out(static_cast<std::size_t>(cycles));
    for (int j = 0; j < cycles; ++j) {
        double acc = 0.0;
        const std::size_t base = static_cast<std::size_t>(j) * static_cast<std::size_t>(spc);
        for (int n = 0; n < spc; ++n) {
            const double v = segment.current[base + static_cast<std::size_t>(n)];
            acc += v * v;
        }
        out[static_cast<std::size_t>(j)] = std::sqrt(acc / static_cast<double>(spc));
    }
    return out;
}

FeatureVector extract_handcrafted(const EventSegment& segment, const HandcraftedConfig& config) {
    config.validate();
    segment.validate();
    const SamplingContext& ctx = segment.context;
    if ((config.harmonics || config.thd || config.spectral_flatness) &&
        static_cast<double>(config.harmonic_count) * ctx.mains_hz() >=
            0.5 * static_cast<double>(ctx.sampling_hz())) {
        throw Error("harmonic_count " + std::to_string(config.harmonic_count) +
                    " reaches past the Nyquist frequency at f_s=" +
                    std::to_string(ctx.sampling_hz()));
    }

    const double rms_i = rms(segment.current);
    const double rms_v = rms(segment.voltage);
    if ((config.power || config.phase) && rms_v == 0.0) {
        throw DegenerateSignal("voltage channel is all zero");
    }
    const bool silent = rms_i == 0.0;
    if (silent && (config.power || config.shape || config.phase || config.harmonics ||
                   config.thd || config.inrush)) {
        warn_silent_current();
    }

    FeatureVector fv;
    auto push = [&fv](const std::string& name, double value) {
        fv.names.push_back(name);
        fv.values.push_back(value);
    };

    if (config.power) {
        double p = 0.0;
        for (std::size_t n = 0; n < segment.current.size(); ++n) {
            p += segment.current[n] * segment.voltage[n];
        }
        p /= static_cast<double>(segment.current.size());
        const double s = rms_i * rms_v;
        push("active_power", p);
        push("apparent_power", s);
        push("reactive_power", std::sqrt(std::max(s * s - p * p, 0.0)));
        push("admittance", rms_i / rms_v);
    }
    if (config.shape) {
        double peak = 0.0;
        for (double v : segment.current) peak = std::max(peak, std::abs(v));
        const double mai = mean_abs(segment.current);
        push("crest_factor", rms_i > 0.0 ? peak / rms_i : 0.0);
        push("form_factor", mai > 0.0 ? rms_i / mai : 0.0);
    }

    const double omega0 = 2.0 * kPi * static_cast<double>(ctx.mains_hz()) /
                          static_cast<double>(ctx.sampling_hz());
    if (config.phase) {
        if (silent) {
            push("phase_shift", 0.0);
        } else {
            const double phi_v = fundamental_phase(segment.voltage, omega0);
            const double phi_i = fundamental_phase(segment.current, omega0);
            push("phase_shift", wrap_angle(phi_v - phi_i));
        }
    }

    std::vector<double> harm;
    if (config.harmonics || config.thd) {
        harm.resize(static_cast<std::size_t>(config.harmonic_count));
        const double two_over_n = 2.0 / static_cast<double>(segment.current.size());
        for (int k = 1; k <= config.harmonic_count; ++k) {
            harm[static_cast<std::size_t>(k - 1)] =
                two_over_n * goertzel_magnitude(segment.current, omega0 * k);
        }
        const double h1 = harm[0];
        for (double& h : harm) h = h1 > 0.0 ? h / h1 : 0.0;
    }
    if (config.harmonics) {
        for (int k = 1; k <= config.harmonic_count; ++k) {
            push(indexed_name("harmonic_", k, 2), harm[static_cast<std::size_t>(k - 1)]);
        }
    }
    if (config.thd) {
        double acc = 0.0;
        for (std::size_t k = 1; k < harm.size(); ++k) acc += harm[k] * harm[k];
        push("thd", std::sqrt(acc));
    }
    if (config.spectral_flatness) {
        // Bins at multiples of the segment resolution 1/duration, up to
        // harmonic_count * f_0; the band's geometric over arithmetic mean.
        const int bins = config.harmonic_count * ctx.cycles_per_segment();
        const double omega_res = 2.0 * kPi / static_cast<double>(ctx.samples_per_segment());
        double log_acc = 0.0, lin_acc = 0.0;
        for (int k = 1; k <= bins; ++k) {
            const double m = goertzel_magnitude(segment.current, omega_res * k);
            log_acc += std::log(std::max(m, 1e-300));
            lin_acc += m;
        }
        const double am = lin_acc / static_cast<double>(bins);
        const double gm = std::exp(log_acc / static_cast<double>(bins));
        push("spectral_flatness", am > 0.0 ? gm / am : 0.0);
    }

    if (config.cycle_rms || config.inrush) {
        const std::vector<double> traj = cycle_rms(segment);
        if (config.cycle_rms) {
            double m = 0.0;
            for (double v : traj) m += v;
            m /= static_cast<double>(traj.size());
            double var = 0.0;
            for (double v : traj) var += (v - m) * (v - m);
            var /= static_cast<double>(traj.size());
            push("cycle_rms_mean", m);
            push("cycle_rms_std", std::sqrt(var));
            push("cycle_rms_max", *std::max_element(traj.begin(), traj.end()));
            push("cycle_rms_min", *std::min_element(traj.begin(), traj.end()));
        }
        if (config.inrush) {
            const double last = traj.back();
            const double peak = *std::max_element(traj.begin(), traj.end());
            push("max_inrush_ratio", last > 0.0 ? peak / last : 0.0);
            push("inrush_current_ratio", last > 0.0 ? traj.front() / last : 0.0);
        }
    }

    fv.validate();
    return fv;
}

FeatureVector rms25(const EventSegment& segment) {
    const std::vector<double> traj = cycle_rms(segment);
    FeatureVector fv;
    fv.values = traj;
    fv.names.reserve(traj.size());
    for (std::size_t j = 0; j < traj.size(); ++j) {
        fv.names.push_back(indexed_name("rms_cycle_", static_cast<int>(j), 2));
    }
    return fv;
}

FeatureVector random_subsample(const EventSegment& segment, int dims, Rng rng) {
    segment.validate();
    const int n = segment.context.samples_per_segment();
    if (dims < 1) throw Error("dims must be >= 1");
    if (dims > n) {
        throw DimsTooLarge("cannot pick " + std::to_string(dims) + " distinct samples from " +
                           std::to_string(n));
    }
    const std::vector<std::size_t> idx =
        rng.sample_indices(static_cast<std::size_t>(n), static_cast<std::size_t>(dims));
    const int width = static_cast<int>(std::to_string(n - 1).size());
    FeatureVector fv;
    fv.values.reserve(idx.size());
    fv.names.reserve(idx.size());
    for (std::size_t i : idx) {
        fv.values.push_back(segment.current[i]);
        fv.names.push_back(indexed_name("raw_", static_cast<int>(i), width));
    }
    return fv;
}

FeatureMatrix extract_matrix(const LabeledDataset& dataset, const FeatureExtractor& extractor) {
    dataset.validate();
    const std::size_t rows = dataset.segments.size();
    if (rows == 0) throw EmptyTrainSet("dataset has no segments");

    FeatureMatrix m;
    m.labels.reserve(rows);
    for (const auto& s : dataset.segments) m.labels.push_back(s.label);

    FeatureVector first = extractor(dataset.segments.front());
    first.validate();
    m.names = first.names;
    m.values.resize(static_cast<long>(rows), static_cast<long>(first.values.size()));
    for (std::size_t c = 0; c < first.values.size(); ++c) {
        m.values(0, static_cast<long>(c)) = first.values[c];
    }

    int workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    const int cap = env_thread_cap();
    if (cap > 0) workers = std::min(workers, cap);
    workers = std::min<int>(workers, static_cast<int>(rows));

    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&](std::size_t begin, std::size_t end) {
        try {
            for (std::size_t r = begin; r < end; ++r) {
                FeatureVector fv = extractor(dataset.segments[r]);
                fv.validate();
                if (fv.names != m.names) {
                    throw Error("extractor produced inconsistent feature names at row " +
                                std::to_string(r));
                }
                for (std::size_t c = 0; c < fv.values.size(); ++c) {
                    m.values(static_cast<long>(r), static_cast<long>(c)) = fv.values[c];
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };

    if (workers <= 1 || rows <= 2) {
        worker(1, rows);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (rows - 1 + static_cast<std::size_t>(workers) - 1) /
                                  static_cast<std::size_t>(workers);
        for (int w = 0; w < workers; ++w) {
            const std::size_t begin = 1 + static_cast<std::size_t>(w) * chunk;
            const std::size_t end = std::min(rows, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(worker, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
    return m;
}

FeatureMatrix raw_current_matrix(const LabeledDataset& dataset) {
    dataset.validate();
    if (dataset.segments.empty()) throw EmptyTrainSet("dataset has no segments");
    const int n = dataset.segments.front().context.samples_per_segment();
    const int width = static_cast<int>(std::to_string(n - 1).size());
    FeatureMatrix m;
    m.values.resize(static_cast<long>(dataset.segments.size()), n);
    m.names.reserve(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) m.names.push_back(indexed_name("raw_", c, width));
    m.labels.reserve(dataset.segments.size());
    for (std::size_t r = 0; r < dataset.segments.size(); ++r) {
        const auto& seg = dataset.segments[r];
        m.labels.push_back(seg.label);
        for (int c = 0; c < n; ++c) {
            m.values(static_cast<long>(r), c) = seg.current[static_cast<std::size_t>(c)];
        }
    }
    return m;
}

}  // namespace nilm
