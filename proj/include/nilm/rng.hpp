#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace nilm {

/// Deterministic random number generator based on SplitMix64 (Steele, Lea &
/// Flood; the java.util.SplittableRandom mixer). The state is a counter that
/// advances by the 64-bit golden-ratio constant and is scrambled through two
/// multiply-xorshift rounds, so equal seeds yield identical streams on every
/// platform. All derived draws (uniform, normal, shuffle, sampling) are built
/// from next_u64() with fixed algorithms; none of them depend on
/// implementation-defined standard-library distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n); n must be > 0. Uses rejection sampling.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~0ull - ~0ull % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal draw via Box-Muller; the second value of each pair is
    /// cached, so the stream state includes the spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * kPi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices drawn from [0, n) without replacement, returned in
    /// ascending order (partial Fisher-Yates over the index range).
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

    /// Derives an independent child generator; the parent state is untouched.
    /// Distinct stream ids give distinct child streams under one parent.
    Rng fork(std::uint64_t stream) const {
        Rng child(state_ ^ (0xA0761D6478BD642Full * (stream + 1)));
        child.next_u64();
        return child;
    }

private:
    static constexpr double kPi = 3.14159265358979323846;
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace nilm
