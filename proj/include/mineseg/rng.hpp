#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mineseg {

/// SplitMix64 finalizer; used to derive independent stream seeds from counters.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seed of the stream identified by (seed, counters...). Streams for distinct
/// counter tuples are statistically independent.
inline std::uint64_t stream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) noexcept {
    std::uint64_t h = mix64(seed);
    for (const auto c : counters) {
        h = mix64(h ^ mix64(c + 0x632BE59BD9B4E019ull));
    }
    return h;
}

/// Portable random stream. The engine is fully specified by the standard; the
/// distributions are implemented here because the std:: ones are not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> counters)
        : engine_(stream_seed(seed, counters)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), unbiased.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) {
            return 0;
        }
        const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
        std::uint64_t x = engine_();
        while (x >= limit) {
            x = engine_();
        }
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal (Box-Muller, one value per call).
    double normal();

    /// Normal(0, sigma) truncated to [-bound*sigma, bound*sigma] by rejection.
    double truncated_normal(double sigma, double bound);

    /// Uniform random permutation of [0, n) (Fisher-Yates; always consumes n-1 draws).
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::mt19937_64 engine_;
};

}  // namespace mineseg
