// Seeded random streams for deterministic simulation.
//
// All randomness in the library flows from one master seed through named
// sub-streams, so e.g. enabling noise does not perturb pattern generation.
// The generator is std::mt19937_64 (bit-exact per the standard); the
// distributions are implemented here rather than taken from <random>
// because the standard does not pin their output sequences.

#ifndef CSTDP_RNG_HPP
#define CSTDP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace cstdp {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace detail

class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    /// Seed for a named sub-stream of `master`. Stable across runs and
    /// platforms; (name, index) pairs address independent streams.
    static std::uint64_t derive_seed(std::uint64_t master, std::string_view name,
                                     std::uint64_t index = 0) {
        std::uint64_t h = detail::splitmix64(master ^ detail::fnv1a64(name));
        return detail::splitmix64(h ^ detail::splitmix64(index));
    }

    static RngStream derive(std::uint64_t master, std::string_view name,
                            std::uint64_t index = 0) {
        return RngStream(derive_seed(master, name, index));
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + uniform() * (b - a); }

    /// Uniform integer in [0, n), unbiased. n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        // rejection sampling on the top of the range
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    /// Exponential with the given mean (inverse CDF).
    double exponential(double mean) { return -mean * std::log1p(-uniform()); }

    /// Gaussian via Box-Muller (two uniforms per sample).
    double gaussian(double mean, double sigma) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::mt19937_64 gen_;
};

/// Anything that can sample the waiting-state lifetimes of the synapse
/// state machines. Production code uses RngStream; tests substitute a
/// fixed-lifetime sampler to get deterministic decay.
template <class R>
concept LifetimeRng = requires(R& r, double mean) {
    { r.exponential(mean) } -> std::convertible_to<double>;
};

}  // namespace cstdp

#endif  // CSTDP_RNG_HPP
