// Cyclic N-of-M spatiotemporal codewords.
//
// A codeword picks N distinct channels out of M and gives each one a firing
// phase, stored as an integer bin index so that rendered spike trains repeat
// exactly from cycle to cycle. Rendering produces concrete spike events;
// apply_noise perturbs them with Gaussian jitter and adds Poisson background
// spikes while keeping signal/noise provenance queryable.

#ifndef CSTDP_CODEC_HPP
#define CSTDP_CODEC_HPP

#include <gmp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cstdp/io.hpp"
#include "cstdp/rng.hpp"

namespace cstdp {

enum class SpikeKind : std::uint8_t { Signal, Noise, Teacher };

inline std::string_view to_string(SpikeKind k) {
    switch (k) {
        case SpikeKind::Signal: return "signal";
        case SpikeKind::Noise: return "noise";
        case SpikeKind::Teacher: return "teacher";
    }
    return "?";
}

/// Reserved out-of-band channel id for teacher events in rasters.
inline constexpr std::uint32_t teacher_channel = 0xffffffffu;

struct SpikeEvent {
    std::uint32_t channel;
    double time_ms;
    SpikeKind kind;

    friend bool operator==(const SpikeEvent&, const SpikeEvent&) = default;
};

inline bool spike_time_order(const SpikeEvent& a, const SpikeEvent& b) {
    if (a.time_ms != b.time_ms) return a.time_ms < b.time_ms;
    if (a.channel != b.channel) return a.channel < b.channel;
    return a.kind < b.kind;
}

namespace detail {

inline std::uint32_t bins_for(double t_cycle_ms, double t_bin_ms) {
    if (t_bin_ms <= 0.0 || t_cycle_ms <= 0.0)
        throw std::invalid_argument("pattern geometry: cycle and bin width must be positive");
    double ratio = t_cycle_ms / t_bin_ms;
    auto b = static_cast<std::uint64_t>(std::llround(ratio));
    if (b < 1 || std::abs(ratio - static_cast<double>(b)) > 1e-9 * ratio)
        throw std::invalid_argument("pattern geometry: T_cycle must be an integer multiple of T_bin");
    if (b > std::numeric_limits<std::uint32_t>::max())
        throw std::invalid_argument("pattern geometry: too many bins per cycle");
    return static_cast<std::uint32_t>(b);
}

}  // namespace detail

struct CyclicPattern {
    struct Entry {
        std::uint32_t channel;
        std::uint32_t bin;

        friend bool operator==(const Entry&, const Entry&) = default;
    };

    std::uint32_t m = 0;
    std::uint32_t n = 0;
    double t_cycle_ms = 0.0;
    double t_bin_ms = 0.0;
    std::vector<Entry> entries;  // sorted by channel, exactly n of them

    std::uint32_t bins_per_cycle() const { return detail::bins_for(t_cycle_ms, t_bin_ms); }

    /// Spike density N / T_cycle, in spikes per second.
    double spike_density_hz() const { return 1000.0 * n / t_cycle_ms; }

    void validate() const {
        std::uint32_t b = bins_per_cycle();
        if (n > m) throw std::invalid_argument("pattern geometry: N exceeds M");
        if (entries.size() != n)
            throw std::invalid_argument("pattern: entry count differs from N");
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].channel >= m)
                throw std::invalid_argument("pattern: channel index out of range");
            if (entries[i].bin >= b)
                throw std::invalid_argument("pattern: phase bin out of range");
            if (i > 0 && entries[i - 1].channel >= entries[i].channel)
                throw std::invalid_argument("pattern: channels must be distinct");
        }
    }

    friend bool operator==(const CyclicPattern&, const CyclicPattern&) = default;
};

struct NoiseSpec {
    double poisson_rate_hz = 0.0;  // background spike rate per channel
    double jitter_sigma_ms = 0.0;  // std. dev. of the zero-mean shift on signal spikes

    void validate() const {
        if (poisson_rate_hz < 0.0 || jitter_sigma_ms < 0.0)
            throw std::invalid_argument("noise spec: rates must be non-negative");
    }
};

/// Uniformly random codeword: N distinct channels, each with an independent
/// uniform phase bin. Deterministic for a given stream.
inline CyclicPattern generate_pattern(std::uint32_t m, std::uint32_t n, double t_cycle_ms,
                                      double t_bin_ms, RngStream& rng) {
    std::uint32_t bins = detail::bins_for(t_cycle_ms, t_bin_ms);
    if (n > m) throw std::invalid_argument("pattern geometry: N exceeds M");

    std::vector<std::uint32_t> pool(m);
    std::iota(pool.begin(), pool.end(), 0u);
    CyclicPattern p{m, n, t_cycle_ms, t_bin_ms, {}};
    p.entries.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto j = i + static_cast<std::uint32_t>(rng.uniform_int(m - i));
        std::swap(pool[i], pool[j]);
        p.entries.push_back({pool[i], static_cast<std::uint32_t>(rng.uniform_int(bins))});
    }
    std::sort(p.entries.begin(), p.entries.end(),
              [](const auto& a, const auto& b) { return a.channel < b.channel; });
    return p;
}

/// Information content of an N-of-M codeword in bits: exact binomial term
/// (arbitrary-precision integer, then log2) plus N*log2(B) temporal bits.
inline double info_content_bits(std::uint32_t m, std::uint32_t n, double t_cycle_ms,
                                double t_bin_ms) {
    std::uint32_t bins = detail::bins_for(t_cycle_ms, t_bin_ms);
    if (n > m) throw std::invalid_argument("pattern geometry: N exceeds M");

    mpz_t binom;
    mpz_init(binom);
    mpz_bin_uiui(binom, m, n);
    long exp2 = 0;
    double mant = mpz_get_d_2exp(&exp2, binom);
    mpz_clear(binom);
    double spatial = std::log2(mant) + static_cast<double>(exp2);
    double temporal = static_cast<double>(n) * std::log2(static_cast<double>(bins));
    return spatial + temporal;
}

/// Perfect exemplars of the pattern: one Signal event per entry per cycle,
/// sorted by time.
inline std::vector<SpikeEvent> render_cycles(const CyclicPattern& p, long n_cycles,
                                             double t_start_ms = 0.0) {
    std::vector<SpikeEvent> out;
    if (n_cycles <= 0) return out;
    out.reserve(static_cast<std::size_t>(n_cycles) * p.entries.size());
    for (long k = 0; k < n_cycles; ++k) {
        double base = t_start_ms + static_cast<double>(k) * p.t_cycle_ms;
        for (const auto& e : p.entries)
            out.push_back({e.channel, base + e.bin * p.t_bin_ms, SpikeKind::Signal});
    }
    std::sort(out.begin(), out.end(), spike_time_order);
    return out;
}

/// Jitters every Signal event by Gaussian(0, sigma) clamped to [0, t_end) and
/// adds an independent Poisson background train per channel. Provenance kinds
/// are preserved; the result is time-sorted.
inline std::vector<SpikeEvent> apply_noise(std::vector<SpikeEvent> events,
                                           const NoiseSpec& spec, double t_end_ms,
                                           std::uint32_t m, RngStream& rng) {
    spec.validate();
    if (spec.jitter_sigma_ms == 0.0 && spec.poisson_rate_hz == 0.0) return events;

    const double t_max = std::nextafter(t_end_ms, 0.0);
    if (spec.jitter_sigma_ms > 0.0) {
        for (auto& e : events) {
            if (e.kind != SpikeKind::Signal) continue;
            double t = e.time_ms + rng.gaussian(0.0, spec.jitter_sigma_ms);
            e.time_ms = std::clamp(t, 0.0, t_max);
        }
    }
    if (spec.poisson_rate_hz > 0.0) {
        const double mean_gap_ms = 1000.0 / spec.poisson_rate_hz;
        for (std::uint32_t c = 0; c < m; ++c) {
            double t = rng.exponential(mean_gap_ms);
            while (t < t_end_ms) {
                events.push_back({c, t, SpikeKind::Noise});
                t += rng.exponential(mean_gap_ms);
            }
        }
    }
    std::sort(events.begin(), events.end(), spike_time_order);
    return events;
}

/// Raster export, one row per event: `channel,time_ms,kind`.
inline void write_raster_csv(std::ostream& os, const std::vector<SpikeEvent>& events) {
    os << "channel,time_ms,kind\n";
    for (const auto& e : events)
        os << e.channel << ',' << format_double(e.time_ms) << ',' << to_string(e.kind)
           << '\n';
}

/// Pattern persistence: geometry header `M,N,T_cycle_ms,T_bin_ms`, then one
/// `channel,bin` pair per line. Lines starting with '#' are skipped on read.
inline void save_pattern(std::ostream& os, const CyclicPattern& p) {
    os << "M,N,T_cycle_ms,T_bin_ms\n"
       << p.m << ',' << p.n << ',' << format_double(p.t_cycle_ms) << ','
       << format_double(p.t_bin_ms) << '\n';
    for (const auto& e : p.entries) os << e.channel << ',' << e.bin << '\n';
}

inline CyclicPattern load_pattern(std::istream& is) {
    std::string line;
    auto next_line = [&]() -> std::string_view {
        while (std::getline(is, line)) {
            auto t = trim(line);
            if (!t.empty() && t.front() != '#') return t;
        }
        return {};
    };

    auto header = next_line();
    if (header != "M,N,T_cycle_ms,T_bin_ms")
        throw std::invalid_argument("pattern file: missing geometry header");
    auto geom = split(next_line(), ',');
    if (geom.size() != 4) throw std::invalid_argument("pattern file: bad geometry line");

    CyclicPattern p;
    p.m = static_cast<std::uint32_t>(parse_u64(geom[0]));
    p.n = static_cast<std::uint32_t>(parse_u64(geom[1]));
    p.t_cycle_ms = parse_double(geom[2]);
    p.t_bin_ms = parse_double(geom[3]);
    for (std::uint32_t i = 0; i < p.n; ++i) {
        auto f = split(next_line(), ',');
        if (f.size() != 2) throw std::invalid_argument("pattern file: bad entry line");
        p.entries.push_back({static_cast<std::uint32_t>(parse_u64(f[0])),
                             static_cast<std::uint32_t>(parse_u64(f[1]))});
    }
    p.validate();
    return p;
}

/// Circular distance between two phases within a cycle of length `period`.
inline double circular_distance(double a, double b, double period) {
    double d = std::fmod(std::abs(a - b), period);
    return std::min(d, period - d);
}

}  // namespace cstdp

#endif  // CSTDP_CODEC_HPP
