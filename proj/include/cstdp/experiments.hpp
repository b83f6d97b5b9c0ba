// Experiment harnesses: single-neuron spike-time convergence (with synapse
// recruitment profiles), multi-association capacity versus recall tolerance,
// interference stability, weight-scale calibration, and the full-scale
// capacity extrapolation. All runs are deterministic functions of
// (config, seed); trials fan out over worker threads and are reduced in
// index order, so thread count never changes results.

#ifndef CSTDP_EXPERIMENTS_HPP
#define CSTDP_EXPERIMENTS_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "cstdp/codec.hpp"
#include "cstdp/config.hpp"
#include "cstdp/engine.hpp"
#include "cstdp/rng.hpp"

namespace cstdp {

namespace detail {

template <class Fn>
inline void parallel_for(int n_jobs, int threads, Fn&& fn) {
    threads = std::max(1, std::min(threads, n_jobs));
    if (threads == 1) {
        for (int i = 0; i < n_jobs; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n_jobs; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

inline std::vector<SpikeEvent> shift_times(std::vector<SpikeEvent> events, double dt_ms) {
    for (auto& e : events) e.time_ms += dt_ms;
    return events;
}

}  // namespace detail

/// Recalled phases sit on the timestep grid, so errors equal to a tolerance
/// carry float dust (e.g. 3.0000000000000004); hits allow for it.
inline bool within_tolerance(double err_ms, double tolerance_ms) {
    return err_ms <= tolerance_ms + 1e-9;
}

/// Lock-class histogram of a snapshot, indexed by LockClass.
inline std::array<int, lock_class_count> class_counts(const WeightSnapshot& snap) {
    std::array<int, lock_class_count> counts{};
    for (const auto& r : snap.rows) ++counts[static_cast<int>(r.lock_class)];
    return counts;
}

/// Nearest recalled spike phase within the window [cycle*T, (cycle+1)*T),
/// measured against `target_phase` by circular distance.
inline std::optional<double> recalled_phase_in_cycle(const std::vector<OutputSpike>& spikes,
                                                     long long cycle, double t_cycle_ms,
                                                     double target_phase_ms) {
    const double w0 = static_cast<double>(cycle) * t_cycle_ms;
    const double w1 = w0 + t_cycle_ms;
    std::optional<double> best;
    double best_err = std::numeric_limits<double>::infinity();
    for (const auto& s : spikes) {
        if (s.time_ms < w0 || s.time_ms >= w1) continue;
        double phase = s.time_ms - w0;
        double err = circular_distance(phase, target_phase_ms, t_cycle_ms);
        if (err < best_err) {
            best_err = err;
            best = phase;
        }
    }
    return best;
}

// --- recall scoring ---------------------------------------------------------

struct RecallMetrics {
    std::vector<std::optional<double>> recalled_phase_ms;  // per presentation window
    std::vector<std::optional<double>> abs_error_ms;       // circular, vs taught phase
    std::vector<int> hits_per_tolerance;                   // parallel to the tolerance grid
    std::array<int, lock_class_count> class_histogram{};   // filled by the harness

    int presentations() const { return static_cast<int>(recalled_phase_ms.size()); }
};

/// Score a recall trace: one taught phase per presentation window, hits
/// counted per tolerance. A window without a spike misses at every tolerance.
inline RecallMetrics compute_metrics(const RunTrace& trace,
                                     const std::vector<double>& taught_phases_ms,
                                     double t_cycle_ms,
                                     const std::vector<double>& tolerances_ms) {
    RecallMetrics m;
    m.hits_per_tolerance.assign(tolerances_ms.size(), 0);
    for (std::size_t w = 0; w < taught_phases_ms.size(); ++w) {
        auto phase = recalled_phase_in_cycle(trace.spikes, static_cast<long long>(w),
                                             t_cycle_ms, taught_phases_ms[w]);
        m.recalled_phase_ms.push_back(phase);
        if (phase) {
            double err = circular_distance(*phase, taught_phases_ms[w], t_cycle_ms);
            m.abs_error_ms.push_back(err);
            for (std::size_t j = 0; j < tolerances_ms.size(); ++j)
                if (within_tolerance(err, tolerances_ms[j])) ++m.hits_per_tolerance[j];
        } else {
            m.abs_error_ms.push_back(std::nullopt);
        }
    }
    return m;
}

// --- Experiment I: single-neuron convergence and recruitment ----------------

struct Exp1Config {
    int n_trials = 100;
    int n_repeats = 30;
    double target_phase_ms = 18.0;
    int recall_cycles = 4;
    int measured_cycle = 3;  // 1-based; the paper reads the third presentation

    void validate() const {
        if (n_trials < 1 || n_repeats < 1)
            throw std::invalid_argument("exp1: trial and repeat counts must be positive");
        if (measured_cycle < 1 || measured_cycle > recall_cycles)
            throw std::invalid_argument("exp1: measured cycle must lie within the recall cycles");
    }
};

struct Exp1Trial {
    // per training iteration (0-based)
    std::vector<std::optional<double>> recalled_phase_ms;
    std::vector<std::array<int, lock_class_count>> class_histogram;
    std::vector<std::array<int, lock_class_count>> commits_by_outcome;

    std::optional<int> first_recall_iteration() const {
        for (std::size_t i = 0; i < recalled_phase_ms.size(); ++i)
            if (recalled_phase_ms[i]) return static_cast<int>(i);
        return std::nullopt;
    }
};

struct Exp1Result {
    Exp1Config cfg;
    double t_cycle_ms = 0.0;
    std::vector<Exp1Trial> trials;

    int recalled_count(int iter) const {
        int c = 0;
        for (const auto& t : trials)
            if (t.recalled_phase_ms[iter]) ++c;
        return c;
    }
    double miss_fraction(int iter) const {
        return 1.0 - static_cast<double>(recalled_count(iter)) /
                         static_cast<double>(trials.size());
    }
    double mean_recalled_phase(int iter) const {
        double sum = 0.0;
        int c = 0;
        for (const auto& t : trials)
            if (auto p = t.recalled_phase_ms[iter]) {
                sum += *p;
                ++c;
            }
        return c ? sum / c : std::numeric_limits<double>::quiet_NaN();
    }
    double mean_abs_error(int iter) const {
        double sum = 0.0;
        int c = 0;
        for (const auto& t : trials)
            if (auto p = t.recalled_phase_ms[iter]) {
                sum += circular_distance(*p, cfg.target_phase_ms, t_cycle_ms);
                ++c;
            }
        return c ? sum / c : std::numeric_limits<double>::quiet_NaN();
    }
    /// Number of leading iterations in which no trial recalled a spike.
    int silent_prefix() const {
        for (int i = 0; i < cfg.n_repeats; ++i)
            if (recalled_count(i) > 0) return i;
        return cfg.n_repeats;
    }
};

inline Exp1Trial run_exp1_trial(const RunConfig& cfg, const Exp1Config& e1, int trial) {
    const double t_cyc = cfg.t_cyc;
    auto pat_rng = RngStream::derive(cfg.seed, "exp1/pattern", static_cast<std::uint64_t>(trial));
    CyclicPattern pattern = generate_pattern(cfg.m, cfg.n, t_cyc, cfg.t_bin, pat_rng);
    auto noise_rng = RngStream::derive(cfg.seed, "exp1/noise", static_cast<std::uint64_t>(trial));
    std::vector<SpikeEvent> inputs =
        apply_noise(render_cycles(pattern, e1.n_repeats), cfg.noise_spec(),
                    e1.n_repeats * t_cyc, cfg.m, noise_rng);
    std::vector<SpikeEvent> recall_inputs = render_cycles(pattern, e1.recall_cycles);

    Network net = cfg.network(RunMode::Training);
    RngStream life = RngStream::derive(cfg.seed, "exp1/life", static_cast<std::uint64_t>(trial));

    Exp1Trial out;
    out.recalled_phase_ms.reserve(e1.n_repeats);
    std::size_t in_pos = 0;
    for (int k = 0; k < e1.n_repeats; ++k) {
        Schedule sk;
        sk.t_begin_ms = k * t_cyc;
        sk.t_end_ms = (k + 1) * t_cyc;
        sk.probe_phase_ms = e1.target_phase_ms;
        sk.teachers = {{k, e1.target_phase_ms}};
        while (in_pos < inputs.size() && inputs[in_pos].time_ms < sk.t_end_ms)
            sk.inputs.push_back(inputs[in_pos++]);
        RunTrace tr = run(net, sk, life);

        std::array<int, lock_class_count> commits{};
        for (const auto& c : tr.commits) ++commits[static_cast<int>(c.outcome)];
        out.commits_by_outcome.push_back(commits);

        WeightSnapshot snap = snapshot_weights(net);
        out.class_histogram.push_back(class_counts(snap));

        Network rnet = cfg.network(RunMode::Recall);
        restore_weights(rnet, snap);
        Schedule rs;
        rs.t_begin_ms = 0.0;
        rs.t_end_ms = e1.recall_cycles * t_cyc;
        rs.probe_phase_ms = e1.target_phase_ms;
        rs.inputs = recall_inputs;
        RngStream unused(0);
        RunTrace rt = run(rnet, rs, unused);
        out.recalled_phase_ms.push_back(recalled_phase_in_cycle(
            rt.spikes, e1.measured_cycle - 1, t_cyc, e1.target_phase_ms));
    }
    return out;
}

inline Exp1Result run_experiment1(const RunConfig& cfg, const Exp1Config& e1,
                                  int threads = 1) {
    cfg.validate();
    e1.validate();
    Exp1Result result;
    result.cfg = e1;
    result.t_cycle_ms = cfg.t_cyc;
    result.trials.resize(e1.n_trials);
    detail::parallel_for(e1.n_trials, threads,
                         [&](int i) { result.trials[i] = run_exp1_trial(cfg, e1, i); });
    return result;
}

inline void write_exp1_convergence_csv(std::ostream& os, const Exp1Result& r) {
    os << "iteration,mean_recalled_phase_ms,miss_fraction,mean_abs_error_ms\n";
    for (int i = 0; i < r.cfg.n_repeats; ++i) {
        double phase = r.mean_recalled_phase(i);
        double err = r.mean_abs_error(i);
        os << (i + 1) << ',' << (std::isnan(phase) ? "" : format_double(phase)) << ','
           << format_double(r.miss_fraction(i)) << ','
           << (std::isnan(err) ? "" : format_double(err)) << '\n';
    }
}

inline void write_exp1_recruitment_csv(std::ostream& os, const Exp1Result& r) {
    os << "iteration,unrecruited,potentiated,depressed,locked_dep,locked_pot,locked_ffwd\n";
    for (int i = 0; i < r.cfg.n_repeats; ++i) {
        std::array<double, lock_class_count> mean{};
        for (const auto& t : r.trials)
            for (int c = 0; c < lock_class_count; ++c) mean[c] += t.class_histogram[i][c];
        os << (i + 1);
        for (int c = 0; c < lock_class_count; ++c)
            os << ',' << format_double(mean[c] / r.trials.size());
        os << '\n';
    }
}

// --- Experiment II: capacity by tolerance -----------------------------------

struct Exp2Config {
    std::vector<int> set_sizes{5, 10, 15, 20, 25, 30};
    int n_repeats = 30;
    int recall_presentations = 5;
    std::vector<double> tolerances_ms{0.5, 1.0, 2.0, 3.0, 5.0, 7.0};

    void validate() const {
        if (set_sizes.empty()) throw std::invalid_argument("exp2: no set sizes");
        for (int s : set_sizes)
            if (s < 1) throw std::invalid_argument("exp2: set sizes must be positive");
        if (n_repeats < 1 || recall_presentations < 1)
            throw std::invalid_argument("exp2: repeat counts must be positive");
        for (std::size_t i = 0; i < tolerances_ms.size(); ++i) {
            if (tolerances_ms[i] <= 0)
                throw std::invalid_argument("exp2: tolerances must be positive");
            if (i > 0 && tolerances_ms[i] <= tolerances_ms[i - 1])
                throw std::invalid_argument("exp2: tolerances must ascend");
        }
    }
};

struct Exp2Cell {
    int set_size;
    double tolerance_ms;
    int hits;
    int total;
};

struct Exp2Result {
    Exp2Config cfg;
    std::vector<Exp2Cell> cells;  // set-size major, tolerance minor
    std::vector<RecallMetrics> pattern_metrics;  // per (set size, pattern)

    int hits(int set_size, double tolerance_ms) const {
        for (const auto& c : cells)
            if (c.set_size == set_size && c.tolerance_ms == tolerance_ms) return c.hits;
        throw std::invalid_argument("exp2: no such cell");
    }
};

/// Train `size` patterns back to back on one network (synapse state and the
/// clock carry across patterns), then score each pattern's recall on the
/// final weights.
inline std::vector<RecallMetrics> run_exp2_set(const RunConfig& cfg, const Exp2Config& e2,
                                               int size, std::uint64_t set_key) {
    const double t_cyc = cfg.t_cyc;
    const auto spc = static_cast<std::uint64_t>(std::llround(t_cyc / cfg.timestep));
    const std::uint64_t set_seed = RngStream::derive_seed(cfg.seed, "exp2/set", set_key);

    std::vector<CyclicPattern> patterns;
    std::vector<double> phases;
    patterns.reserve(size);
    for (int i = 0; i < size; ++i) {
        auto prng = RngStream::derive(set_seed, "pattern", static_cast<std::uint64_t>(i));
        patterns.push_back(generate_pattern(cfg.m, cfg.n, t_cyc, cfg.t_bin, prng));
        auto phrng = RngStream::derive(set_seed, "phase", static_cast<std::uint64_t>(i));
        phases.push_back(static_cast<double>(phrng.uniform_int(spc)) * cfg.timestep);
    }

    Network net = cfg.network(RunMode::Training);
    RngStream life = RngStream::derive(set_seed, "life");
    RngStream noise_rng = RngStream::derive(set_seed, "noise");
    for (int i = 0; i < size; ++i) {
        const double t0 = static_cast<double>(i) * e2.n_repeats * t_cyc;
        const long long cyc0 = static_cast<long long>(i) * e2.n_repeats;
        Schedule s;
        s.t_begin_ms = t0;
        s.t_end_ms = t0 + e2.n_repeats * t_cyc;
        s.probe_phase_ms = phases[i];
        s.inputs = detail::shift_times(
            apply_noise(render_cycles(patterns[i], e2.n_repeats), cfg.noise_spec(),
                        e2.n_repeats * t_cyc, cfg.m, noise_rng),
            t0);
        for (int k = 0; k < e2.n_repeats; ++k) s.teachers.push_back({cyc0 + k, phases[i]});
        run(net, s, life);
    }

    // single continuous test phase: pattern blocks back to back, so only the
    // very first presentation starts from rest
    WeightSnapshot trained = snapshot_weights(net);
    Network rnet = cfg.network(RunMode::Recall);
    restore_weights(rnet, trained);
    Schedule s;
    s.t_begin_ms = 0.0;
    s.t_end_ms = size * e2.recall_presentations * t_cyc;
    for (int i = 0; i < size; ++i) {
        double block_t0 = static_cast<double>(i) * e2.recall_presentations * t_cyc;
        auto block = render_cycles(patterns[i], e2.recall_presentations, block_t0);
        s.inputs.insert(s.inputs.end(), block.begin(), block.end());
    }
    RngStream unused(0);
    RunTrace tr = run(rnet, s, unused);

    std::vector<RecallMetrics> out;
    out.reserve(size);
    for (int i = 0; i < size; ++i) {
        RecallMetrics m;
        m.hits_per_tolerance.assign(e2.tolerances_ms.size(), 0);
        for (int w = 0; w < e2.recall_presentations; ++w) {
            long long window = static_cast<long long>(i) * e2.recall_presentations + w;
            auto phase = recalled_phase_in_cycle(tr.spikes, window, t_cyc, phases[i]);
            m.recalled_phase_ms.push_back(phase);
            if (phase) {
                double err = circular_distance(*phase, phases[i], t_cyc);
                m.abs_error_ms.push_back(err);
                for (std::size_t j = 0; j < e2.tolerances_ms.size(); ++j)
                    if (within_tolerance(err, e2.tolerances_ms[j])) ++m.hits_per_tolerance[j];
            } else {
                m.abs_error_ms.push_back(std::nullopt);
            }
        }
        m.class_histogram = class_counts(trained);
        out.push_back(std::move(m));
    }
    return out;
}

inline Exp2Result run_experiment2(const RunConfig& cfg, const Exp2Config& e2,
                                  int threads = 1) {
    cfg.validate();
    e2.validate();
    Exp2Result result;
    result.cfg = e2;
    const int n_sizes = static_cast<int>(e2.set_sizes.size());
    std::vector<std::vector<RecallMetrics>> per_size(n_sizes);
    detail::parallel_for(n_sizes, threads, [&](int si) {
        per_size[si] = run_exp2_set(cfg, e2, e2.set_sizes[si],
                                    static_cast<std::uint64_t>(e2.set_sizes[si]));
    });
    for (int si = 0; si < n_sizes; ++si) {
        const int size = e2.set_sizes[si];
        std::vector<int> hits(e2.tolerances_ms.size(), 0);
        for (const auto& m : per_size[si])
            for (std::size_t j = 0; j < hits.size(); ++j)
                hits[j] += m.hits_per_tolerance[j];
        for (std::size_t j = 0; j < hits.size(); ++j)
            result.cells.push_back({size, e2.tolerances_ms[j], hits[j],
                                    size * e2.recall_presentations});
        for (auto& m : per_size[si]) result.pattern_metrics.push_back(std::move(m));
    }
    return result;
}

inline void write_exp2_capacity_csv(std::ostream& os, const Exp2Result& r) {
    os << "set_size,tolerance_ms,hits,total\n";
    for (const auto& c : r.cells)
        os << c.set_size << ',' << format_double(c.tolerance_ms) << ',' << c.hits << ','
           << c.total << '\n';
}

/// Full-scale headcount: a memory of M neurons holding sparse N-of-M output
/// patterns multiplexes each neuron across M/N of the associations.
inline long long extrapolate_capacity(long long single_neuron_patterns, std::uint32_t m,
                                      std::uint32_t n) {
    if (n == 0) throw std::invalid_argument("extrapolation requires N > 0");
    return single_neuron_patterns * static_cast<long long>(m) / static_cast<long long>(n);
}

// --- interference stability --------------------------------------------------

struct InterferenceOutcome {
    std::optional<double> phase_before_ms;  // pattern 0 recall right after training it
    std::optional<double> phase_after_ms;   // same measurement after the extra patterns
};

/// Train one pattern, measure its recall, train `n_extra` further patterns on
/// the same network, measure again.
inline InterferenceOutcome interference_trial(const RunConfig& cfg, int n_extra,
                                              std::uint64_t seed, int n_repeats = 30,
                                              int recall_cycles = 4, int measured_cycle = 3) {
    const double t_cyc = cfg.t_cyc;
    const auto spc = static_cast<std::uint64_t>(std::llround(t_cyc / cfg.timestep));

    const int total = n_extra + 1;
    std::vector<CyclicPattern> patterns;
    std::vector<double> phases;
    for (int i = 0; i < total; ++i) {
        auto prng = RngStream::derive(seed, "intf/pattern", static_cast<std::uint64_t>(i));
        patterns.push_back(generate_pattern(cfg.m, cfg.n, t_cyc, cfg.t_bin, prng));
        auto phrng = RngStream::derive(seed, "intf/phase", static_cast<std::uint64_t>(i));
        phases.push_back(static_cast<double>(phrng.uniform_int(spc)) * cfg.timestep);
    }

    Network net = cfg.network(RunMode::Training);
    RngStream life = RngStream::derive(seed, "intf/life");
    RngStream noise_rng = RngStream::derive(seed, "intf/noise");
    auto train_one = [&](int i) {
        const double t0 = static_cast<double>(i) * n_repeats * t_cyc;
        Schedule s;
        s.t_begin_ms = t0;
        s.t_end_ms = t0 + n_repeats * t_cyc;
        s.probe_phase_ms = phases[i];
        s.inputs = detail::shift_times(
            apply_noise(render_cycles(patterns[i], n_repeats), cfg.noise_spec(),
                        n_repeats * t_cyc, cfg.m, noise_rng),
            t0);
        for (int k = 0; k < n_repeats; ++k)
            s.teachers.push_back({static_cast<long long>(i) * n_repeats + k, phases[i]});
        run(net, s, life);
    };
    auto measure = [&]() -> std::optional<double> {
        Network rnet = cfg.network(RunMode::Recall);
        restore_weights(rnet, snapshot_weights(net));
        Schedule s;
        s.t_begin_ms = 0.0;
        s.t_end_ms = recall_cycles * t_cyc;
        s.probe_phase_ms = phases[0];
        s.inputs = render_cycles(patterns[0], recall_cycles);
        RngStream unused(0);
        RunTrace tr = run(rnet, s, unused);
        return recalled_phase_in_cycle(tr.spikes, measured_cycle - 1, t_cyc, phases[0]);
    };

    InterferenceOutcome out;
    train_one(0);
    out.phase_before_ms = measure();
    for (int i = 1; i < total; ++i) train_one(i);
    out.phase_after_ms = measure();
    return out;
}

// --- weight-scale calibration -------------------------------------------------

/// Mean steady-state probe potential of an untrained network under a set of
/// random patterns at the given weight scale. Returns +infinity if any
/// feedforward spike occurred (scale clearly too high).
inline double untrained_probe_mean(const RunConfig& cfg, double scale, int n_patterns,
                                   int settle_cycles, int measure_cycles) {
    const double t_cyc = cfg.t_cyc;
    const auto spc = static_cast<long long>(std::llround(t_cyc / cfg.timestep));
    const double probe_phase = static_cast<double>(spc / 2) * cfg.timestep;
    const int cycles = settle_cycles + measure_cycles;
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < n_patterns; ++i) {
        auto prng = RngStream::derive(cfg.seed, "calib/pattern", static_cast<std::uint64_t>(i));
        CyclicPattern pat = generate_pattern(cfg.m, cfg.n, t_cyc, cfg.t_bin, prng);
        RunConfig c = cfg;
        c.weight_scale = scale;
        Network net = c.network(RunMode::Recall);
        Schedule s;
        s.t_begin_ms = 0.0;
        s.t_end_ms = cycles * t_cyc;
        s.probe_phase_ms = probe_phase;
        s.inputs = render_cycles(pat, cycles);
        RngStream unused(0);
        RunTrace tr = run(net, s, unused);
        if (!tr.spikes.empty()) return std::numeric_limits<double>::infinity();
        for (const auto& p : tr.probes) {
            if (p.cycle < settle_cycles) continue;
            sum += p.v_mv;
            ++count;
        }
    }
    return sum / count;
}

/// Binary search for the weight scale that puts the untrained steady-state
/// probe potential at calib_fraction of the way from rest to threshold.
inline double calibrate_weight_scale(const RunConfig& cfg, int n_patterns = 6,
                                     int settle_cycles = 3, int measure_cycles = 8) {
    cfg.validate();
    const double target =
        cfg.v_0 + cfg.calib_fraction * (cfg.v_thresh - cfg.v_0);
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < 64 &&
                    untrained_probe_mean(cfg, hi, n_patterns, settle_cycles, measure_cycles) < target;
         ++i)
        hi *= 2.0;
    for (int i = 0; i < 64; ++i) {
        double mid = 0.5 * (lo + hi);
        if (untrained_probe_mean(cfg, mid, n_patterns, settle_cycles, measure_cycles) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace cstdp

#endif  // CSTDP_EXPERIMENTS_HPP
