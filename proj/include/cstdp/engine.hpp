// Clock-driven simulation kernel.
//
// One memory neuron fully connected to M input channels, advanced on a fixed
// timestep. Within a step the order is: deliver due back-propagated post
// events, deliver input spikes (conductance drive plus pre-side plasticity),
// handle the per-cycle probe/teacher block, then integrate the membrane.
// Somatic spikes reach the synapses T_D later. Triggered weight changes are
// staged and committed once per cycle at the teacher phase, where the
// lock-zone test uses the probe recorded on the previous cycle.
//
// A Network is plain state owned by one engine invocation at a time; runs
// are resumable (the clock carries across calls) and fully deterministic
// given (network, schedule, rng stream).

#ifndef CSTDP_ENGINE_HPP
#define CSTDP_ENGINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cstdp/codec.hpp"
#include "cstdp/io.hpp"
#include "cstdp/neuron.hpp"
#include "cstdp/plasticity.hpp"
#include "cstdp/rng.hpp"

namespace cstdp {

enum class RunMode : std::uint8_t { Training, Recall };

struct Network {
    std::uint32_t m = 0;
    double dt_ms = 0.1;
    double t_cycle_ms = 35.0;
    RunMode mode = RunMode::Training;
    double weight_scale = 1.0;  // global weight-to-conductance calibration
    NeuronParams neuron_params;
    LearningParams learning;
    NeuronState neuron;
    std::vector<SynapseState> synapses;
    double now_ms = 0.0;
    // carried across resumable runs: staged weight changes await the next
    // commit point, and in-flight back-propagated post events their delivery
    std::vector<PendingChange> pending_changes;
    std::deque<double> post_due_ms;
};

inline Network make_network(std::uint32_t m, double dt_ms, double t_cycle_ms,
                            const NeuronParams& np, const LearningParams& lp,
                            double weight_scale, RunMode mode) {
    np.validate();
    lp.validate();
    if (m == 0) throw std::invalid_argument("network: M must be positive");
    if (dt_ms <= 0) throw std::invalid_argument("network: timestep must be positive");
    Network net;
    net.m = m;
    net.dt_ms = dt_ms;
    net.t_cycle_ms = t_cycle_ms;
    net.mode = mode;
    net.weight_scale = weight_scale;
    net.neuron_params = np;
    net.learning = lp;
    net.neuron = make_neuron_state(np);
    net.synapses.assign(m, make_synapse(lp));
    return net;
}

struct TeacherEvent {
    long long cycle;   // global cycle index
    double phase_ms;   // must equal the schedule's probe phase
};

struct Schedule {
    std::vector<SpikeEvent> inputs;      // absolute times, sorted
    std::vector<TeacherEvent> teachers;  // ascending cycle
    double probe_phase_ms = 0.0;         // per-cycle probe (t_fire) phase
    double t_begin_ms = 0.0;             // must be a cycle boundary
    double t_end_ms = 0.0;
    bool record_membrane = false;        // per-step potential trace in the result
};

struct OutputSpike {
    double time_ms;
    bool forced;  // teacher-forced rather than feedforward

    friend bool operator==(const OutputSpike&, const OutputSpike&) = default;
};

struct ProbeSample {
    long long cycle;
    double time_ms;
    double v_mv;

    friend bool operator==(const ProbeSample&, const ProbeSample&) = default;
};

struct CommitRecord {
    long long cycle;  // cycle at which the commit was applied
    double time_ms;
    std::uint32_t synapse;
    ChangeDirection direction;
    LockClass outcome;

    friend bool operator==(const CommitRecord&, const CommitRecord&) = default;
};

struct RunTrace {
    std::vector<OutputSpike> spikes;
    std::vector<ProbeSample> probes;
    std::vector<CommitRecord> commits;
    std::vector<double> absorbed_teacher_ms;
    long long teacher_fired = 0;
    std::size_t inputs_delivered = 0;
    double membrane_t0_ms = 0.0;       // start time of the membrane samples
    std::vector<double> membrane_mv;   // one sample per step when requested

    friend bool operator==(const RunTrace&, const RunTrace&) = default;
};

namespace detail {

/// Step index covering time t: exact for grid-aligned times, floor otherwise.
inline long long step_of(double t_ms, double dt_ms) {
    double q = t_ms / dt_ms;
    double r = std::nearbyint(q);
    if (std::abs(q - r) < 1e-6) return static_cast<long long>(r);
    return static_cast<long long>(std::floor(q));
}

inline long long aligned_steps(double t_ms, double dt_ms, const char* what) {
    double q = t_ms / dt_ms;
    auto r = static_cast<long long>(std::llround(q));
    if (std::abs(q - static_cast<double>(r)) > 1e-6)
        throw std::invalid_argument(std::string(what) + " must align to the timestep grid");
    return r;
}

}  // namespace detail

/// Advance the network over the schedule. The network clock must sit at the
/// schedule start, which must be a cycle boundary.
inline RunTrace run(Network& net, const Schedule& sched, RngStream& rng) {
    const NeuronParams& np = net.neuron_params;
    const LearningParams& lp = net.learning;
    const double dt = net.dt_ms;

    const long long spc = detail::aligned_steps(net.t_cycle_ms, dt, "cycle length");
    const long long probe_offset =
        detail::aligned_steps(sched.probe_phase_ms, dt, "probe phase");
    if (probe_offset < 0 || probe_offset >= spc)
        throw std::invalid_argument("probe phase must lie within the cycle");
    const long long n_begin = detail::aligned_steps(sched.t_begin_ms, dt, "schedule start");
    const long long n_end = detail::aligned_steps(sched.t_end_ms, dt, "schedule end");
    if (n_begin % spc != 0)
        throw std::invalid_argument("schedule start must be a cycle boundary");
    if (n_end <= n_begin) throw std::invalid_argument("schedule end precedes start");
    if (std::abs(net.now_ms - sched.t_begin_ms) > 1e-6)
        throw std::invalid_argument("network clock does not match schedule start");
    if (net.synapses.size() != net.m)
        throw std::invalid_argument("network: synapse count differs from M");

    for (std::size_t i = 0; i < sched.inputs.size(); ++i) {
        const auto& e = sched.inputs[i];
        if (e.kind == SpikeKind::Teacher)
            throw std::invalid_argument("schedule: teacher events do not belong in the input stream");
        if (e.channel >= net.m)
            throw std::invalid_argument("schedule: event channel exceeds network geometry");
        if (e.time_ms < sched.t_begin_ms || e.time_ms >= sched.t_end_ms)
            throw std::invalid_argument("schedule: event time outside the run window");
        if (i > 0 && e.time_ms < sched.inputs[i - 1].time_ms)
            throw std::invalid_argument("schedule: input events out of order");
    }
    for (std::size_t i = 0; i < sched.teachers.size(); ++i) {
        const auto& te = sched.teachers[i];
        if (std::abs(te.phase_ms - sched.probe_phase_ms) > 1e-9)
            throw std::invalid_argument("schedule: teacher phase differs from probe phase");
        if (te.cycle < n_begin / spc || te.cycle >= (n_end + spc - 1) / spc)
            throw std::invalid_argument("schedule: teacher cycle outside the run window");
        if (i > 0 && te.cycle <= sched.teachers[i - 1].cycle)
            throw std::invalid_argument("schedule: teacher cycles out of order");
    }

    RunTrace trace;
    trace.membrane_t0_ms = sched.t_begin_ms;
    std::deque<double>& post_due = net.post_due_ms;
    std::vector<PendingChange>& pendings = net.pending_changes;
    std::size_t in_idx = 0;
    std::size_t teach_idx = 0;
    const bool training = net.mode == RunMode::Training;

    // at most one staged change per synapse per cycle: the first trigger wins
    auto stage = [&pendings](ChangeDirection dir, std::uint32_t synapse, long long cycle) {
        for (const PendingChange& pc : pendings)
            if (pc.synapse == synapse) return;
        pendings.push_back({dir, synapse, cycle});
    };

    for (long long n = n_begin; n < n_end; ++n) {
        const double t = static_cast<double>(n) * dt;
        const long long cyc = n / spc;
        const long long in_cycle = n - cyc * spc;
        if (in_cycle == 0) net.neuron.fired_feedforward = false;

        // 1. back-propagated post events due this step
        while (!post_due.empty() && detail::step_of(post_due.front(), dt) <= n) {
            const double t_post = post_due.front();
            post_due.pop_front();
            for (std::uint32_t i = 0; i < net.m; ++i) {
                SynapseState& s = net.synapses[i];
                if (s.locked()) continue;
                leak_to(s, lp, t_post);
                if (auto dir = on_post_spike(s, lp, t_post, rng)) stage(*dir, i, cyc);
            }
        }

        // 2. input spikes due this step
        double w_sum = 0.0;
        while (in_idx < sched.inputs.size() &&
               detail::step_of(sched.inputs[in_idx].time_ms, dt) == n) {
            const SpikeEvent& e = sched.inputs[in_idx];
            SynapseState& s = net.synapses[e.channel];
            w_sum += s.weight * net.weight_scale;
            if (training && !s.locked()) {
                leak_to(s, lp, e.time_ms);
                if (auto dir = on_pre_spike(s, lp, e.time_ms, rng)) stage(*dir, e.channel, cyc);
            }
            ++in_idx;
            ++trace.inputs_delivered;
        }

        // 3. per-cycle probe / commit / teacher block
        if (in_cycle == probe_offset) {
            const bool lock_zone =
                net.neuron.has_probe &&
                np.v_thresh_mv - net.neuron.last_probe_v_mv <= lp.v_diff_mv;
            const double pv = probe_potential(net.neuron);
            trace.probes.push_back({cyc, t, pv});
            if (training) {
                const bool ffwd = net.neuron.fired_feedforward;
                std::sort(pendings.begin(), pendings.end(),
                          [](const PendingChange& a, const PendingChange& b) {
                              if (a.direction != b.direction)
                                  return a.direction < b.direction;
                              return a.synapse < b.synapse;
                          });
                for (const PendingChange& pc : pendings) {
                    SynapseState& s = net.synapses[pc.synapse];
                    if (s.locked()) continue;
                    commit_change(s, lp, pc.direction, lock_zone, ffwd);
                    trace.commits.push_back({cyc, t, pc.synapse, pc.direction, s.lock_class});
                }
                pendings.clear();
                if (teach_idx < sched.teachers.size() &&
                    sched.teachers[teach_idx].cycle == cyc) {
                    ++teach_idx;
                    if (force_fire(net.neuron, np, t)) {
                        trace.spikes.push_back({t, true});
                        post_due.push_back(t + lp.t_d_ms);
                        ++trace.teacher_fired;
                    } else {
                        trace.absorbed_teacher_ms.push_back(t);
                    }
                }
            }
        }

        // 4. integrate the membrane
        if (step(net.neuron, np, w_sum, t, dt)) {
            const double ts = t + dt;
            trace.spikes.push_back({ts, false});
            if (training) post_due.push_back(ts + lp.t_d_ms);
            // spikes up to and including the teacher phase pre-empt the teacher
            if (n + 1 - cyc * spc <= probe_offset) net.neuron.fired_feedforward = true;
        }
        if (sched.record_membrane) trace.membrane_mv.push_back(net.neuron.v_mv);
    }

    net.now_ms = static_cast<double>(n_end) * dt;
    return trace;
}

// --- weight snapshots ------------------------------------------------------

struct WeightSnapshot {
    struct Row {
        double weight;
        LockClass lock_class;
        double accum_plus;
        double accum_minus;

        friend bool operator==(const Row&, const Row&) = default;
    };
    std::uint32_t m = 0;
    std::vector<Row> rows;

    friend bool operator==(const WeightSnapshot&, const WeightSnapshot&) = default;
};

/// Serializable view of the synapse array. Accumulator values are reported
/// with the linear leak applied up to the network clock.
inline WeightSnapshot snapshot_weights(const Network& net) {
    WeightSnapshot snap;
    snap.m = net.m;
    snap.rows.reserve(net.synapses.size());
    for (const SynapseState& s : net.synapses) {
        SynapseState tmp = s;
        leak_to(tmp, net.learning, net.now_ms);
        snap.rows.push_back({tmp.weight, tmp.lock_class, tmp.accum_plus, tmp.accum_minus});
    }
    return snap;
}

/// Replace the synapse array from a snapshot. The neuron returns to rest,
/// waiting states, staged changes and in-flight post events clear, and the
/// clock rewinds to zero, ready for a fresh schedule; lock classes and
/// accumulator values carry over verbatim.
inline void restore_weights(Network& net, const WeightSnapshot& snap) {
    if (snap.m != net.m || snap.rows.size() != net.m)
        throw std::invalid_argument("snapshot geometry does not match network");
    net.synapses.assign(net.m, make_synapse(net.learning));
    for (std::uint32_t i = 0; i < net.m; ++i) {
        const auto& r = snap.rows[i];
        SynapseState& s = net.synapses[i];
        s.weight = r.weight;
        s.lock_class = r.lock_class;
        s.accum_plus = r.accum_plus;
        s.accum_minus = r.accum_minus;
    }
    net.neuron = make_neuron_state(net.neuron_params);
    net.pending_changes.clear();
    net.post_due_ms.clear();
    net.now_ms = 0.0;
}

inline void write_snapshot_csv(std::ostream& os, const WeightSnapshot& snap) {
    os << "synapse_id,weight,locked,lock_class,accum_plus,accum_minus\n";
    for (std::uint32_t i = 0; i < snap.rows.size(); ++i) {
        const auto& r = snap.rows[i];
        os << i << ',' << format_double(r.weight) << ','
           << (r.lock_class != LockClass::Unlocked ? 1 : 0) << ','
           << to_string(r.lock_class) << ',' << format_double(r.accum_plus) << ','
           << format_double(r.accum_minus) << '\n';
    }
}

inline WeightSnapshot read_snapshot_csv(std::istream& is) {
    WeightSnapshot snap;
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        if (!header_seen) {
            if (t != "synapse_id,weight,locked,lock_class,accum_plus,accum_minus")
                throw std::invalid_argument("snapshot: bad header line");
            header_seen = true;
            continue;
        }
        auto f = split(t, ',');
        if (f.size() != 6) throw std::invalid_argument("snapshot: bad row");
        if (parse_u64(f[0]) != snap.rows.size())
            throw std::invalid_argument("snapshot: synapse ids must be dense and ascending");
        WeightSnapshot::Row row{};
        row.weight = parse_double(f[1]);
        row.lock_class = lock_class_from_string(f[3]);
        bool locked_flag = parse_u64(f[2]) != 0;
        if (locked_flag != (row.lock_class != LockClass::Unlocked))
            throw std::invalid_argument("snapshot: locked flag contradicts lock class");
        row.accum_plus = parse_double(f[4]);
        row.accum_minus = parse_double(f[5]);
        snap.rows.push_back(row);
    }
    if (!header_seen) throw std::invalid_argument("snapshot: empty file");
    snap.m = static_cast<std::uint32_t>(snap.rows.size());
    return snap;
}

/// Membrane-trace dump: one `time_ms,v_mV` row per step, sampled at the end
/// of each integration step.
inline void write_membrane_csv(std::ostream& os, const RunTrace& trace, double dt_ms) {
    os << "time_ms,v_mV\n";
    for (std::size_t i = 0; i < trace.membrane_mv.size(); ++i)
        os << format_double(trace.membrane_t0_ms + (i + 1) * dt_ms) << ','
           << format_double(trace.membrane_mv[i]) << '\n';
}

/// Trace export: `event,time_ms,detail` rows for probes, commits, teacher
/// absorptions and output spikes, in time order.
inline void write_trace_csv(std::ostream& os, const RunTrace& trace) {
    struct Row {
        double t;
        int tag;  // tie-break within a step: probe, commit, teacher, spike
        std::string event;
        std::string detail;
    };
    std::vector<Row> rows;
    rows.reserve(trace.spikes.size() + trace.probes.size() + trace.commits.size() +
                 trace.absorbed_teacher_ms.size());
    for (const auto& p : trace.probes)
        rows.push_back({p.time_ms, 0, "probe",
                        "cycle=" + std::to_string(p.cycle) + ";v=" + format_double(p.v_mv)});
    for (const auto& c : trace.commits)
        rows.push_back({c.time_ms, 1, "commit",
                        "syn=" + std::to_string(c.synapse) + ';' +
                            std::string(to_string(c.direction)) + "->" +
                            std::string(to_string(c.outcome))});
    for (double t : trace.absorbed_teacher_ms)
        rows.push_back({t, 2, "teacher", "absorbed"});
    for (const auto& s : trace.spikes)
        rows.push_back({s.time_ms, 3, "spike", s.forced ? "forced" : "ffwd"});
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.t != b.t) return a.t < b.t;
        return a.tag < b.tag;
    });
    os << "event,time_ms,detail\n";
    for (const auto& r : rows)
        os << r.event << ',' << format_double(r.t) << ',' << r.detail << '\n';
}

}  // namespace cstdp

#endif  // CSTDP_ENGINE_HPP
