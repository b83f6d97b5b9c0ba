// Cyclic-STDP synapse state machine.
//
// Each synapse runs two independent single-bit pair detectors. A pre spike
// arms "pre-waiting-post" for a stochastic lifetime (exponential, mean
// tau_pot); if a post spike lands while it is armed, that counts one unit of
// causal evidence in accum_plus. The mirrored "post-waiting-pre" machine
// gathers anti-causal evidence in accum_minus with mean lifetime tau_dep.
// Accumulators leak linearly at dec_acc per second and trigger a weight
// change at the pair that lifts them to their threshold: potentiation on a
// post spike, depression on a pre spike (checking only at posts would let
// the leak pull a full accumulator back under threshold before it could
// ever fire). Every committed change sets the lock bit, after which the
// synapse is frozen: weight fixed, detectors and accumulators inert. A
// single weight modification per synapse lifetime is therefore structural.

#ifndef CSTDP_PLASTICITY_HPP
#define CSTDP_PLASTICITY_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string_view>

#include "cstdp/rng.hpp"

namespace cstdp {

struct LearningParams {
    double tau_pot_ms = 9.6;   // pre-waiting-post lifetime mean
    double tau_dep_ms = 11.0;  // post-waiting-pre lifetime mean
    double t_pot = 5.0;        // potentiation trigger threshold
    double t_dep = 5.0;        // depression trigger threshold (magnitude)
    double dec_acc_per_s = 1.0;
    double a_plus = 0.99;
    double a_minus = 0.5;
    double w_init = 0.07;
    double w_max = 0.14;
    double w_min = 0.0;
    double v_diff_mv = 1.0;  // lock-zone band below threshold
    double t_d_ms = 1.0;     // somatic spike back-propagation delay

    void validate() const {
        if (!(tau_pot_ms > 0 && tau_dep_ms > 0))
            throw std::invalid_argument("learning params: lifetimes must be positive");
        if (!(t_pot >= 1 && t_dep >= 1))
            throw std::invalid_argument("learning params: trigger thresholds must be >= 1");
        if (!(w_min <= w_init && w_init <= w_max))
            throw std::invalid_argument("learning params: require W_min <= W_init <= W_max");
        if (!(a_minus > 0 && a_minus < 1))
            throw std::invalid_argument("learning params: A_minus must lie in (0, 1)");
        if (!(dec_acc_per_s >= 0))
            throw std::invalid_argument("learning params: Dec_acc must be non-negative");
        if (!(v_diff_mv >= 0 && t_d_ms >= 0))
            throw std::invalid_argument("learning params: V_diff and T_D must be non-negative");
    }
};

enum class LockClass : std::uint8_t {
    Unlocked = 0,
    Potentiated,  // weight raised, locked
    Depressed,    // weight lowered, locked
    LockedDep,    // scheduled for depression inside the lock zone; baseline kept
    LockedPot,    // scheduled for potentiation inside the lock zone; baseline kept
    LockedFfwd,   // neuron already fired feedforward; baseline kept
};

inline constexpr int lock_class_count = 6;

inline std::string_view to_string(LockClass c) {
    switch (c) {
        case LockClass::Unlocked: return "unlocked";
        case LockClass::Potentiated: return "potentiated";
        case LockClass::Depressed: return "depressed";
        case LockClass::LockedDep: return "locked_dep";
        case LockClass::LockedPot: return "locked_pot";
        case LockClass::LockedFfwd: return "locked_ffwd";
    }
    return "?";
}

inline LockClass lock_class_from_string(std::string_view s) {
    for (int i = 0; i < lock_class_count; ++i) {
        auto c = static_cast<LockClass>(i);
        if (s == to_string(c)) return c;
    }
    throw std::invalid_argument("unknown lock class: '" + std::string(s) + "'");
}

enum class ChangeDirection : std::uint8_t { Potentiate = 0, Depress = 1 };

inline std::string_view to_string(ChangeDirection d) {
    return d == ChangeDirection::Potentiate ? "potentiate" : "depress";
}

/// Inactive waiting-state sentinel; any spike time compares later.
inline constexpr double waiting_inactive = -std::numeric_limits<double>::infinity();

struct SynapseState {
    double weight = 0.07;
    LockClass lock_class = LockClass::Unlocked;
    double pre_waiting_until_ms = waiting_inactive;
    double post_waiting_until_ms = waiting_inactive;
    double accum_plus = 0.0;
    double accum_minus = 0.0;
    double last_leak_ms = 0.0;  // bookkeeping for the lazy linear leak

    bool locked() const { return lock_class != LockClass::Unlocked; }

    friend bool operator==(const SynapseState&, const SynapseState&) = default;
};

inline SynapseState make_synapse(const LearningParams& p) {
    SynapseState s;
    s.weight = p.w_init;
    return s;
}

/// Staged weight change awaiting the per-cycle commit decision.
struct PendingChange {
    ChangeDirection direction;
    std::uint32_t synapse;
    long long cycle;
};

/// Linear accumulator leak over `elapsed_s` seconds, clamped at zero.
/// Locked synapses are frozen entirely.
inline void decay_accumulators(SynapseState& s, const LearningParams& p, double elapsed_s) {
    if (s.locked() || elapsed_s <= 0.0) return;
    double d = p.dec_acc_per_s * elapsed_s;
    s.accum_plus = std::max(0.0, s.accum_plus - d);
    s.accum_minus = std::max(0.0, s.accum_minus - d);
}

/// Bring the lazy leak up to `now`. Call before handling a spike event.
inline void leak_to(SynapseState& s, const LearningParams& p, double now_ms) {
    if (!s.locked() && now_ms > s.last_leak_ms)
        decay_accumulators(s, p, (now_ms - s.last_leak_ms) / 1000.0);
    s.last_leak_ms = now_ms;
}

/// Pre-synaptic spike at `now`. Completes an anti-causal pair if the
/// post-waiting state is still armed (reporting Depress when that lifts
/// accum_minus to threshold), then (re)arms pre-waiting-post with a freshly
/// sampled lifetime.
template <LifetimeRng Rng>
inline std::optional<ChangeDirection> on_pre_spike(SynapseState& s,
                                                   const LearningParams& p,
                                                   double now_ms, Rng& rng) {
    std::optional<ChangeDirection> triggered;
    if (s.locked()) return triggered;
    if (now_ms <= s.post_waiting_until_ms) {
        s.accum_minus += 1.0;
        s.post_waiting_until_ms = waiting_inactive;
        if (s.accum_minus >= p.t_dep) {
            s.accum_minus = 0.0;
            triggered = ChangeDirection::Depress;
        }
    }
    s.pre_waiting_until_ms = now_ms + rng.exponential(p.tau_pot_ms);
    return triggered;
}

/// Post-synaptic spike observed at the synapse at `now` (somatic time plus
/// T_D, applied by the caller). Completes a causal pair if pre-waiting is
/// armed (reporting Potentiate when that lifts accum_plus to threshold),
/// then re-arms post-waiting-pre.
template <LifetimeRng Rng>
inline std::optional<ChangeDirection> on_post_spike(SynapseState& s,
                                                    const LearningParams& p,
                                                    double now_ms, Rng& rng) {
    std::optional<ChangeDirection> triggered;
    if (s.locked()) return triggered;
    if (now_ms <= s.pre_waiting_until_ms) {
        s.accum_plus += 1.0;
        s.pre_waiting_until_ms = waiting_inactive;
        if (s.accum_plus >= p.t_pot) {
            s.accum_plus = 0.0;
            triggered = ChangeDirection::Potentiate;
        }
    }
    s.post_waiting_until_ms = now_ms + rng.exponential(p.tau_dep_ms);
    return triggered;
}

/// Apply a triggered change at the per-cycle commit point. Every path sets
/// the lock bit; the weight only moves when the neuron was neither inside
/// the lock zone on the previous cycle nor already firing feedforward.
inline void commit_change(SynapseState& s, const LearningParams& p, ChangeDirection dir,
                          bool lock_zone_active, bool fired_feedforward) {
    if (s.locked()) return;
    if (fired_feedforward) {
        s.lock_class = LockClass::LockedFfwd;
        return;
    }
    if (lock_zone_active) {
        s.lock_class = dir == ChangeDirection::Potentiate ? LockClass::LockedPot
                                                          : LockClass::LockedDep;
        return;
    }
    if (dir == ChangeDirection::Potentiate) {
        s.weight = std::min(p.w_max, p.w_init * (1.0 + p.a_plus));
        s.lock_class = LockClass::Potentiated;
    } else {
        s.weight = std::max(p.w_min, p.w_init * p.a_minus);
        s.lock_class = LockClass::Depressed;
    }
}

}  // namespace cstdp

#endif  // CSTDP_PLASTICITY_HPP
