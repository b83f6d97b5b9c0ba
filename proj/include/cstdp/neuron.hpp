// Conductance-based leaky-integrate-and-fire neuron.
//
// Synaptic drive uses a difference-of-exponentials conductance kernel
// g(t) ~ exp(-t/tau_fall) - exp(-t/tau_rise), normalized so that an arrival
// of weight w contributes peak conductance w. The two kernel state variables
// are advanced with exact exponential factors; the membrane equation
//
//   dv/dt = -(v - V_0)/tau_m + g * (E_rev - v) / C_m
//
// is integrated with forward Euler, which is first-order accurate (the
// convergence rate is checked by the test suite). During the absolute
// refractory period the potential is held at V_reset while the conductance
// states keep evolving, so residual drive produces the post-spike bounce.

#ifndef CSTDP_NEURON_HPP
#define CSTDP_NEURON_HPP

#include <cmath>
#include <stdexcept>

namespace cstdp {

struct NeuronParams {
    double tau_m_ms = 15.0;
    double c_m_nf = 30.0;
    double tau_ref_ms = 5.0;
    double v_thresh_mv = 60.0;
    double v_rest_mv = 0.0;   // V_0
    double v_reset_mv = 0.0;
    double e_rev_mv = 240.0;
    double tau_rise_ms = 0.2;
    double tau_fall_ms = 3.0;

    void validate() const {
        if (!(tau_m_ms > 0 && c_m_nf > 0 && tau_ref_ms > 0 && tau_rise_ms > 0 &&
              tau_fall_ms > 0))
            throw std::invalid_argument("neuron params: time constants and C_m must be positive");
        if (!(tau_rise_ms < tau_fall_ms))
            throw std::invalid_argument("neuron params: tau_rise must be below tau_fall");
        if (!(v_reset_mv <= v_rest_mv && v_rest_mv < v_thresh_mv && v_thresh_mv < e_rev_mv))
            throw std::invalid_argument(
                "neuron params: require V_reset <= V_0 < V_thresh < E_rev");
    }

    /// Gain applied to arrival weights so the kernel peak equals the weight.
    double kernel_gain() const {
        double tp = std::log(tau_fall_ms / tau_rise_ms) * tau_rise_ms * tau_fall_ms /
                    (tau_fall_ms - tau_rise_ms);
        double peak = std::exp(-tp / tau_fall_ms) - std::exp(-tp / tau_rise_ms);
        return 1.0 / peak;
    }
};

struct NeuronState {
    double v_mv = 0.0;
    double refractory_until_ms = 0.0;
    double g_rise = 0.0;
    double g_fall = 0.0;
    double last_probe_v_mv = 0.0;  // potential sampled at the previous probe phase
    bool has_probe = false;
    bool fired_feedforward = false;  // somatic spike before the teacher phase this cycle

    friend bool operator==(const NeuronState&, const NeuronState&) = default;
};

inline NeuronState make_neuron_state(const NeuronParams& p) {
    NeuronState s;
    s.v_mv = p.v_rest_mv;
    s.last_probe_v_mv = p.v_rest_mv;
    return s;
}

/// Advance one timestep [now, now+dt). `arrival_weight_sum` is the summed
/// peak-conductance weight of spikes delivered this step. Returns true when
/// a spike is emitted; the spike time is now + dt.
inline bool step(NeuronState& s, const NeuronParams& p, double arrival_weight_sum,
                 double now_ms, double dt_ms) {
    if (arrival_weight_sum != 0.0) {
        double a = arrival_weight_sum * p.kernel_gain();
        s.g_rise += a;
        s.g_fall += a;
    }
    const bool refractory = now_ms < s.refractory_until_ms;
    if (refractory) {
        s.v_mv = p.v_reset_mv;
    } else {
        double g = s.g_fall - s.g_rise;
        s.v_mv += dt_ms * (-(s.v_mv - p.v_rest_mv) / p.tau_m_ms +
                           g * (p.e_rev_mv - s.v_mv) / p.c_m_nf);
    }
    s.g_rise *= std::exp(-dt_ms / p.tau_rise_ms);
    s.g_fall *= std::exp(-dt_ms / p.tau_fall_ms);

    if (!refractory && s.v_mv >= p.v_thresh_mv) {
        s.v_mv = p.v_reset_mv;
        s.refractory_until_ms = now_ms + dt_ms + p.tau_ref_ms;
        return true;
    }
    return false;
}

/// Teacher-forced spike at `now`. Absorbed (returns false, state untouched)
/// while the neuron is refractory, which prevents a double spike when the
/// neuron already fired from feedforward input.
inline bool force_fire(NeuronState& s, const NeuronParams& p, double now_ms) {
    if (now_ms < s.refractory_until_ms) return false;
    s.v_mv = p.v_reset_mv;
    s.refractory_until_ms = now_ms + p.tau_ref_ms;
    return true;
}

/// Sample the membrane potential at the per-cycle probe phase. Records the
/// value for the next cycle's lock-zone test and returns it.
inline double probe_potential(NeuronState& s) {
    s.last_probe_v_mv = s.v_mv;
    s.has_probe = true;
    return s.v_mv;
}

}  // namespace cstdp

#endif  // CSTDP_NEURON_HPP
