// Run configuration: flat key=value files plus programmatic overrides.
//
// Keys mirror the network parameter names so a config file can be audited
// line by line. Unknown keys are rejected; range violations report the
// invariant they break. The weight_scale default was produced by the
// `calibrate` subcommand at default geometry (see README).

#ifndef CSTDP_CONFIG_HPP
#define CSTDP_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cstdp/codec.hpp"
#include "cstdp/engine.hpp"
#include "cstdp/io.hpp"
#include "cstdp/neuron.hpp"
#include "cstdp/plasticity.hpp"

namespace cstdp {

struct RunConfig {
    double timestep = 0.1;  // ms
    std::uint32_t m = 3200;
    std::uint32_t n = 75;
    double t_cyc = 35.0;  // ms
    double t_bin = 0.1;   // ms

    double tau_m = 15.0;
    double c_m = 30.0;
    double tau_ref = 5.0;
    double v_thresh = 60.0;
    double v_0 = 0.0;
    double v_reset = 0.0;
    double e_rev = 240.0;
    double tau_rise = 0.2;
    double tau_fall = 3.0;
    double t_d = 1.0;

    double dec_acc = 1.0;
    double tau_pot = 9.6;
    double tau_dep = 11.0;
    double t_pot = 5.0;
    double t_dep = 5.0;  // magnitude
    double v_diff = 1.0;
    double w_max = 0.14;
    double w_init = 0.07;
    double w_min = 0.0;
    double a_minus = 0.5;
    double a_plus = 0.99;

    double weight_scale = 0.98251158492684842;  // `calibrate` output at defaults
    double calib_fraction = 0.87;  // calibration target as a fraction of V_thresh
    double noise_rate_hz = 0.0;    // background Poisson rate per channel
    double jitter_sigma_ms = 0.0;  // Gaussian jitter on signal spikes

    std::uint64_t seed = 1;
    std::string out_dir = ".";

    NeuronParams neuron_params() const {
        NeuronParams p;
        p.tau_m_ms = tau_m;
        p.c_m_nf = c_m;
        p.tau_ref_ms = tau_ref;
        p.v_thresh_mv = v_thresh;
        p.v_rest_mv = v_0;
        p.v_reset_mv = v_reset;
        p.e_rev_mv = e_rev;
        p.tau_rise_ms = tau_rise;
        p.tau_fall_ms = tau_fall;
        return p;
    }

    LearningParams learning_params() const {
        LearningParams p;
        p.tau_pot_ms = tau_pot;
        p.tau_dep_ms = tau_dep;
        p.t_pot = t_pot;
        p.t_dep = t_dep;
        p.dec_acc_per_s = dec_acc;
        p.a_plus = a_plus;
        p.a_minus = a_minus;
        p.w_init = w_init;
        p.w_max = w_max;
        p.w_min = w_min;
        p.v_diff_mv = v_diff;
        p.t_d_ms = t_d;
        return p;
    }

    NoiseSpec noise_spec() const { return {noise_rate_hz, jitter_sigma_ms}; }

    Network network(RunMode mode) const {
        return make_network(m, timestep, t_cyc, neuron_params(), learning_params(),
                            weight_scale, mode);
    }

    void validate() const {
        if (n > m) throw std::invalid_argument("config: N exceeds M");
        if (timestep <= 0) throw std::invalid_argument("config: timestep must be positive");
        detail::bins_for(t_cyc, t_bin);
        if (weight_scale <= 0)
            throw std::invalid_argument("config: weight_scale must be positive");
        if (!(calib_fraction > 0 && calib_fraction < 1))
            throw std::invalid_argument("config: calib_fraction must lie in (0, 1)");
        if (noise_rate_hz < 0 || jitter_sigma_ms < 0)
            throw std::invalid_argument("config: noise parameters must be non-negative");
        neuron_params().validate();
        learning_params().validate();
    }

    void set_key(std::string_view key, std::string_view value);
    std::string canonical_text() const;
    std::uint64_t config_hash() const {
        return detail::fnv1a64(canonical_text());
    }

    static RunConfig from_stream(std::istream& is);
    static RunConfig from_file(const std::string& path);
};

inline void RunConfig::set_key(std::string_view key, std::string_view value) {
    auto d = [&](double& field) { field = parse_double(value); };
    if (key == "timestep") d(timestep);
    else if (key == "M") m = static_cast<std::uint32_t>(parse_u64(value));
    else if (key == "N") n = static_cast<std::uint32_t>(parse_u64(value));
    else if (key == "T_cyc") d(t_cyc);
    else if (key == "T_bin") d(t_bin);
    else if (key == "tau_m") d(tau_m);
    else if (key == "C_m") d(c_m);
    else if (key == "tau_ref") d(tau_ref);
    else if (key == "V_thresh") d(v_thresh);
    else if (key == "V_0") d(v_0);
    else if (key == "V_reset") d(v_reset);
    else if (key == "E_rev") d(e_rev);
    else if (key == "tau_rise") d(tau_rise);
    else if (key == "tau_fall") d(tau_fall);
    else if (key == "T_D") d(t_d);
    else if (key == "Dec_acc") d(dec_acc);
    else if (key == "tau_pot") d(tau_pot);
    else if (key == "tau_dep") d(tau_dep);
    else if (key == "T_pot") t_pot = std::abs(parse_double(value));
    else if (key == "T_dep") t_dep = std::abs(parse_double(value));
    else if (key == "V_diff") d(v_diff);
    else if (key == "W_max") d(w_max);
    else if (key == "W_init") d(w_init);
    else if (key == "W_min") d(w_min);
    else if (key == "A_minus") d(a_minus);
    else if (key == "A_plus") d(a_plus);
    else if (key == "weight_scale") d(weight_scale);
    else if (key == "calib_fraction") d(calib_fraction);
    else if (key == "noise_rate_hz") d(noise_rate_hz);
    else if (key == "jitter_sigma_ms") d(jitter_sigma_ms);
    else
        throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
}

inline std::string RunConfig::canonical_text() const {
    std::ostringstream os;
    os << "timestep=" << format_double(timestep) << "\nM=" << m << "\nN=" << n
       << "\nT_cyc=" << format_double(t_cyc) << "\nT_bin=" << format_double(t_bin)
       << "\ntau_m=" << format_double(tau_m) << "\nC_m=" << format_double(c_m)
       << "\ntau_ref=" << format_double(tau_ref)
       << "\nV_thresh=" << format_double(v_thresh) << "\nV_0=" << format_double(v_0)
       << "\nV_reset=" << format_double(v_reset) << "\nE_rev=" << format_double(e_rev)
       << "\ntau_rise=" << format_double(tau_rise)
       << "\ntau_fall=" << format_double(tau_fall) << "\nT_D=" << format_double(t_d)
       << "\nDec_acc=" << format_double(dec_acc) << "\ntau_pot=" << format_double(tau_pot)
       << "\ntau_dep=" << format_double(tau_dep) << "\nT_pot=" << format_double(t_pot)
       << "\nT_dep=" << format_double(t_dep) << "\nV_diff=" << format_double(v_diff)
       << "\nW_max=" << format_double(w_max) << "\nW_init=" << format_double(w_init)
       << "\nW_min=" << format_double(w_min) << "\nA_minus=" << format_double(a_minus)
       << "\nA_plus=" << format_double(a_plus)
       << "\nweight_scale=" << format_double(weight_scale)
       << "\ncalib_fraction=" << format_double(calib_fraction)
       << "\nnoise_rate_hz=" << format_double(noise_rate_hz)
       << "\njitter_sigma_ms=" << format_double(jitter_sigma_ms) << '\n';
    return os.str();
}

inline RunConfig RunConfig::from_stream(std::istream& is) {
    RunConfig cfg;
    std::string line;
    while (std::getline(is, line)) {
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument("config: expected key=value, got '" +
                                        std::string(t) + "'");
        cfg.set_key(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

inline RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open '" + path + "'");
    return from_stream(f);
}

}  // namespace cstdp

#endif  // CSTDP_CONFIG_HPP
