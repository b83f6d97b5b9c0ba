// Command-line front end: config ingestion, seed management, experiment
// dispatch, snapshot persistence and CSV emission.
//
// Subcommands:
//   info       print the information content of the configured codeword
//   calibrate  search the weight scale for the configured calib_fraction
//   train      teach one pattern/phase pair, write snapshot + pattern + trace
//   recall     load snapshot + pattern, emit recalled spike times
//   exp1       spike-time convergence and recruitment profile
//   exp2       capacity by recall tolerance, with full-scale extrapolation

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "cstdp/config.hpp"
#include "cstdp/experiments.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    bool seed_set = false;
    bool out_dir_set = false;
    int threads = 1;
    std::vector<std::string> overrides;
};

cstdp::RunConfig load_config(const GlobalArgs& g) {
    cstdp::RunConfig cfg;
    if (!g.config_path.empty()) cfg = cstdp::RunConfig::from_file(g.config_path);
    for (const auto& kv : g.overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        cfg.set_key(cstdp::trim(std::string_view(kv).substr(0, eq)),
                    cstdp::trim(std::string_view(kv).substr(eq + 1)));
    }
    if (g.seed_set) cfg.seed = g.seed;
    if (g.out_dir_set) cfg.out_dir = g.out_dir;
    cfg.validate();
    return cfg;
}

std::ofstream open_output(const cstdp::RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    auto path = std::filesystem::path(cfg.out_dir) / name;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open output file " + path.string());
    cstdp::write_file_header(f, cfg.config_hash(), cfg.seed);
    return f;
}

int cmd_info(const cstdp::RunConfig& cfg) {
    double total = cstdp::info_content_bits(cfg.m, cfg.n, cfg.t_cyc, cfg.t_bin);
    double temporal = cfg.n * std::log2(cfg.t_cyc / cfg.t_bin);
    std::cout << "codeword " << cfg.n << "-of-" << cfg.m << ", T_cyc=" << cfg.t_cyc
              << " ms, T_bin=" << cfg.t_bin << " ms\n"
              << "information content: " << cstdp::format_double(total) << " bits ("
              << cstdp::format_double(total - temporal) << " spatial + "
              << cstdp::format_double(temporal) << " temporal)\n";
    return 0;
}

int cmd_calibrate(const cstdp::RunConfig& cfg) {
    double scale = cstdp::calibrate_weight_scale(cfg);
    std::cout << "calibrated weight_scale=" << cstdp::format_double(scale)
              << " (untrained probe target " << cstdp::format_double(cfg.calib_fraction)
              << " * V_thresh)\n"
              << "add to config: weight_scale=" << cstdp::format_double(scale) << "\n";
    return 0;
}

int cmd_train(const cstdp::RunConfig& cfg, double t_fire, int repeats) {
    auto prng = cstdp::RngStream::derive(cfg.seed, "train/pattern");
    auto pattern = cstdp::generate_pattern(cfg.m, cfg.n, cfg.t_cyc, cfg.t_bin, prng);
    auto noise_rng = cstdp::RngStream::derive(cfg.seed, "train/noise");

    cstdp::Network net = cfg.network(cstdp::RunMode::Training);
    cstdp::Schedule sched;
    sched.t_begin_ms = 0.0;
    sched.t_end_ms = repeats * cfg.t_cyc;
    sched.probe_phase_ms = t_fire;
    sched.inputs = cstdp::apply_noise(cstdp::render_cycles(pattern, repeats),
                                      cfg.noise_spec(), sched.t_end_ms, cfg.m, noise_rng);
    for (int k = 0; k < repeats; ++k) sched.teachers.push_back({k, t_fire});

    auto life = cstdp::RngStream::derive(cfg.seed, "train/life");
    cstdp::RunTrace trace = cstdp::run(net, sched, life);

    {
        auto f = open_output(cfg, "pattern.txt");
        cstdp::save_pattern(f, pattern);
    }
    {
        auto f = open_output(cfg, "snapshot.csv");
        cstdp::write_snapshot_csv(f, cstdp::snapshot_weights(net));
    }
    {
        auto f = open_output(cfg, "trace.csv");
        cstdp::write_trace_csv(f, trace);
    }
    {
        auto f = open_output(cfg, "raster.csv");
        cstdp::write_raster_csv(f, sched.inputs);
    }
    auto counts = cstdp::class_counts(cstdp::snapshot_weights(net));
    std::cout << "trained 1 pattern, " << repeats << " repeats, t_fire=" << t_fire
              << " ms\nrecruitment:";
    for (int c = 0; c < cstdp::lock_class_count; ++c)
        std::cout << ' ' << cstdp::to_string(static_cast<cstdp::LockClass>(c)) << '='
                  << counts[c];
    std::cout << "\nwrote pattern.txt snapshot.csv trace.csv raster.csv to " << cfg.out_dir
              << "\n";
    return 0;
}

int cmd_recall(const cstdp::RunConfig& cfg, const std::string& snapshot_path,
               const std::string& pattern_path, double t_fire, int cycles,
               bool membrane) {
    std::ifstream sf(snapshot_path);
    if (!sf) throw std::runtime_error("cannot open snapshot " + snapshot_path);
    auto snap = cstdp::read_snapshot_csv(sf);
    std::ifstream pf(pattern_path);
    if (!pf) throw std::runtime_error("cannot open pattern " + pattern_path);
    auto pattern = cstdp::load_pattern(pf);
    if (snap.m != cfg.m)
        throw std::invalid_argument("snapshot geometry (M=" + std::to_string(snap.m) +
                                    ") does not match configured M=" + std::to_string(cfg.m));
    if (pattern.m != cfg.m)
        throw std::invalid_argument("pattern geometry does not match configured M");

    cstdp::Network net = cfg.network(cstdp::RunMode::Recall);
    cstdp::restore_weights(net, snap);
    cstdp::Schedule sched;
    sched.t_begin_ms = 0.0;
    sched.t_end_ms = cycles * cfg.t_cyc;
    sched.probe_phase_ms = t_fire;
    sched.inputs = cstdp::render_cycles(pattern, cycles);
    sched.record_membrane = membrane;
    cstdp::RngStream unused(0);
    cstdp::RunTrace trace = cstdp::run(net, sched, unused);

    {
        auto f = open_output(cfg, "recall_trace.csv");
        cstdp::write_trace_csv(f, trace);
    }
    if (membrane) {
        auto f = open_output(cfg, "membrane.csv");
        cstdp::write_membrane_csv(f, trace, cfg.timestep);
    }
    std::cout << "recalled spikes (" << trace.spikes.size() << "):\n";
    for (const auto& s : trace.spikes)
        std::cout << "  t=" << cstdp::format_double(s.time_ms)
                  << " ms (phase " << cstdp::format_double(std::fmod(s.time_ms, cfg.t_cyc))
                  << " ms)\n";
    std::cout << "wrote recall_trace.csv to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_exp1(const cstdp::RunConfig& cfg, const cstdp::Exp1Config& e1, int threads) {
    auto result = cstdp::run_experiment1(cfg, e1, threads);
    {
        auto f = open_output(cfg, "exp1_convergence.csv");
        cstdp::write_exp1_convergence_csv(f, result);
    }
    {
        auto f = open_output(cfg, "exp1_recruitment.csv");
        cstdp::write_exp1_recruitment_csv(f, result);
    }
    {
        // raster of the first trial's input, for plotting
        auto prng = cstdp::RngStream::derive(cfg.seed, "exp1/pattern", 0);
        auto pattern = cstdp::generate_pattern(cfg.m, cfg.n, cfg.t_cyc, cfg.t_bin, prng);
        auto noise_rng = cstdp::RngStream::derive(cfg.seed, "exp1/noise", 0);
        auto events = cstdp::apply_noise(cstdp::render_cycles(pattern, 3), cfg.noise_spec(),
                                         3 * cfg.t_cyc, cfg.m, noise_rng);
        auto f = open_output(cfg, "raster.csv");
        cstdp::write_raster_csv(f, events);
    }
    int prefix = result.silent_prefix();
    std::cout << "exp1: " << e1.n_trials << " trials, " << e1.n_repeats
              << " repeats, target " << e1.target_phase_ms << " ms\n"
              << "silent prefix: " << prefix << " iterations\n";
    for (int i : {prefix, e1.n_repeats / 2 - 1, e1.n_repeats - 1})
        if (i >= 0 && i < e1.n_repeats)
            std::cout << "iteration " << (i + 1) << ": mean phase "
                      << cstdp::format_double(result.mean_recalled_phase(i))
                      << " ms, miss fraction "
                      << cstdp::format_double(result.miss_fraction(i)) << "\n";
    std::cout << "wrote exp1_convergence.csv exp1_recruitment.csv raster.csv to "
              << cfg.out_dir << "\n";
    return 0;
}

int cmd_exp2(const cstdp::RunConfig& cfg, const cstdp::Exp2Config& e2, int threads) {
    auto result = cstdp::run_experiment2(cfg, e2, threads);
    {
        auto f = open_output(cfg, "exp2_capacity.csv");
        cstdp::write_exp2_capacity_csv(f, result);
    }
    std::cout << "exp2: set sizes";
    for (int s : e2.set_sizes) std::cout << ' ' << s;
    std::cout << ", " << e2.recall_presentations << " presentations each\n";
    for (const auto& c : result.cells)
        if (c.tolerance_ms == 3.0)
            std::cout << "  " << c.set_size << " patterns @ +/-3.0 ms: " << c.hits << "/"
                      << c.total << "\n";
    int largest = *std::max_element(e2.set_sizes.begin(), e2.set_sizes.end());
    long long exact = cstdp::extrapolate_capacity(largest, cfg.m, cfg.n);
    long long rounded = static_cast<long long>(largest) * (cfg.m / cfg.n);
    std::cout << "full-scale extrapolation for " << largest << " patterns: " << exact
              << " associations (M/N exact), " << rounded
              << " (floor(M/N) multiplier convention)\n"
              << "wrote exp2_capacity.csv to " << cfg.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cyclic-STDP spiking associative memory simulator"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalArgs g;
    app.add_option("--config", g.config_path, "key=value config file");
    auto* seed_opt = app.add_option("--seed", g.seed, "master seed");
    auto* out_opt = app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--threads", g.threads, "worker threads for experiments")
        ->check(CLI::PositiveNumber);
    app.add_option("--set", g.overrides, "override a config key (key=value), repeatable");

    auto* info = app.add_subcommand("info", "codeword information content");
    auto* calibrate = app.add_subcommand("calibrate", "search the weight scale");
    auto* train = app.add_subcommand("train", "train one pattern, write a snapshot");
    double t_fire = 18.0;
    int repeats = 30;
    train->add_option("--t-fire", t_fire, "taught output phase (ms)");
    train->add_option("--repeats", repeats, "training presentations");
    auto* recall = app.add_subcommand("recall", "recall from a snapshot");
    std::string snapshot_path, pattern_path;
    double recall_t_fire = 18.0;
    int recall_cycles = 4;
    bool recall_membrane = false;
    recall->add_option("--snapshot", snapshot_path, "snapshot csv")->required();
    recall->add_option("--pattern", pattern_path, "pattern file")->required();
    recall->add_option("--t-fire", recall_t_fire, "probe phase (ms)");
    recall->add_option("--cycles", recall_cycles, "recall presentations");
    recall->add_flag("--membrane", recall_membrane, "also dump the membrane trace");
    auto* exp1 = app.add_subcommand("exp1", "convergence + recruitment experiment");
    cstdp::Exp1Config e1;
    exp1->add_option("--trials", e1.n_trials, "independent trials");
    exp1->add_option("--repeats", e1.n_repeats, "training presentations per trial");
    exp1->add_option("--t-fire", e1.target_phase_ms, "taught output phase (ms)");
    auto* exp2 = app.add_subcommand("exp2", "capacity by tolerance experiment");
    cstdp::Exp2Config e2;
    exp2->add_option("--sizes", e2.set_sizes, "pattern set sizes");
    exp2->add_option("--repeats", e2.n_repeats, "training presentations per pattern");
    exp2->add_option("--presentations", e2.recall_presentations, "scored recall cycles");
    exp2->add_option("--tolerances", e2.tolerances_ms, "tolerance grid (ms)");

    CLI11_PARSE(app, argc, argv);
    g.seed_set = seed_opt->count() > 0;
    g.out_dir_set = out_opt->count() > 0;

    try {
        cstdp::RunConfig cfg = load_config(g);
        if (info->parsed()) return cmd_info(cfg);
        if (calibrate->parsed()) return cmd_calibrate(cfg);
        if (train->parsed()) return cmd_train(cfg, t_fire, repeats);
        if (recall->parsed())
            return cmd_recall(cfg, snapshot_path, pattern_path, recall_t_fire,
                              recall_cycles, recall_membrane);
        if (exp1->parsed()) return cmd_exp1(cfg, e1, g.threads);
        if (exp2->parsed()) return cmd_exp2(cfg, e2, g.threads);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
