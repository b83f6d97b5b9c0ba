#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "cstdp/experiments.hpp"

using namespace cstdp;

TEST_CASE("full-scale extrapolation follows the sparsity ratio") {
    REQUIRE(extrapolate_capacity(30, 3200, 75) == 1280);
    REQUIRE(extrapolate_capacity(0, 3200, 75) == 0);
    REQUIRE(extrapolate_capacity(17, 512, 512) == 17);
    REQUIRE_THROWS_AS(extrapolate_capacity(1, 100, 0), std::invalid_argument);
}

TEST_CASE("recall scoring uses circular distance per presentation window") {
    RunTrace tr;
    tr.spikes = {{18.4, false}, {35.0 + 34.5, false}};
    std::vector<double> taught{18.0, 0.5, 9.0};
    auto m = compute_metrics(tr, taught, 35.0, {0.5, 1.0, 2.0});

    REQUIRE(m.recalled_phase_ms[0].value() == Catch::Approx(18.4));
    REQUIRE(m.abs_error_ms[0].value() == Catch::Approx(0.4));
    // wraparound: recalled 34.5 vs taught 0.5 is 1.0 ms away
    REQUIRE(m.abs_error_ms[1].value() == Catch::Approx(1.0));
    // no spike in the third window misses at every tolerance
    REQUIRE_FALSE(m.recalled_phase_ms[2].has_value());
    REQUIRE(m.hits_per_tolerance == std::vector<int>{1, 2, 2});
}

TEST_CASE("nearest spike wins within a window") {
    std::vector<OutputSpike> spikes{{3.0, false}, {17.0, false}, {19.5, false}};
    auto phase = recalled_phase_in_cycle(spikes, 0, 35.0, 18.0);
    REQUIRE(phase.value() == Catch::Approx(17.0));
    REQUIRE_FALSE(recalled_phase_in_cycle(spikes, 1, 35.0, 18.0).has_value());
}

TEST_CASE("a single trial converges to the taught phase") {
    RunConfig cfg;
    Exp1Config e1;
    e1.n_trials = 1;
    Exp1Trial trial = run_exp1_trial(cfg, e1, 0);

    auto first = trial.first_recall_iteration();
    REQUIRE(first.has_value());
    REQUIRE(*first >= 3);  // several silent iterations while evidence accumulates
    // the first recalled spike lags the taught phase
    double first_phase = trial.recalled_phase_ms[*first].value();
    REQUIRE(first_phase > e1.target_phase_ms);
    // by the last iteration the recalled spike sits close to the target
    auto last = trial.recalled_phase_ms.back();
    REQUIRE(last.has_value());
    REQUIRE(circular_distance(*last, e1.target_phase_ms, cfg.t_cyc) < 2.5);

    // recruitment is monotone: locked classes only ever grow
    for (std::size_t i = 1; i < trial.class_histogram.size(); ++i) {
        for (int c = 1; c < lock_class_count; ++c)
            REQUIRE(trial.class_histogram[i][c] >= trial.class_histogram[i - 1][c]);
        int total = 0;
        for (int c = 0; c < lock_class_count; ++c) total += trial.class_histogram[i][c];
        REQUIRE(total == static_cast<int>(cfg.m));
    }

    // without background noise only the N signal-carrying synapses can recruit
    const auto& final_hist = trial.class_histogram.back();
    int recruited = 0;
    for (int c = 1; c < lock_class_count; ++c) recruited += final_hist[c];
    REQUIRE(recruited <= static_cast<int>(cfg.n));
    REQUIRE(recruited > 0);
}

TEST_CASE("experiment 1 aggregates and serializes deterministically") {
    RunConfig cfg;
    Exp1Config e1;
    e1.n_trials = 3;
    e1.n_repeats = 12;

    auto r1 = run_experiment1(cfg, e1, 1);
    auto r2 = run_experiment1(cfg, e1, 2);  // threads must not change results

    std::ostringstream c1, c2, k1, k2;
    write_exp1_convergence_csv(c1, r1);
    write_exp1_convergence_csv(c2, r2);
    write_exp1_recruitment_csv(k1, r1);
    write_exp1_recruitment_csv(k2, r2);
    REQUIRE(c1.str() == c2.str());
    REQUIRE(k1.str() == k2.str());

    std::istringstream head(c1.str());
    std::string line;
    std::getline(head, line);
    REQUIRE(line == "iteration,mean_recalled_phase_ms,miss_fraction,mean_abs_error_ms");

    // misses dominate early: the first iteration recalls nothing
    REQUIRE(r1.miss_fraction(0) == 1.0);
}

TEST_CASE("experiment 2 produces a full capacity table with monotone hits") {
    RunConfig cfg;
    Exp2Config e2;
    e2.set_sizes = {2, 4};
    e2.tolerances_ms = {1.0, 3.0, 7.0};

    auto r = run_experiment2(cfg, e2, 2);
    REQUIRE(r.cells.size() == 6);
    for (const auto& c : r.cells) REQUIRE(c.total == c.set_size * 5);
    for (int size : e2.set_sizes) {
        REQUIRE(r.hits(size, 1.0) <= r.hits(size, 3.0));
        REQUIRE(r.hits(size, 3.0) <= r.hits(size, 7.0));
        // training went somewhere: most presentations recalled at the loosest band
        REQUIRE(r.hits(size, 7.0) >= 3 * size);
    }

    std::ostringstream os;
    write_exp2_capacity_csv(os, r);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    REQUIRE(line == "set_size,tolerance_ms,hits,total");
}

TEST_CASE("calibration centres the untrained probe at the configured fraction") {
    RunConfig cfg;
    double scale = calibrate_weight_scale(cfg, 3, 3, 5);
    double probe = untrained_probe_mean(cfg, scale, 3, 3, 5);
    double target = cfg.calib_fraction * cfg.v_thresh;
    REQUIRE_THAT(probe, Catch::Matchers::WithinAbs(target, 0.05));
    // and the shipped default matches the calibration procedure's output
    REQUIRE_THAT(cfg.weight_scale, Catch::Matchers::WithinRel(scale, 0.05));
}
