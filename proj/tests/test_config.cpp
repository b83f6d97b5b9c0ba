#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "cstdp/config.hpp"

using namespace cstdp;

TEST_CASE("an empty config file yields the published defaults") {
    std::istringstream empty("");
    RunConfig cfg = RunConfig::from_stream(empty);
    REQUIRE(cfg.tau_pot == 9.6);
    REQUIRE(cfg.tau_dep == 11.0);
    REQUIRE(cfg.m == 3200);
    REQUIRE(cfg.n == 75);
    REQUIRE(cfg.t_cyc == 35.0);
    REQUIRE(cfg.timestep == 0.1);
    REQUIRE(cfg.v_thresh == 60.0);
    REQUIRE(cfg.e_rev == 240.0);
    REQUIRE(cfg.w_init == 0.07);
    REQUIRE(cfg.w_max == 0.14);
    REQUIRE(cfg.a_plus == 0.99);
    REQUIRE(cfg.a_minus == 0.5);
    REQUIRE(cfg.t_pot == 5.0);
    REQUIRE(cfg.t_dep == 5.0);
    REQUIRE(cfg.dec_acc == 1.0);
    REQUIRE(cfg.v_diff == 1.0);
    REQUIRE(cfg.t_d == 1.0);
}

TEST_CASE("overrides are parsed and validated") {
    std::istringstream ok("N=80\ntau_pot=8.5\n# comment line\n\nT_dep=-5\n");
    RunConfig cfg = RunConfig::from_stream(ok);
    REQUIRE(cfg.n == 80);
    REQUIRE(cfg.tau_pot == 8.5);
    REQUIRE(cfg.t_dep == 5.0);  // magnitude of the published -5

    std::istringstream bad_range("N=4000\n");
    REQUIRE_THROWS_WITH(RunConfig::from_stream(bad_range),
                        Catch::Matchers::ContainsSubstring("N exceeds M"));
}

TEST_CASE("unknown keys are rejected by name") {
    std::istringstream bad("tau_pott=9.6\n");
    REQUIRE_THROWS_WITH(RunConfig::from_stream(bad),
                        Catch::Matchers::ContainsSubstring("tau_pott"));
}

TEST_CASE("malformed lines are rejected") {
    std::istringstream bad("tau_pot 9.6\n");
    REQUIRE_THROWS_AS(RunConfig::from_stream(bad), std::invalid_argument);
    std::istringstream bad2("tau_pot=abc\n");
    REQUIRE_THROWS_AS(RunConfig::from_stream(bad2), std::invalid_argument);
}

TEST_CASE("the config hash is stable and override-sensitive") {
    RunConfig a, b;
    REQUIRE(a.config_hash() == b.config_hash());
    b.set_key("N", "80");
    REQUIRE(a.config_hash() != b.config_hash());
    // seed does not participate in the hash; it is reported alongside
    RunConfig c;
    c.seed = 999;
    REQUIRE(a.config_hash() == c.config_hash());
}

TEST_CASE("canonical text round-trips through the parser") {
    RunConfig a;
    a.set_key("tau_pot", "8.25");
    a.set_key("W_init", "0.065");
    std::istringstream text(a.canonical_text());
    RunConfig b = RunConfig::from_stream(text);
    REQUIRE(a.canonical_text() == b.canonical_text());
    REQUIRE(a.config_hash() == b.config_hash());
}
