#include <cmath>
#include <sstream>

#include "doctest.h"

#include "bstop/beta.hpp"
#include "bstop/designers.hpp"
#include "bstop/rng.hpp"
#include "bstop/trellis.hpp"

using namespace bstop;

namespace {

// Brute-force oracle: expands every outcome path of the binary tree instead of
// the trellis recursion. Handles fractional q.
void enumerate_paths(const StoppingRule& rule, const BetaParams& prior, Estimand est,
                     int k, int m, double mass, double& h, double& g) {
    const double qv = rule.q(k, m);
    if (qv < 1.0) {
        h += mass * (1.0 - qv) * m;
        g += mass * (1.0 - qv) * stop_risk(prior.posterior_after(k, m), est);
    }
    if (qv > 0.0 && m < rule.depth()) {
        const double s = (prior.alpha + k) / (prior.alpha + prior.beta + m);
        enumerate_paths(rule, prior, est, k + 1, m + 1, mass * qv * s, h, g);
        enumerate_paths(rule, prior, est, k, m + 1, mass * qv * (1.0 - s), h, g);
    }
}

StoppingRule random_rule(CounterRng& rng, int depth) {
    StoppingRule rule(depth);
    // Grow a random connected continuation set from the root.
    std::vector<char> reach_cur(1, 1), reach_next;
    for (int m = 0; m < depth; ++m) {
        reach_next.assign(static_cast<std::size_t>(m) + 2, 0);
        bool any = false;
        for (int k = 0; k <= m; ++k) {
            if (!reach_cur[k]) continue;
            if (rng.next_double() < 0.7) {
                rule.set_continue(k, m);
                reach_next[k] = reach_next[k + 1] = 1;
                any = true;
            }
        }
        if (!any) break;
        reach_cur.swap(reach_next);
    }
    return rule;
}

}  // namespace

TEST_CASE("reach probabilities for the two-trial binomial rule") {
    const auto rule = binomial_rule(2);
    const auto u = reach_probabilities(rule, BetaParams(1, 1));
    CHECK(u.at(0, 0) == 1.0);
    CHECK(u.at(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(u.at(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    // Under a uniform prior every success count at a level is equally likely.
    CHECK(u.at(0, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(u.at(1, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(u.at(2, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("uniform prior spreads binomial reach evenly at every level") {
    const auto rule = binomial_rule(7);
    const auto u = reach_probabilities(rule, BetaParams(1, 1));
    for (int m = 0; m <= 7; ++m) {
        for (int k = 0; k <= m; ++k) {
            CHECK(u.at(k, m) == doctest::Approx(1.0 / (m + 1)).epsilon(1e-12));
        }
    }
}

TEST_CASE("stop-at-root rule") {
    StoppingRule rule(4);
    const auto u = reach_probabilities(rule, BetaParams(2, 3));
    CHECK(u.at(0, 0) == 1.0);
    CHECK(u.at(0, 1) == 0.0);
    CHECK(u.at(1, 1) == 0.0);
    CHECK(expected_trials(rule, BetaParams(2, 3)) == 0.0);
    CHECK(expected_bayes_risk(rule, BetaParams(1, 1), Estimand::P) ==
          doctest::Approx(1.0 / 12.0).epsilon(1e-15));
}

TEST_CASE("leaf mass conservation") {
    CounterRng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        auto rule = random_rule(rng, 9);
        if (trial % 3 == 0 && rule.q(0, 0) == 1.0) rule.set_fractional(0, 0, 0.25);
        double total = 0.0;
        walk_leaves(
            rule,
            [&](int k, int m) { return (1.0 + k) / (3.5 + m); },
            [&](int, int, double w) { total += w; });
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("binomial expected trials is the trial count under any prior") {
    CHECK(expected_trials(binomial_rule(5), BetaParams(1, 1)) ==
          doctest::Approx(5.0).epsilon(1e-14));
    CHECK(expected_trials(binomial_rule(3), BetaParams(2, 5)) ==
          doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("single-trial binomial risk under a uniform prior") {
    // Two leaves, each with mass 1/2 and posterior variance 1/18.
    CHECK(expected_bayes_risk(binomial_rule(1), BetaParams(1, 1), Estimand::P) ==
          doctest::Approx(1.0 / 18.0).epsilon(1e-14));
}

TEST_CASE("trellis recursion equals path enumeration") {
    const BetaParams prior(1, 1);

    SUBCASE("truncated negative binomial") {
        const auto rule = negbinomial_rule(2, 5);
        double h = 0.0, g = 0.0;
        enumerate_paths(rule, prior, Estimand::P, 0, 0, 1.0, h, g);
        CHECK(expected_trials(rule, prior) == doctest::Approx(h).epsilon(1e-12));
        CHECK(expected_bayes_risk(rule, prior, Estimand::P) ==
              doctest::Approx(g).epsilon(1e-12));
    }

    SUBCASE("random rules up to depth 10") {
        CounterRng rng(5);
        for (int trial = 0; trial < 12; ++trial) {
            const BetaParams pr(0.5 + 3.0 * rng.next_double(),
                                0.5 + 3.0 * rng.next_double());
            auto rule = random_rule(rng, 10);
            if (trial % 2 == 0 && rule.q(0, 0) == 1.0) rule.set_fractional(0, 0, 0.6);
            const Estimand est = trial % 3 == 0 ? Estimand::LogP : Estimand::P;
            double h = 0.0, g = 0.0;
            enumerate_paths(rule, pr, est, 0, 0, 1.0, h, g);
            const auto mm = evaluate_rule(rule, pr, est);
            CHECK(mm.expected_trials == doctest::Approx(h).epsilon(1e-12));
            CHECK(mm.expected_bayes_risk == doctest::Approx(g).epsilon(1e-12));
        }
    }
}

TEST_CASE("binomial 72 log-p risk under a uniform prior") {
    const double g = expected_bayes_risk(binomial_rule(72), BetaParams(1, 1), Estimand::LogP);
    CHECK(std::abs(g - 0.0668) <= 5e-4);
}

TEST_CASE("raising q on a reachable node trades risk for trials") {
    CounterRng rng(3);
    const BetaParams prior(1.2, 2.8);
    for (int trial = 0; trial < 15; ++trial) {
        auto rule = random_rule(rng, 8);
        const auto u = reach_probabilities(rule, prior);
        // pick a reachable stopping node below the maximum depth
        for (int m = 0; m < rule.depth() - 1; ++m) {
            for (int k = 0; k <= m; ++k) {
                if (u.at(k, m) > 0.0 && rule.q(k, m) == 0.0) {
                    auto grown = rule;
                    grown.set_continue(k, m);
                    const auto before = evaluate_rule(rule, prior, Estimand::P);
                    const auto after = evaluate_rule(grown, prior, Estimand::P);
                    CHECK(after.expected_trials > before.expected_trials);
                    CHECK(after.expected_bayes_risk <= before.expected_bayes_risk + 1e-15);
                }
            }
        }
    }
}

TEST_CASE("metric bounds") {
    CounterRng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const auto rule = random_rule(rng, 12);
        const BetaParams prior(2, 5);
        const auto mm = evaluate_rule(rule, prior, Estimand::P);
        CHECK(mm.expected_trials >= 0.0);
        CHECK(mm.expected_trials <= rule.depth());
        CHECK(mm.expected_bayes_risk <= beta_variance(prior) + 1e-15);
        CHECK(mm.expected_bayes_risk >= 0.0);
    }
}

TEST_CASE("validate_rule") {
    SUBCASE("binomial rule is well formed") {
        CHECK(!validate_rule(binomial_rule(5)).has_value());
    }
    SUBCASE("disconnected continuation node") {
        StoppingRule rule(3);
        rule.set_continue(2, 2);  // no ancestor continues
        const auto violation = validate_rule(rule);
        REQUIRE(violation.has_value());
        CHECK(violation->find("disconnected") != std::string::npos);
    }
    SUBCASE("two fractional nodes") {
        StoppingRule rule(3);
        rule.set_continue(0, 0);
        rule.set_fractional(0, 1, 0.5);
        rule.set_fractional(1, 1, 0.5);
        const auto violation = validate_rule(rule);
        REQUIRE(violation.has_value());
        CHECK(violation->find("multiplexing") != std::string::npos);
    }
    SUBCASE("single fractional node is fine") {
        StoppingRule rule(3);
        rule.set_continue(0, 0);
        rule.set_fractional(1, 1, 0.5);
        CHECK(!validate_rule(rule).has_value());
    }
}

TEST_CASE("rule serialization round-trips bit-exactly") {
    CounterRng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        auto rule = random_rule(rng, 14);
        if (rule.q(0, 0) == 1.0 && trial % 2 == 0) {
            rule.set_fractional(0, 1, 0.1 + 0.8 * rng.next_double());
        }
        const DesignedRule designed{rule, BetaParams(1.25, 3.75), Estimand::LogP};
        std::stringstream ss;
        save_rule(ss, designed, "round trip test");
        const auto loaded = load_rule(ss);
        CHECK(loaded.rule == designed.rule);
        CHECK(loaded.prior.alpha == designed.prior.alpha);
        CHECK(loaded.prior.beta == designed.prior.beta);
        CHECK(loaded.estimand == designed.estimand);
    }
    // awkward fractional values survive exactly
    StoppingRule rule(4);
    rule.set_continue(0, 0);
    rule.set_fractional(0, 1, std::nextafter(1.0 / 3.0, 1.0));
    std::stringstream ss;
    save_rule(ss, {rule, BetaParams(1, 1), Estimand::P});
    const auto loaded = load_rule(ss);
    CHECK(loaded.rule.fractional()->second == rule.fractional()->second);
}

TEST_CASE("leaf profile matches the walk for any parameter") {
    CounterRng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        auto rule = random_rule(rng, 12);
        if (rule.q(0, 0) == 1.0) rule.set_fractional(1, 2, 0.37);
        const auto profile = leaf_profile(rule);
        for (double p : {0.0, 0.05, 0.4, 0.93, 1.0}) {
            double h_walk = 0.0, mass_walk = 0.0;
            walk_leaves(
                rule, [p](int, int) { return p; },
                [&](int, int m, double w) {
                    h_walk += w * m;
                    mass_walk += w;
                });
            double h_prof = 0.0, mass_prof = 0.0;
            for (const auto& leaf : profile.leaves) {
                const double w = leaf_mass(leaf, p);
                h_prof += w * leaf.m;
                mass_prof += w;
            }
            CHECK(h_prof == doctest::Approx(h_walk).epsilon(1e-11));
            CHECK(mass_prof == doctest::Approx(mass_walk).epsilon(1e-11));
        }
    }
}

TEST_CASE("rule setters reject out-of-range nodes") {
    StoppingRule rule(4);
    CHECK_THROWS_AS(rule.set_continue(0, 4), std::out_of_range);   // depth level stops
    CHECK_THROWS_AS(rule.set_continue(3, 2), std::out_of_range);   // k > m
    CHECK_THROWS_AS(rule.set_fractional(0, 0, 1.0), std::invalid_argument);
}
