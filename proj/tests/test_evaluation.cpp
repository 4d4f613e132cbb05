#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"

#include "bstop/beta.hpp"
#include "bstop/designers.hpp"
#include "bstop/evaluation.hpp"
#include "bstop/imaging.hpp"
#include "bstop/oracle.hpp"
#include "bstop/quadrature.hpp"
#include "bstop/rng.hpp"
#include "bstop/trellis.hpp"

using namespace bstop;

namespace {

double binom_coeff(int n, int k) {
    double c = 1.0;
    for (int i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
    return c;
}

}  // namespace

TEST_CASE("conditional reach of a binomial rule is the binomial pmf") {
    const auto rule = binomial_rule(5);
    const auto u = conditional_reach(rule, 0.5);
    for (int k = 0; k <= 5; ++k) {
        CHECK(u.at(k, 5) == doctest::Approx(binom_coeff(5, k) / 32.0).epsilon(1e-12));
    }
    const auto u0 = conditional_reach(rule, 0.0);
    for (int m = 0; m <= 5; ++m) {
        CHECK(u0.at(0, m) == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("binomial ML conditional MSE is the textbook variance") {
    const auto rule = binomial_rule(20);
    const BetaParams uni(1, 1);
    for (double p : {0.05, 0.3, 0.5, 0.77}) {
        CHECK(conditional_mse(rule, p, uni, Estimand::P, Estimator::Ml) ==
              doctest::Approx(p * (1.0 - p) / 20.0).epsilon(1e-12));
    }
}

TEST_CASE("ML estimator error paths") {
    StoppingRule stop_at_root(2);
    CHECK_THROWS_AS(
        conditional_mse(stop_at_root, 0.5, BetaParams(1, 1), Estimand::P, Estimator::Ml),
        std::domain_error);
    // a binomial rule can stop with zero successes, so log p has no ML estimate
    CHECK_THROWS_AS(conditional_mse(binomial_rule(3), 0.5, BetaParams(1, 1),
                                    Estimand::LogP, Estimator::Ml),
                    std::domain_error);
}

TEST_CASE("three methods share the design budget under the prior") {
    const BetaParams uni(1, 1);
    const double eta = 200.0;
    CHECK(expected_trials(binomial_rule(200), uni) == doctest::Approx(eta));
    const auto thr = threshold_rule_for_budget(uni, Estimand::P, eta);
    CHECK(expected_trials(thr.rule, uni) == doctest::Approx(eta).epsilon(1e-10));
    const double oracle_mean = beta_expectation(
        [&](double p) {
            return p > 0.0 && p < 1.0 ? oracle_trial_count(p, uni, eta) : 0.0;
        },
        uni, 1e-9);
    CHECK(oracle_mean == doctest::Approx(eta).epsilon(1e-8));
}

TEST_CASE("prior quadrature of conditional metrics recovers the trellis values") {
    const BetaParams uni(1, 1);
    auto check_rule = [&](const StoppingRule& rule, Estimand est) {
        const auto mm = evaluate_rule(rule, uni, est);
        const double h_quad = prior_average(
            [&](double p) { return conditional_expected_trials(rule, p); }, uni);
        const double g_quad = prior_average(
            [&](double p) {
                return conditional_mse(rule, p, uni, est, Estimator::MmseUnderPrior);
            },
            uni);
        CHECK(std::abs(h_quad / mm.expected_trials - 1.0) <= 1e-9);
        CHECK(std::abs(g_quad / mm.expected_bayes_risk - 1.0) <= 1e-6);
    };
    check_rule(threshold_rule_for_budget(uni, Estimand::P, 20.0).rule, Estimand::P);
    DesignConfig fig5{uni, Estimand::P, 64, {}, {}, 0.005};
    check_rule(design_threshold(fig5), Estimand::P);
}

TEST_CASE("threshold trial counts track the square-root law in the interior") {
    const double dmin = 1e-6;
    DesignConfig cfg{BetaParams(1, 1), Estimand::P, 0, {}, {}, dmin};
    const auto rule = design_threshold(cfg);
    for (double p = 0.2; p <= 0.8001; p += 0.1) {
        const double want = std::sqrt(p * (1.0 - p) / dmin);
        REQUIRE(want > 100.0);
        const double have = conditional_expected_trials(rule, p);
        CHECK(std::abs(have / want - 1.0) < 0.10);
    }
}

TEST_CASE("simulate_stop") {
    SUBCASE("stop-at-root rule never samples") {
        StoppingRule rule(3);
        const auto [k, m] = simulate_stop(rule, 0.3, 99u);
        CHECK(k == 0);
        CHECK(m == 0);
    }
    SUBCASE("law of large numbers band for a long binomial run") {
        const auto rule = binomial_rule(10000);
        const auto [k, m] = simulate_stop(rule, 0.3, 7u);
        CHECK(m == 10000);
        const double sigma = std::sqrt(0.3 * 0.7 / 10000.0);
        CHECK(std::abs((double)k / (double)m - 0.3) < 3.0 * sigma);
    }
    SUBCASE("fixed seeds reproduce bit-exactly") {
        const auto rule = negbinomial_rule(3, 50);
        for (std::uint64_t seed : {1ull, 42ull, 1234567ull}) {
            const auto a = simulate_stop(rule, 0.21, seed);
            const auto b = simulate_stop(rule, 0.21, seed);
            CHECK(a == b);
        }
    }
}

TEST_CASE("empirical leaf frequencies match the conditional reach") {
    DesignConfig cfg{BetaParams(1, 1), Estimand::P, 64, {}, {}, 0.005};
    const auto rule = design_threshold(cfg);
    const double p = 0.3;
    std::map<std::pair<int, int>, double> expected;
    walk_leaves(
        rule, [p](int, int) { return p; },
        [&](int k, int m, double w) {
            if (w > 0.0) expected[{k, m}] = w;
        });
    const int n = 1000000;
    std::map<std::pair<int, int>, int> counts;
    for (int i = 0; i < n; ++i) {
        CounterRng rng = CounterRng::stream(2718, i);
        const auto [k, m] = simulate_stop(rule, p, rng);
        ++counts[{(int)k, (int)m}];
    }
    double total_mass = 0.0;
    for (const auto& [leaf, w] : expected) {
        total_mass += w;
        const double freq = counts[leaf] / static_cast<double>(n);
        const double se = std::sqrt(w * (1.0 - w) / n);
        CAPTURE(leaf.first);
        CAPTURE(leaf.second);
        CHECK(std::abs(freq - w) <= 4.0 * se + 1e-12);
    }
    CHECK(total_mass == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& [leaf, c] : counts) CHECK(expected.count(leaf) == 1);
}

TEST_CASE("budget sweep on the phantom value distribution") {
    const Scene scene = rescale(shepp_logan(100), 0.001, 0.101);
    const ParamSet ps{scene.p};

    SUBCASE("threshold beats constant allocation and approaches the oracle") {
        const std::vector<double> budgets{100.0, 400.0, 1200.0};
        const auto rows = mse_vs_budget_sweep(ps, BetaParams(1, 1), budgets);
        std::map<double, std::map<std::string, double>> by_eta;
        for (const auto& r : rows) by_eta[r.eta][r.method] = r.mse;
        std::vector<double> oracle_ratio;
        for (double eta : budgets) {
            auto& m = by_eta[eta];
            CHECK(m["threshold"] <= m["binomial"]);
            CHECK(m["threshold"] >= m["oracle"] * (1.0 - 1e-9));
            oracle_ratio.push_back(m["threshold"] / m["oracle"]);
        }
        CHECK(oracle_ratio[1] < oracle_ratio[0]);
        CHECK(oracle_ratio[2] < oracle_ratio[1]);
        CHECK(oracle_ratio[2] <= 1.03);
    }

    SUBCASE("a heavily skewed design prior can beat the oracle at low budgets") {
        const std::vector<double> budgets{2.0, 10.0, 40.0};
        const auto rows = mse_vs_budget_sweep(ps, BetaParams(1, 50), budgets);
        std::map<double, std::map<std::string, double>> by_eta;
        for (const auto& r : rows) by_eta[r.eta][r.method] = r.mse;
        bool beats_oracle = false;
        for (double eta : budgets) {
            auto& m = by_eta[eta];
            CHECK(m["threshold"] <= m["binomial"]);
            beats_oracle = beats_oracle || m["threshold"] < m["oracle"];
        }
        CHECK(beats_oracle);
    }
}

TEST_CASE("conditional metrics bundle the fixed-p quantities") {
    const auto rule = binomial_rule(12);
    const BetaParams uni(1, 1);
    const auto cm = conditional_metrics(rule, 0.4, uni, Estimand::P, Estimator::Ml);
    CHECK(cm.p == 0.4);
    CHECK(cm.expected_trials == doctest::Approx(12.0));
    CHECK(cm.mse == doctest::Approx(0.4 * 0.6 / 12.0).epsilon(1e-12));
    CHECK(cm.expected_trials <= rule.depth());
    CHECK(cm.mse >= 0.0);
}

TEST_CASE("profile metrics agree with the streaming walk") {
    const BetaParams uni(1, 1);
    auto thr = threshold_rule_for_budget(uni, Estimand::P, 25.0).rule;
    const auto profile = leaf_profile(thr);
    for (double p : {0.03, 0.4, 0.97}) {
        CHECK(profile_expected_trials(profile, p) ==
              doctest::Approx(conditional_expected_trials(thr, p)).epsilon(1e-11));
        CHECK(profile_mse(profile, p, uni, Estimand::P, Estimator::MmseUnderPrior) ==
              doctest::Approx(conditional_mse(thr, p, uni, Estimand::P,
                                              Estimator::MmseUnderPrior))
                  .epsilon(1e-11));
    }
}
