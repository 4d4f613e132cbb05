#include <cmath>
#include <vector>

#include "doctest.h"

#include "bstop/beta.hpp"
#include "bstop/designers.hpp"
#include "bstop/imaging.hpp"
#include "bstop/oracle.hpp"
#include "bstop/quadrature.hpp"
#include "bstop/rng.hpp"

using namespace bstop;

namespace {

double allocation_objective(const std::vector<double>& p, const std::vector<double>& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * (1.0 - p[i]) / m[i];
    return s;
}

// Independent route to the optimal allocation: bisection on the Lagrange
// multiplier of the constrained minimization.
std::vector<double> lagrange_allocation(const std::vector<double>& p, double eta) {
    const double total = eta * static_cast<double>(p.size());
    double lo = 1e-18, hi = 1e18;
    auto mass = [&](double nu) {
        double s = 0.0;
        for (double v : p) s += std::sqrt(v * (1.0 - v) / nu);
        return s;
    };
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        (mass(mid) > total ? lo : hi) = mid;
    }
    std::vector<double> out;
    for (double v : p) out.push_back(std::sqrt(v * (1.0 - v) / lo));
    return out;
}

}  // namespace

TEST_CASE("oracle allocation") {
    SUBCASE("equal parameters get the plain budget") {
        const ParamSet ps{{0.3, 0.3, 0.3}};
        for (double m : oracle_allocation(ps, 7.0)) CHECK(m == doctest::Approx(7.0));
    }
    SUBCASE("two-parameter example") {
        const ParamSet ps{{0.1, 0.5}};
        const auto m = oracle_allocation(ps, 100.0);
        CHECK(m[0] == doctest::Approx(75.0).epsilon(1e-12));
        CHECK(m[1] == doctest::Approx(125.0).epsilon(1e-12));
    }
    SUBCASE("a vanishing parameter gets a vanishing share") {
        const ParamSet ps{{1e-12, 0.5}};
        const auto m = oracle_allocation(ps, 50.0);
        CHECK(m[0] < 1e-3);
        CHECK(m[1] == doctest::Approx(100.0).epsilon(1e-4));
    }
    SUBCASE("degenerate sets are rejected") {
        CHECK_THROWS_AS(oracle_allocation(ParamSet{{0.0, 1.0}}, 5.0),
                        std::invalid_argument);
    }
}

TEST_CASE("oracle allocation agrees with a Lagrange solver and beats random splits") {
    CounterRng rng(41);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> p;
        for (int i = 0; i < 8; ++i) p.push_back(0.02 + 0.8 * rng.next_double());
        const double eta = 20.0;
        const auto m = oracle_allocation(ParamSet{p}, eta);
        const auto m_ref = lagrange_allocation(p, eta);
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(m[i] == doctest::Approx(m_ref[i]).epsilon(1e-9));
        }
        const double opt = allocation_objective(p, m);
        double total = 0.0;
        for (double v : m) total += v;
        for (int rep = 0; rep < 10000; ++rep) {
            // random feasible allocation with the same total
            std::vector<double> f(p.size());
            double s = 0.0;
            for (auto& v : f) s += (v = 0.01 + rng.next_double());
            for (auto& v : f) v *= total / s;
            CHECK(allocation_objective(p, f) >= opt - 1e-12);
        }
    }
}

TEST_CASE("discrete trial allocation gain") {
    SUBCASE("equal parameters give unit gain") {
        CHECK(allocation_gain_discrete(ParamSet{{0.2, 0.2, 0.2}}).gain_linear ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("one informative process among near-degenerate ones approaches r") {
        const int r = 8;
        std::vector<double> p(r - 1, 1e-10);
        p.push_back(0.5);
        CHECK(allocation_gain_discrete(ParamSet{p}).gain_linear ==
              doctest::Approx(r).epsilon(1e-3));
    }
    SUBCASE("gain stays within [1, r]") {
        CounterRng rng(43);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> p;
            const int r = 2 + (int)(rng.next_double() * 10);
            for (int i = 0; i < r; ++i) p.push_back(rng.next_double() * 0.999 + 5e-4);
            const auto g = allocation_gain_discrete(ParamSet{p});
            CHECK(g.gain_linear >= 1.0 - 1e-12);
            CHECK(g.gain_linear <= r + 1e-12);
            CHECK(g.gain_db == doctest::Approx(10.0 * std::log10(g.gain_linear)));
        }
    }
    SUBCASE("the gain is the MSE ratio of the two allocations") {
        const std::vector<double> p{0.05, 0.2, 0.5, 0.9};
        const auto g = allocation_gain_discrete(ParamSet{p});
        const double eta = 13.0;
        const std::vector<double> flat(p.size(), eta);
        const auto opt = oracle_allocation(ParamSet{p}, eta);
        const double ratio =
            allocation_objective(p, flat) / allocation_objective(p, opt);
        CHECK(g.gain_linear == doctest::Approx(ratio).epsilon(1e-12));
    }
}

TEST_CASE("shepp-logan phantom gains") {
    const Scene phantom = shepp_logan(100);
    const auto base = allocation_gain_discrete(ParamSet{rescale(phantom, 0.001, 0.101).p});
    CHECK(std::abs(base.gain_linear - 1.6944) <= 0.01);
    CHECK(base.gain_db == doctest::Approx(2.29).epsilon(0.01));
    // small-parameter quasi-invariance under rescaling
    const auto doubled =
        allocation_gain_discrete(ParamSet{rescale(phantom, 0.002, 0.202).p});
    const auto halved =
        allocation_gain_discrete(ParamSet{rescale(phantom, 0.0005, 0.0505).p});
    CHECK(std::abs(doubled.gain_linear - 1.6633) <= 0.01);
    CHECK(std::abs(halved.gain_linear - 1.7096) <= 0.01);
    CHECK(std::abs(doubled.gain_linear / base.gain_linear - 1.0) < 0.02);
    CHECK(std::abs(halved.gain_linear / base.gain_linear - 1.0) < 0.02);
}

TEST_CASE("distributional gain for a uniform prior") {
    const auto g = allocation_gain_beta(BetaParams(1, 1));
    CHECK(g.gain_linear ==
          doctest::Approx(32.0 / (3.0 * M_PI * M_PI)).epsilon(1e-8));
    CHECK(std::abs(g.gain_linear - 1.0808) < 1e-4);
}

TEST_CASE("empirical two-point distribution gain") {
    for (double delta : {0.5, 0.1, 0.02}) {
        const int n = 5000;
        std::vector<double> p(n, 0.0);
        for (int i = 0; i < (int)std::lround(delta * n); ++i) p[i] = 0.5;
        CHECK(allocation_gain_empirical(ParamSet{p}).gain_linear ==
              doctest::Approx(1.0 / delta).epsilon(1e-9));
    }
}

TEST_CASE("both gain forms agree") {
    CounterRng rng(47);
    for (int trial = 0; trial < 20; ++trial) {
        const BetaParams prior(0.4 + 5.0 * rng.next_double(),
                               0.4 + 5.0 * rng.next_double());
        const double e_pq =
            beta_expectation([](double p) { return p * (1.0 - p); }, prior);
        const double e_v = mean_root_variance(prior);
        const double var_v = e_pq - e_v * e_v;
        const double form_two = 1.0 + var_v / (e_v * e_v);
        CHECK(allocation_gain_beta(prior).gain_linear ==
              doctest::Approx(form_two).epsilon(1e-10));
    }
}

TEST_CASE("oracle trial count") {
    const BetaParams uni(1, 1);
    CHECK(mean_root_variance(uni) == doctest::Approx(M_PI / 8.0).epsilon(1e-10));
    CHECK(oracle_trial_count(0.5, uni, 200.0) ==
          doctest::Approx(100.0 / (M_PI / 8.0)).epsilon(1e-9));
    // fixed point: a parameter at the mean root-variance gets exactly eta
    const double ev = mean_root_variance(uni);
    const double p_fix = 0.5 * (1.0 - std::sqrt(1.0 - 4.0 * ev * ev));
    CHECK(oracle_trial_count(p_fix, uni, 37.0) == doctest::Approx(37.0).epsilon(1e-9));
    // identity with the asymptotic threshold choice
    const double eta = 431.0;
    const double dmin = (ev / eta) * (ev / eta);
    for (double p : {0.1, 0.4, 0.8}) {
        CHECK(oracle_trial_count(p, uni, eta) ==
              doctest::Approx(std::sqrt(p * (1.0 - p) / dmin)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(oracle_trial_count(0.0, uni, 10.0), std::invalid_argument);
}
