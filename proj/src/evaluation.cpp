#include "bstop/evaluation.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "bstop/designers.hpp"
#include "bstop/quadrature.hpp"

namespace bstop {

namespace {

struct FixedBranch {
    double p;
    double operator()(int, int) const { return p; }
};

void check_probability(double p) {
    if (!(p >= 0.0) || !(p <= 1.0)) {
        throw std::invalid_argument("true parameter must lie in [0, 1]");
    }
}

double estimand_value(double p, Estimand estimand) {
    return estimand == Estimand::P ? p : std::log(p);
}

}  // namespace

ConditionalMetrics conditional_metrics(const StoppingRule& rule, double p,
                                       const BetaParams& design_prior, Estimand estimand,
                                       Estimator estimator) {
    ConditionalMetrics out;
    out.p = p;
    out.estimator = estimator;
    out.expected_trials = conditional_expected_trials(rule, p);
    out.mse = conditional_mse(rule, p, design_prior, estimand, estimator);
    return out;
}

TriArray<double> conditional_reach(const StoppingRule& rule, double p) {
    check_probability(p);
    const int d = rule.depth();
    TriArray<double> u(d, 0.0);
    u.at(0, 0) = 1.0;
    for (int m = 0; m < d; ++m) {
        for (int k = 0; k <= m; ++k) {
            const double mass = u.at(k, m) * rule.q(k, m);
            if (mass <= 0.0) continue;
            u.at(k + 1, m + 1) += mass * p;
            u.at(k, m + 1) += mass * (1.0 - p);
        }
    }
    return u;
}

double conditional_expected_trials(const StoppingRule& rule, double p) {
    check_probability(p);
    double h = 0.0;
    walk_leaves(rule, FixedBranch{p}, [&](int, int m, double w) { h += w * m; });
    return h;
}

double leaf_estimate(int k, int m, const BetaParams& design_prior, Estimand estimand,
                     Estimator estimator) {
    if (estimator == Estimator::MmseUnderPrior) {
        const BetaParams post = design_prior.posterior_after(k, m);
        return estimand == Estimand::P ? beta_mean(post) : logp_posterior_mean(post);
    }
    if (m == 0) throw std::domain_error("ML estimator undefined when stopping at m = 0");
    if (estimand == Estimand::P) return static_cast<double>(k) / m;
    if (k == 0) throw std::domain_error("ML estimator of log p undefined at k = 0");
    return std::log(static_cast<double>(k) / m);
}

double conditional_mse(const StoppingRule& rule, double p, const BetaParams& design_prior,
                       Estimand estimand, Estimator estimator) {
    check_probability(p);
    const double target = estimand_value(p, estimand);
    double mse = 0.0;
    walk_leaves(rule, FixedBranch{p}, [&](int k, int m, double w) {
        const double e = leaf_estimate(k, m, design_prior, estimand, estimator) - target;
        mse += w * e * e;
    });
    return mse;
}

double profile_expected_trials(const LeafProfile& profile, double p) {
    check_probability(p);
    double h = 0.0;
    for (const auto& leaf : profile.leaves) h += leaf_mass(leaf, p) * leaf.m;
    return h;
}

double profile_mse(const LeafProfile& profile, double p, const BetaParams& design_prior,
                   Estimand estimand, Estimator estimator) {
    check_probability(p);
    const double target = estimand_value(p, estimand);
    double mse = 0.0;
    for (const auto& leaf : profile.leaves) {
        const double w = leaf_mass(leaf, p);
        if (w <= 0.0) continue;
        const double e =
            leaf_estimate(leaf.k, leaf.m, design_prior, estimand, estimator) - target;
        mse += w * e * e;
    }
    return mse;
}

std::pair<long long, long long> simulate_stop(const StoppingRule& rule, double p,
                                              CounterRng& rng) {
    check_probability(p);
    long long k = 0, m = 0;
    const int d = rule.depth();
    while (m <= d) {
        const double qv = rule.q(static_cast<int>(k), static_cast<int>(m));
        bool go;
        if (qv <= 0.0) {
            go = false;
        } else if (qv >= 1.0) {
            go = true;
        } else {
            go = rng.next_double() < qv;  // coin independent of the process
        }
        if (!go) break;
        if (rng.next_double() < p) ++k;
        ++m;
    }
    return {k, m};
}

std::pair<long long, long long> simulate_stop(const StoppingRule& rule, double p,
                                              std::uint64_t seed) {
    CounterRng rng(seed);
    return simulate_stop(rule, p, rng);
}

double prior_average(const std::function<double(double)>& f, const BetaParams& prior) {
    return beta_expectation_fixed(f, prior);
}

std::vector<SweepRow> mse_vs_budget_sweep(const ParamSet& scene,
                                          const BetaParams& design_prior,
                                          std::span<const double> budgets) {
    if (scene.values.empty()) throw std::invalid_argument("mse_vs_budget_sweep: empty scene");
    std::map<double, std::size_t> distinct;
    for (double v : scene.values) ++distinct[v];
    const double n = static_cast<double>(scene.count());
    double mean_pq = 0.0, mean_v = 0.0;
    for (const auto& [p, c] : distinct) {
        mean_pq += c * p * (1.0 - p);
        mean_v += c * std::sqrt(p * (1.0 - p));
    }
    mean_pq /= n;
    mean_v /= n;

    std::vector<SweepRow> rows;
    for (double eta : budgets) {
        if (!(eta >= 1.0)) {
            throw std::invalid_argument("mse_vs_budget_sweep: budgets must be >= 1");
        }
        rows.push_back({"binomial", eta, mean_pq / eta});
        rows.push_back({"oracle", eta, mean_v * mean_v / eta});
        const auto matched = threshold_rule_for_values_budget(
            design_prior, Estimand::P, scene.values, eta);
        const LeafProfile profile = leaf_profile(matched.rule);
        double mse = 0.0;
        for (const auto& [p, c] : distinct) {
            mse += c * profile_mse(profile, p, design_prior, Estimand::P, Estimator::Ml);
        }
        rows.push_back({"threshold", eta, mse / n});
    }
    return rows;
}

}  // namespace bstop
