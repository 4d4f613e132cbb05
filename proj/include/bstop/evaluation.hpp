#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bstop/beta.hpp"
#include "bstop/oracle.hpp"
#include "bstop/rng.hpp"
#include "bstop/trellis.hpp"

namespace bstop {

enum class Estimator { MmseUnderPrior, Ml };

// Fixed-p view of a rule: trial count and estimation error conditioned on the
// true parameter.
struct ConditionalMetrics {
    double p = 0.0;
    double expected_trials = 0.0;  // E[N | p]
    double mse = 0.0;              // E[(f(p) - estimate)^2 | p]
    Estimator estimator = Estimator::MmseUnderPrior;
};

ConditionalMetrics conditional_metrics(const StoppingRule& rule, double p,
                                       const BetaParams& design_prior, Estimand estimand,
                                       Estimator estimator);

// Reach probabilities when the true parameter is a fixed p (branch weights p
// and 1-p instead of the prior predictive).
TriArray<double> conditional_reach(const StoppingRule& rule, double p);

// E[N | p]: exact leaf-weighted trial count at fixed p.
double conditional_expected_trials(const StoppingRule& rule, double p);

// E[(f(p) - estimate)^2 | p] for the chosen estimator. The MMSE estimator
// uses the rule's design prior; ML is k/m for p (undefined when the rule can
// stop at m = 0) and log(k/m) for log p (additionally undefined at k = 0).
double conditional_mse(const StoppingRule& rule, double p, const BetaParams& design_prior,
                       Estimand estimand, Estimator estimator);

// Closed-form estimate at a leaf.
double leaf_estimate(int k, int m, const BetaParams& design_prior, Estimand estimand,
                     Estimator estimator);

// Profile-based counterparts for evaluating one rule at many p values.
double profile_expected_trials(const LeafProfile& profile, double p);
double profile_mse(const LeafProfile& profile, double p, const BetaParams& design_prior,
                   Estimand estimand, Estimator estimator);

// One stopping-process realization: i.i.d. Bernoulli(p) trials plus an
// independent coin at any fractional node. Returns (k, m).
std::pair<long long, long long> simulate_stop(const StoppingRule& rule, double p,
                                              CounterRng& rng);
std::pair<long long, long long> simulate_stop(const StoppingRule& rule, double p,
                                              std::uint64_t seed);

// Fixed 2048-point prior average of a conditional quantity.
double prior_average(const std::function<double(double)>& f, const BetaParams& prior);

// MSE-versus-budget table over a finite parameter set (one row per method and
// budget). Binomial and oracle rows are the closed forms for the ML estimator;
// the threshold row evaluates the rule budget-matched to the same mean trial
// count over the set.
struct SweepRow {
    std::string method;
    double eta = 0.0;
    double mse = 0.0;
};
std::vector<SweepRow> mse_vs_budget_sweep(const ParamSet& scene,
                                          const BetaParams& design_prior,
                                          std::span<const double> budgets);

}  // namespace bstop
