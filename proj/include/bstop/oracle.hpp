#pragma once

#include <span>
#include <vector>

#include "bstop/beta.hpp"

namespace bstop {

// A finite collection of Bernoulli parameters (e.g. the pixels of a scene).
struct ParamSet {
    std::vector<double> values;
    std::size_t count() const { return values.size(); }
};

struct GainReport {
    double gain_linear = 1.0;
    double gain_db = 0.0;
    // Per-process optimal trial counts for a unit mean budget (empty for the
    // distributional form).
    std::vector<double> allocations;
};

// Optimal per-process trial counts under a mean budget: proportional to
// sqrt(p(1-p)), summing to count * eta. Not constrained to integers.
std::vector<double> oracle_allocation(const ParamSet& params, double eta);

// Ratio of the constant-allocation average MSE to the oracle-allocated one:
//   r * sum p(1-p) / (sum sqrt(p(1-p)))^2, always in [1, r].
GainReport allocation_gain_discrete(const ParamSet& params);

// Same quantity read as an empirical distribution (relative frequencies).
GainReport allocation_gain_empirical(const ParamSet& params);

// Distributional limit under a Beta prior:
//   E[P(1-P)] / E[sqrt(P(1-P))]^2  ==  1 + Var(V)/E[V]^2 with V = sqrt(P(1-P)).
// Expectations by adaptive quadrature, absolute tolerance 1e-10.
GainReport allocation_gain_beta(const BetaParams& prior);

// E[sqrt(P(1-P))] under the prior.
double mean_root_variance(const BetaParams& prior);

// Oracle trial count for one realization: eta * sqrt(p(1-p)) / E[sqrt(P(1-P))].
double oracle_trial_count(double p, const BetaParams& prior, double eta);

}  // namespace bstop
