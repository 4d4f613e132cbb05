#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bstop/beta.hpp"
#include "bstop/trellis.hpp"

namespace bstop {

// Upper bound on automatically chosen trellis depths.
inline constexpr int kMaxAutoDepth = 10000;

struct DesignConfig {
    BetaParams prior{1.0, 1.0};
    Estimand estimand = Estimand::P;
    int depth = 0;  // 0 picks a depth large enough for the rule to self-truncate

    // Exactly one of these selects the designer's knob.
    std::optional<double> lagrange;  // risk reduction required per trial
    std::optional<double> budget;    // mean trial budget
    std::optional<double> min_gain;  // online threshold on the risk reduction
};

// Fixed number of trials: continue exactly while m < n.
StoppingRule binomial_rule(int trials, int depth = 0);

// Stop at the given number of successes, truncated at depth: continue exactly
// while k < successes and m < depth. successes == 1 is the geometric rule.
StoppingRule negbinomial_rule(int successes, int depth);

// Expected Bayes-risk reduction from taking one more trial at a node whose
// posterior is prior updated by (k, m). Strictly positive.
double risk_reduction(NodeId node, const BetaParams& prior, Estimand estimand);

// Largest risk reduction over k at a fixed level m.
double max_risk_reduction_at_level(int m, const BetaParams& prior, Estimand estimand);

// Online rule: continue exactly where risk_reduction >= min_gain, intersected
// with reachability and m < depth.
StoppingRule design_threshold(const DesignConfig& cfg);

// Backward induction minimizing g + lagrange * h over all strategies in the
// depth-d trellis. Optimal for the relaxed objective. Unreachable continue
// decisions are pruned so the result is a connected rule.
StoppingRule design_dp(const DesignConfig& cfg, double* root_value = nullptr);

// Grows the continuation set from the root, always adding the reachable leaf
// with the best risk reduction per added trial, until the budget would be
// exceeded. Returns the last feasible deterministic rule.
StoppingRule design_greedy(const DesignConfig& cfg);

struct GreedyStep {
    NodeId node;
    double expected_trials;
    double expected_bayes_risk;
};
struct GreedyChain {
    int depth = 0;
    std::vector<GreedyStep> steps;  // cumulative metrics after each addition
};
// The full greedy growth sequence up to the first step exceeding the budget.
// The budget only decides where the chain stops, so any prefix is the greedy
// rule for its own trial count.
GreedyChain greedy_chain(const DesignConfig& cfg);
StoppingRule rule_from_chain_prefix(const GreedyChain& chain, std::size_t steps);

// Exact mean-trial matching between two nested rules of the same family.
// Bridges lo -> hi one node at a time (best ratio first) and gives the final
// node the fractional continuation probability that makes expected_trials
// equal eta; h is affine in that single q, so the solve is exact.
StoppingRule match_budget(const StoppingRule& lo, const StoppingRule& hi, double eta,
                          const BetaParams& prior, Estimand estimand = Estimand::P);

struct BudgetMatchedRule {
    StoppingRule rule;
    double knob = 0.0;  // converged min_gain (threshold family) or lagrange (DP family)
};

// Threshold family member with expected_trials == eta under the prior
// (bisection on min_gain plus single-node multiplexing at the jump).
BudgetMatchedRule threshold_rule_for_budget(const BetaParams& prior, Estimand estimand,
                                            double eta, int depth = 0);

// Same, but the budget is the average trial count over a finite set of true
// parameter values (e.g. the pixels of a scene) instead of the prior.
BudgetMatchedRule threshold_rule_for_values_budget(const BetaParams& prior,
                                                   Estimand estimand,
                                                   std::span<const double> values,
                                                   double eta, int depth = 0);

// Deterministic DP-family rule at the given budget: the largest achievable
// expected_trials <= eta, found by bisection on the Lagrange multiplier. With
// exact_budget, the jump is bridged by match_budget so expected_trials == eta.
BudgetMatchedRule dp_rule_for_budget(const BetaParams& prior, Estimand estimand,
                                     double eta, int depth = 0,
                                     bool exact_budget = false);

// Smallest truncation depth whose negative-binomial rule has expected_trials
// closest to eta under the prior.
int negbinomial_depth_for_budget(int successes, const BetaParams& prior, double eta,
                                 int max_depth = 200000);

// Whether threshold-based termination can induce binomial sampling with
// m_star trials under a uniform prior: the risk reduction at (0, m_star) must
// be at least the best reduction one level deeper.
bool binomial_optimality_test(int m_star);

}  // namespace bstop
