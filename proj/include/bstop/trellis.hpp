#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bstop/beta.hpp"

namespace bstop {

// Trellis node: k successes observed in m trials, 0 <= k <= m. All length-m
// observation sequences with k successes collapse onto one node.
struct NodeId {
    int k = 0;
    int m = 0;
    friend bool operator==(const NodeId& a, const NodeId& b) {
        return a.k == b.k && a.m == b.m;
    }
    friend bool operator<(const NodeId& a, const NodeId& b) {
        return a.m != b.m ? a.m < b.m : a.k < b.k;
    }
};

// Dense lower-triangular storage over nodes (k, m) with m in [0, depth].
template <typename T>
class TriArray {
public:
    explicit TriArray(int depth, T fill = T{})
        : depth_(depth),
          data_(static_cast<std::size_t>(depth + 1) * (depth + 2) / 2, fill) {}

    int depth() const { return depth_; }
    std::size_t size() const { return data_.size(); }

    T& at(int k, int m) { return data_[index(k, m)]; }
    const T& at(int k, int m) const { return data_[index(k, m)]; }

    static std::size_t index(int k, int m) {
        return static_cast<std::size_t>(m) * (m + 1) / 2 + k;
    }

private:
    int depth_;
    std::vector<T> data_;
};

// A stopping rule of depth d assigns a continuation probability q(k, m) to
// every node with m <= d. Structure:
//   - q is 1 on the continuation set and 0 elsewhere, except for at most one
//     stochastic-multiplexing node with fractional q (used to hit a mean-trial
//     budget exactly);
//   - every node at m == d stops, so no trajectory exceeds d trials.
// Continuation bits are stored one bit per node; evaluation streams level by
// level, which keeps deep rules (d in the thousands) cheap.
class StoppingRule {
public:
    explicit StoppingRule(int depth);

    int depth() const { return depth_; }

    double q(int k, int m) const;
    bool continues_surely(int k, int m) const;  // q == 1

    void set_continue(int k, int m, bool on = true);
    // Assigns a fractional q at one node. Well-formed rules carry at most one
    // such node; additional assignments are representable so that
    // validate_rule can reject them.
    void set_fractional(int k, int m, double q);
    void clear_fractional();
    std::optional<std::pair<NodeId, double>> fractional() const;  // first, if any
    std::size_t fractional_count() const { return fractional_.size(); }

    // Nodes with q > 0, sorted by (m, k); fractional nodes included.
    std::vector<std::pair<NodeId, double>> nonzero_nodes() const;
    std::size_t continue_count() const;

    friend bool operator==(const StoppingRule& a, const StoppingRule& b);

private:
    void check_interior(int k, int m) const;
    int depth_;
    std::vector<std::uint64_t> bits_;
    std::vector<std::size_t> word_off_;  // first word of each level
    std::vector<std::pair<NodeId, double>> fractional_;  // (m, k)-sorted
};

struct RuleMetrics {
    double expected_trials = 0.0;      // mean trial count under the prior
    double expected_bayes_risk = 0.0;  // leaf-weighted posterior variance
    Estimand estimand = Estimand::P;
};

// Streams the stopping process level by level. success_prob(k, m) gives the
// probability that the next trial succeeds from node (k, m); leaf(k, m, mass)
// receives every node where probability mass stops. Mass that reaches a
// fractional node splits between stopping and continuing.
template <class SuccessProb, class LeafFn>
void walk_leaves(const StoppingRule& rule, SuccessProb success_prob, LeafFn leaf) {
    const int d = rule.depth();
    std::vector<double> cur(1, 1.0);
    std::vector<double> next;
    for (int m = 0; m <= d; ++m) {
        next.assign(static_cast<std::size_t>(m) + 2, 0.0);
        bool flowing = false;
        for (int k = 0; k <= m; ++k) {
            const double u = cur[k];
            if (u <= 0.0) continue;
            const double qv = rule.q(k, m);
            if (qv < 1.0) leaf(k, m, u * (1.0 - qv));
            if (qv > 0.0) {
                const double s = success_prob(k, m);
                next[k + 1] += u * qv * s;
                next[k] += u * qv * (1.0 - s);
                flowing = true;
            }
        }
        if (!flowing) return;
        cur.swap(next);
    }
}

// Probability of reaching each node under the prior predictive. The returned
// array covers m in [0, depth]; deeper levels are structurally zero because
// every depth-d node stops.
TriArray<double> reach_probabilities(const StoppingRule& rule, const BetaParams& prior);

double expected_trials(const StoppingRule& rule, const BetaParams& prior);
double expected_bayes_risk(const StoppingRule& rule, const BetaParams& prior,
                           Estimand estimand);
// Both metrics in a single pass.
RuleMetrics evaluate_rule(const StoppingRule& rule, const BetaParams& prior,
                          Estimand estimand);

// Checks the structural invariants: q range, depth-d termination, at most one
// fractional node, and connectivity of {q > 0} from the root. Returns the
// first violation, or nullopt when the rule is well formed.
std::optional<std::string> validate_rule(const StoppingRule& rule);

// Parameter-free leaf decomposition of a rule. Along every root-to-leaf path
// the branch probabilities factor into p^k (1-p)^(m-k) times the product of
// continuation probabilities, so the probability of stopping at a leaf is
//   exp(log_weight + k ln p + (m-k) ln(1-p))
// for any true parameter p. Stored in logs because path counts overflow
// doubles for deep rules.
struct LeafProfile {
    struct Leaf {
        int k;
        int m;
        double log_weight;
    };
    std::vector<Leaf> leaves;
    int depth = 0;
};

LeafProfile leaf_profile(const StoppingRule& rule);
double leaf_mass(const LeafProfile::Leaf& leaf, double p);

// Versioned text serialization. q values round-trip bit-exactly.
struct DesignedRule {
    StoppingRule rule;
    BetaParams prior;
    Estimand estimand;
};

void save_rule(std::ostream& os, const DesignedRule& designed,
               const std::string& meta = "");
DesignedRule load_rule(std::istream& is);
void save_rule_file(const std::string& path, const DesignedRule& designed,
                    const std::string& meta = "");
DesignedRule load_rule_file(const std::string& path);

}  // namespace bstop
