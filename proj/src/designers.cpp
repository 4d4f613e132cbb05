#include "bstop/designers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <tuple>

namespace bstop {

namespace {

double stop_risk_at(const BetaParams& prior, Estimand est, int k, int m) {
    const double a = prior.alpha + k;
    const double b = prior.beta + (m - k);
    if (est == Estimand::P) {
        const double s = a + b;
        return a * b / (s * s * (s + 1.0));
    }
    return trigamma(a) - trigamma(a + b);
}

int clamp_depth(long long d) {
    return static_cast<int>(std::clamp<long long>(d, 1, kMaxAutoDepth));
}

// Largest level at which any node still clears the threshold, plus one, so
// that the deepest continuing node has children inside the trellis.
int auto_depth_for_threshold(const BetaParams& prior, Estimand est, double min_gain) {
    int last = -1;
    for (int m = 0; m < kMaxAutoDepth; ++m) {
        if (max_risk_reduction_at_level(m, prior, est) >= min_gain) last = m;
    }
    return clamp_depth(static_cast<long long>(last) + 2);
}

int suggest_depth_for_budget(double eta) {
    return clamp_depth(std::max<long long>(static_cast<long long>(std::ceil(4.0 * eta)) + 8, 200));
}

bool touches_depth(const StoppingRule& rule) {
    const int m = rule.depth() - 1;
    for (int k = 0; k <= m; ++k) {
        if (rule.q(k, m) > 0.0) return true;
    }
    return false;
}

void prune_unreachable(StoppingRule& rule) {
    const int d = rule.depth();
    std::vector<char> cur(1, 1), next;
    for (int m = 0; m < d; ++m) {
        next.assign(static_cast<std::size_t>(m) + 2, 0);
        for (int k = 0; k <= m; ++k) {
            const double qv = rule.q(k, m);
            if (qv <= 0.0) continue;
            if (!cur[k]) {
                rule.set_continue(k, m, false);  // also drops a fractional entry
                continue;
            }
            next[k] = 1;
            next[k + 1] = 1;
        }
        cur.swap(next);
    }
}

void require_single_knob(const DesignConfig& cfg, const char* designer) {
    const int set = int(cfg.lagrange.has_value()) + int(cfg.budget.has_value()) +
                    int(cfg.min_gain.has_value());
    if (set != 1) {
        throw std::invalid_argument(std::string(designer) +
                                    ": exactly one of lagrange/budget/min_gain must be set");
    }
}

StoppingRule lift_to_depth(const StoppingRule& r, int depth) {
    if (depth == r.depth()) return r;
    StoppingRule out(depth);
    for (const auto& [node, qv] : r.nonzero_nodes()) {
        if (node.m >= depth) throw std::invalid_argument("lift_to_depth: rule too deep");
        if (qv == 1.0)
            out.set_continue(node.k, node.m);
        else
            out.set_fractional(node.k, node.m, qv);
    }
    return out;
}

}  // namespace

StoppingRule binomial_rule(int trials, int depth) {
    if (trials < 1) throw std::invalid_argument("binomial_rule: trials must be >= 1");
    if (depth == 0) depth = trials;
    if (depth < trials) throw std::invalid_argument("binomial_rule: depth must be >= trials");
    StoppingRule r(depth);
    for (int m = 0; m < trials; ++m) {
        for (int k = 0; k <= m; ++k) r.set_continue(k, m);
    }
    return r;
}

StoppingRule negbinomial_rule(int successes, int depth) {
    if (successes < 1) throw std::invalid_argument("negbinomial_rule: successes must be >= 1");
    StoppingRule r(depth);
    for (int m = 0; m < depth; ++m) {
        const int kmax = std::min(successes - 1, m);
        for (int k = 0; k <= kmax; ++k) r.set_continue(k, m);
    }
    return r;
}

double risk_reduction(NodeId node, const BetaParams& prior, Estimand estimand) {
    const double a = prior.alpha + node.k;
    const double b = prior.beta + (node.m - node.k);
    if (estimand == Estimand::P) {
        const double s = a + b;
        return a * b / (s * s * (s + 1.0) * (s + 1.0));
    }
    const double s = a + b;
    return b / (a * s * s);
}

double max_risk_reduction_at_level(int m, const BetaParams& prior, Estimand estimand) {
    if (estimand == Estimand::LogP) {
        return risk_reduction({0, m}, prior, estimand);  // decreasing in k
    }
    // (alpha+k)(beta+m-k) peaks where the posterior is most symmetric.
    const double kstar = 0.5 * (prior.beta - prior.alpha + m);
    double best = 0.0;
    for (int k : {static_cast<int>(std::floor(kstar)), static_cast<int>(std::ceil(kstar))}) {
        const int kc = std::clamp(k, 0, m);
        best = std::max(best, risk_reduction({kc, m}, prior, estimand));
    }
    return best;
}

StoppingRule design_threshold(const DesignConfig& cfg) {
    require_single_knob(cfg, "design_threshold");
    if (!cfg.min_gain) throw std::invalid_argument("design_threshold: min_gain required");
    const double dmin = *cfg.min_gain;
    if (!(dmin > 0.0)) throw std::invalid_argument("design_threshold: min_gain must be positive");
    const int d = cfg.depth > 0 ? cfg.depth
                                : auto_depth_for_threshold(cfg.prior, cfg.estimand, dmin);
    StoppingRule rule(d);
    std::vector<char> cur(1, 1), next;
    for (int m = 0; m < d; ++m) {
        next.assign(static_cast<std::size_t>(m) + 2, 0);
        bool any = false;
        for (int k = 0; k <= m; ++k) {
            if (!cur[k]) continue;
            if (risk_reduction({k, m}, cfg.prior, cfg.estimand) >= dmin) {
                rule.set_continue(k, m);
                next[k] = 1;
                next[k + 1] = 1;
                any = true;
            }
        }
        if (!any) break;
        cur.swap(next);
    }
    return rule;
}

StoppingRule design_dp(const DesignConfig& cfg, double* root_value) {
    require_single_knob(cfg, "design_dp");
    if (!cfg.lagrange) throw std::invalid_argument("design_dp: lagrange required");
    const double lambda = *cfg.lagrange;
    if (!(lambda > 0.0)) throw std::invalid_argument("design_dp: lagrange must be positive");
    const BetaParams& prior = cfg.prior;
    const Estimand est = cfg.estimand;

    const bool auto_d = cfg.depth == 0;
    int d = auto_d ? auto_depth_for_threshold(prior, est, lambda / 8.0) : cfg.depth;
    for (;;) {
        StoppingRule rule(d);
        std::vector<double> v_next(static_cast<std::size_t>(d) + 2, 0.0);
        std::vector<double> v_cur(static_cast<std::size_t>(d) + 2, 0.0);
        for (int k = 0; k <= d; ++k) v_next[k] = stop_risk_at(prior, est, k, d);
        for (int m = d - 1; m >= 0; --m) {
            const double denom = prior.alpha + prior.beta + m;
            for (int k = 0; k <= m; ++k) {
                const double rs = stop_risk_at(prior, est, k, m);
                // Branch ratios computed directly (not as 1 - s) and summed in
                // magnitude order keep the value bitwise symmetric in
                // k <-> m-k under a symmetric prior, so mirror nodes
                // tie-break identically.
                const double t_succ = (prior.alpha + k) / denom * v_next[k + 1];
                const double t_fail = (prior.beta + (m - k)) / denom * v_next[k];
                const double cont =
                    (std::min(t_succ, t_fail) + std::max(t_succ, t_fail)) + lambda;
                if (rs > cont) {
                    v_cur[k] = cont;
                    rule.set_continue(k, m);
                } else {
                    v_cur[k] = rs;
                }
            }
            v_cur.swap(v_next);
        }
        if (auto_d && touches_depth(rule) && d < kMaxAutoDepth) {
            d = clamp_depth(2LL * d);
            continue;
        }
        prune_unreachable(rule);
        if (root_value) *root_value = v_next[0];
        return rule;
    }
}

namespace {

// Incremental state for greedy growth. For the current continuation set T,
// tau/rho hold the expected further trials and eventual stopping risk from
// each node when following T; for nodes outside T they are 0 and the node's
// own stopping risk. The benefit-per-trial ratio of adding a reachable leaf
// depends only on its children's tau/rho, so the reach probability cancels
// and additions only require refreshing the ancestor cone.
class GreedyGrower {
public:
    GreedyGrower(const BetaParams& prior, Estimand est, int depth)
        : prior_(prior),
          est_(est),
          depth_(depth),
          rule_(depth),
          tau_(depth, 0.0),
          rho_(depth, 0.0),
          ratio_(depth, 0.0),
          state_(depth, 0) {
        for (int m = 0; m <= depth; ++m) {
            for (int k = 0; k <= m; ++k) rho_.at(k, m) = stop_risk_at(prior_, est_, k, m);
        }
        make_candidate(0, 0);
    }

    std::optional<NodeId> step() {
        while (!heap_.empty()) {
            const auto [r, m, k] = heap_.top();
            heap_.pop();
            if (state_.at(k, m) != 1 || ratio_.at(k, m) != r) continue;  // stale entry
            add(k, m);
            return NodeId{k, m};
        }
        return std::nullopt;
    }

    const StoppingRule& rule() const { return rule_; }

private:
    double success_prob(int k, int m) const {
        return (prior_.alpha + k) / (prior_.alpha + prior_.beta + m);
    }
    double failure_prob(int k, int m) const {
        return (prior_.beta + (m - k)) / (prior_.alpha + prior_.beta + m);
    }

    double candidate_ratio(int k, int m) const {
        const double s = success_prob(k, m);
        const double f = failure_prob(k, m);
        const double t_succ = s * rho_.at(k + 1, m + 1);
        const double t_fail = f * rho_.at(k, m + 1);
        const double risk_after = std::min(t_succ, t_fail) + std::max(t_succ, t_fail);
        const double u_succ = s * tau_.at(k + 1, m + 1);
        const double u_fail = f * tau_.at(k, m + 1);
        const double dtrials = 1.0 + (std::min(u_succ, u_fail) + std::max(u_succ, u_fail));
        return (risk_after - rho_.at(k, m)) / dtrials;
    }

    void make_candidate(int k, int m) {
        state_.at(k, m) = 1;
        const double r = candidate_ratio(k, m);
        ratio_.at(k, m) = r;
        heap_.push({r, m, k});
    }

    bool recompute_in_tree(int k, int m) {
        const double s = success_prob(k, m);
        const double f = failure_prob(k, m);
        const double u_succ = s * tau_.at(k + 1, m + 1);
        const double u_fail = f * tau_.at(k, m + 1);
        const double t = 1.0 + (std::min(u_succ, u_fail) + std::max(u_succ, u_fail));
        const double t_succ = s * rho_.at(k + 1, m + 1);
        const double t_fail = f * rho_.at(k, m + 1);
        const double r = std::min(t_succ, t_fail) + std::max(t_succ, t_fail);
        const bool moved = (t != tau_.at(k, m)) || (r != rho_.at(k, m));
        tau_.at(k, m) = t;
        rho_.at(k, m) = r;
        return moved;
    }

    void add(int k, int m) {
        state_.at(k, m) = 2;
        rule_.set_continue(k, m);
        recompute_in_tree(k, m);
        if (m + 1 < depth_) {
            if (state_.at(k, m + 1) == 0) make_candidate(k, m + 1);
            if (state_.at(k + 1, m + 1) == 0) make_candidate(k + 1, m + 1);
        }
        for (int l = m - 1; l >= 0; --l) {
            const int klo = std::max(0, k - (m - l));
            const int khi = std::min(l, k);
            bool moved = false;
            for (int kk = klo; kk <= khi; ++kk) {
                const auto st = state_.at(kk, l);
                if (st == 2) {
                    moved |= recompute_in_tree(kk, l);
                } else if (st == 1) {
                    const double r = candidate_ratio(kk, l);
                    if (r != ratio_.at(kk, l)) {
                        ratio_.at(kk, l) = r;
                        heap_.push({r, l, kk});
                    }
                }
            }
            if (!moved) break;
        }
    }

    BetaParams prior_;
    Estimand est_;
    int depth_;
    StoppingRule rule_;
    TriArray<double> tau_;
    TriArray<double> rho_;
    TriArray<double> ratio_;
    TriArray<std::uint8_t> state_;  // 0 untouched, 1 candidate leaf, 2 in the set
    using Entry = std::tuple<double, int, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap_;
};

}  // namespace

GreedyChain greedy_chain(const DesignConfig& cfg) {
    require_single_knob(cfg, "design_greedy");
    if (!cfg.budget) throw std::invalid_argument("design_greedy: budget required");
    const double eta = *cfg.budget;
    if (!(eta > 0.0)) throw std::invalid_argument("design_greedy: budget must be positive");
    if (cfg.depth > 0 && eta > cfg.depth) {
        throw std::invalid_argument("design_greedy: budget cannot exceed depth");
    }
    const bool auto_d = cfg.depth == 0;
    int d = auto_d ? suggest_depth_for_budget(eta) : cfg.depth;
    for (;;) {
        GreedyChain chain;
        chain.depth = d;
        GreedyGrower grower(cfg.prior, cfg.estimand, d);
        bool touched = false;
        for (;;) {
            const auto v = grower.step();
            if (!v) break;
            touched |= (v->m >= d - 1);
            const auto mm = evaluate_rule(grower.rule(), cfg.prior, cfg.estimand);
            chain.steps.push_back({*v, mm.expected_trials, mm.expected_bayes_risk});
            if (mm.expected_trials > eta) break;
        }
        if (auto_d && touched && d < kMaxAutoDepth) {
            d = clamp_depth(2LL * d);
            continue;
        }
        return chain;
    }
}

StoppingRule rule_from_chain_prefix(const GreedyChain& chain, std::size_t steps) {
    StoppingRule rule(chain.depth);
    for (std::size_t i = 0; i < steps && i < chain.steps.size(); ++i) {
        rule.set_continue(chain.steps[i].node.k, chain.steps[i].node.m);
    }
    return rule;
}

StoppingRule design_greedy(const DesignConfig& cfg) {
    const auto chain = greedy_chain(cfg);
    const double eta = *cfg.budget;
    std::size_t feasible = 0;
    for (std::size_t i = 0; i < chain.steps.size(); ++i) {
        if (chain.steps[i].expected_trials <= eta) feasible = i + 1;
    }
    return rule_from_chain_prefix(chain, feasible);
}

namespace {

using RuleScore = std::pair<double, double>;  // {budget metric, ordering metric}

StoppingRule match_budget_impl(const StoppingRule& lo, const StoppingRule& hi, double eta,
                               const std::function<RuleScore(const StoppingRule&)>& score) {
    if (lo.fractional() || hi.fractional()) {
        throw std::invalid_argument("match_budget: bracketing rules must be deterministic");
    }
    const int d = std::max(lo.depth(), hi.depth());
    StoppingRule cur = lift_to_depth(lo, d);
    const StoppingRule target = lift_to_depth(hi, d);
    for (const auto& [node, qv] : cur.nonzero_nodes()) {
        (void)qv;
        if (target.q(node.k, node.m) != 1.0) {
            throw std::invalid_argument("match_budget: rules are not nested");
        }
    }
    auto [h_cur, g_cur] = score(cur);
    const auto hi_score = score(target);
    const double tol = 1e-9 * (1.0 + std::abs(eta));
    if (eta < h_cur - tol || eta > hi_score.first + tol) {
        throw std::invalid_argument("match_budget: budget outside bracketing interval");
    }
    if (std::abs(eta - h_cur) <= tol) return cur;
    if (std::abs(eta - hi_score.first) <= tol) return target;

    std::vector<NodeId> remaining;
    for (const auto& [node, qv] : target.nonzero_nodes()) {
        (void)qv;
        if (cur.q(node.k, node.m) == 0.0) remaining.push_back(node);
    }
    std::sort(remaining.begin(), remaining.end());

    while (!remaining.empty() && std::abs(h_cur - eta) > tol) {
        std::size_t best = remaining.size();
        double best_ratio = std::numeric_limits<double>::infinity();
        RuleScore best_score{0, 0};
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            cur.set_continue(remaining[i].k, remaining[i].m);
            const auto sc = score(cur);
            cur.set_continue(remaining[i].k, remaining[i].m, false);
            const double dh = sc.first - h_cur;
            if (dh <= 1e-300) continue;  // not reachable yet
            const double ratio = (sc.second - g_cur) / dh;
            if (ratio < best_ratio) {  // remaining is (m, k)-sorted, first win breaks ties
                best_ratio = ratio;
                best = i;
                best_score = sc;
            }
        }
        if (best == remaining.size()) {
            throw std::logic_error("match_budget: no reachable bridging node");
        }
        const NodeId v = remaining[best];
        if (best_score.first <= eta + tol) {
            cur.set_continue(v.k, v.m);
            h_cur = best_score.first;
            g_cur = best_score.second;
            remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
        } else {
            const double theta =
                std::clamp((eta - h_cur) / (best_score.first - h_cur), 1e-15, 1.0 - 1e-15);
            cur.set_fractional(v.k, v.m, theta);
            return cur;
        }
    }
    return cur;
}

}  // namespace

StoppingRule match_budget(const StoppingRule& lo, const StoppingRule& hi, double eta,
                          const BetaParams& prior, Estimand estimand) {
    return match_budget_impl(lo, hi, eta, [&](const StoppingRule& r) {
        const auto mm = evaluate_rule(r, prior, estimand);
        return RuleScore{mm.expected_trials, mm.expected_bayes_risk};
    });
}

namespace {

// Shared bracketing driver for the threshold family. budget_of measures the
// mean trial count the budget is expressed in (prior or scene average).
BudgetMatchedRule threshold_budget_driver(
    const BetaParams& prior, Estimand estimand, double eta, int depth,
    const std::function<double(const StoppingRule&)>& budget_of,
    const std::function<RuleScore(const StoppingRule&)>& score) {
    if (!(eta >= 0.0)) throw std::invalid_argument("threshold budget: eta must be >= 0");
    const bool auto_d = depth == 0;
    int d = auto_d ? suggest_depth_for_budget(eta) : depth;
    if (!auto_d && eta > depth) {
        throw std::invalid_argument("threshold budget: budget cannot exceed depth");
    }
    const double tol = 1e-9 * (1.0 + eta);
    for (;;) {
        auto make = [&](double dmin) {
            DesignConfig c{prior, estimand, d, {}, {}, dmin};
            return design_threshold(c);
        };
        double delta_small_rule = risk_reduction({0, 0}, prior, estimand) * (1.0 + 1e-9);
        StoppingRule small_rule = make(delta_small_rule);  // stop at root
        double h_small = budget_of(small_rule);
        if (std::abs(h_small - eta) <= tol) return {small_rule, delta_small_rule};

        double delta_big = delta_small_rule;
        StoppingRule big_rule = small_rule;
        double h_big = h_small;
        int guard = 0;
        while (h_big < eta && delta_big > 1e-290 && guard++ < 500) {
            delta_big /= 8.0;
            big_rule = make(delta_big);
            h_big = budget_of(big_rule);
        }
        if (h_big < eta - tol) {
            if (auto_d && d < kMaxAutoDepth) {
                d = clamp_depth(2LL * d);
                continue;
            }
            throw std::invalid_argument("threshold budget: budget unreachable at this depth");
        }
        while (delta_small_rule / delta_big > 1.0 + 1e-13) {
            const double mid = std::sqrt(delta_small_rule * delta_big);
            StoppingRule rm = make(mid);
            const double hm = budget_of(rm);
            if (hm >= eta) {
                delta_big = mid;
                big_rule = std::move(rm);
                h_big = hm;
            } else {
                delta_small_rule = mid;
                small_rule = std::move(rm);
                h_small = hm;
            }
        }
        StoppingRule matched = (std::abs(h_small - eta) <= tol)
                                   ? small_rule
                                   : match_budget_impl(small_rule, big_rule, eta, score);
        if (auto_d && touches_depth(matched) && d < kMaxAutoDepth) {
            d = clamp_depth(2LL * d);
            continue;
        }
        return {std::move(matched), std::sqrt(delta_small_rule * delta_big)};
    }
}

}  // namespace

BudgetMatchedRule threshold_rule_for_budget(const BetaParams& prior, Estimand estimand,
                                            double eta, int depth) {
    auto budget_of = [&](const StoppingRule& r) { return expected_trials(r, prior); };
    auto score = [&](const StoppingRule& r) {
        const auto mm = evaluate_rule(r, prior, estimand);
        return RuleScore{mm.expected_trials, mm.expected_bayes_risk};
    };
    return threshold_budget_driver(prior, estimand, eta, depth, budget_of, score);
}

BudgetMatchedRule threshold_rule_for_values_budget(const BetaParams& prior,
                                                   Estimand estimand,
                                                   std::span<const double> values,
                                                   double eta, int depth) {
    if (values.empty()) {
        throw std::invalid_argument("threshold_rule_for_values_budget: empty value set");
    }
    std::map<double, std::size_t> distinct;
    for (double v : values) ++distinct[v];
    const double n = static_cast<double>(values.size());
    auto budget_of = [&](const StoppingRule& r) {
        const LeafProfile profile = leaf_profile(r);
        double s = 0.0;
        for (const auto& [p, count] : distinct) {
            double h = 0.0;
            for (const auto& leaf : profile.leaves) h += leaf_mass(leaf, p) * leaf.m;
            s += static_cast<double>(count) * h;
        }
        return s / n;
    };
    auto score = [&](const StoppingRule& r) {
        return RuleScore{budget_of(r), expected_bayes_risk(r, prior, estimand)};
    };
    return threshold_budget_driver(prior, estimand, eta, depth, budget_of, score);
}

BudgetMatchedRule dp_rule_for_budget(const BetaParams& prior, Estimand estimand,
                                     double eta, int depth, bool exact_budget) {
    if (!(eta >= 0.0)) throw std::invalid_argument("dp_rule_for_budget: eta must be >= 0");
    const bool auto_d = depth == 0;
    int d = auto_d ? suggest_depth_for_budget(eta) : depth;
    if (!auto_d && eta > depth) {
        throw std::invalid_argument("dp_rule_for_budget: budget cannot exceed depth");
    }
    const double tol = 1e-9 * (1.0 + eta);
    for (;;) {
        auto make = [&](double lam) {
            DesignConfig c{prior, estimand, d, lam, {}, {}};
            return design_dp(c);
        };
        double rr_max = 0.0;
        for (int m = 0; m < d; ++m) {
            rr_max = std::max(rr_max, max_risk_reduction_at_level(m, prior, estimand));
        }
        double lam_small = rr_max * (1.0 + 1e-9);  // stop at root
        StoppingRule small_rule = make(lam_small);
        double h_small = expected_trials(small_rule, prior);

        double lam_big = lam_small;
        StoppingRule big_rule = small_rule;
        double h_big = h_small;
        int guard = 0;
        while (h_big < eta && lam_big > 1e-290 && guard++ < 500) {
            lam_big /= 8.0;
            big_rule = make(lam_big);
            h_big = expected_trials(big_rule, prior);
        }
        if (h_big < eta - tol) {
            if (auto_d && d < kMaxAutoDepth) {
                d = clamp_depth(2LL * d);
                continue;
            }
            throw std::invalid_argument("dp_rule_for_budget: budget unreachable at this depth");
        }
        while (lam_small / lam_big > 1.0 + 1e-13) {
            const double mid = std::sqrt(lam_small * lam_big);
            StoppingRule rm = make(mid);
            const double hm = expected_trials(rm, prior);
            if (hm <= eta) {
                lam_small = mid;
                small_rule = std::move(rm);
                h_small = hm;
            } else {
                lam_big = mid;
                big_rule = std::move(rm);
                h_big = hm;
            }
        }
        StoppingRule result = small_rule;
        if (exact_budget && std::abs(h_small - eta) > tol) {
            result = match_budget(small_rule, big_rule, eta, prior, estimand);
        }
        if (auto_d && (touches_depth(result) || touches_depth(small_rule)) &&
            d < kMaxAutoDepth) {
            d = clamp_depth(2LL * d);
            continue;
        }
        return {std::move(result), lam_small};
    }
}

int negbinomial_depth_for_budget(int successes, const BetaParams& prior, double eta,
                                 int max_depth) {
    if (successes < 1) {
        throw std::invalid_argument("negbinomial_depth_for_budget: successes must be >= 1");
    }
    if (!(eta > 0.0)) throw std::invalid_argument("negbinomial_depth_for_budget: eta must be > 0");
    const double a = prior.alpha, b = prior.beta;
    std::vector<double> u(static_cast<std::size_t>(successes), 0.0), nu(u);
    u[0] = 1.0;
    double running = 1.0;  // P(k < successes after m trials)
    double h = 0.0;
    int best_d = 1;
    double best_err = std::numeric_limits<double>::infinity();
    for (int d = 1; d <= max_depth; ++d) {
        h += running;  // expected trials when truncated at depth d
        const double err = std::abs(h - eta);
        if (err < best_err) {
            best_err = err;
            best_d = d;
        }
        if (h > eta && err > best_err) break;
        const int m_prev = d - 1;
        const double denom = a + b + m_prev;
        std::fill(nu.begin(), nu.end(), 0.0);
        for (int k = 0; k < successes && k <= m_prev; ++k) {
            if (u[k] <= 0.0) continue;
            const double s = (a + k) / denom;
            nu[k] += u[k] * (1.0 - s);
            if (k + 1 < successes) nu[k + 1] += u[k] * s;
        }
        u.swap(nu);
        running = 0.0;
        for (double x : u) running += x;
        if (running <= 0.0) break;
    }
    return best_d;
}

bool binomial_optimality_test(int m_star) {
    if (m_star < 1) throw std::invalid_argument("binomial_optimality_test: m_star must be >= 1");
    const BetaParams uniform(1.0, 1.0);
    const double lhs = risk_reduction({0, m_star}, uniform, Estimand::P);
    const int k = (m_star + 1) / 2;
    const double rhs = risk_reduction({k, m_star + 1}, uniform, Estimand::P);
    return lhs >= rhs;
}

}  // namespace bstop
