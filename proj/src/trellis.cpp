#include "bstop/trellis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace bstop {

StoppingRule::StoppingRule(int depth) : depth_(depth) {
    if (depth < 1) throw std::invalid_argument("StoppingRule: depth must be >= 1");
    word_off_.resize(depth + 1);
    std::size_t words = 0;
    for (int m = 0; m <= depth; ++m) {
        word_off_[m] = words;
        words += static_cast<std::size_t>(m / 64) + 1;
    }
    bits_.assign(words, 0);
}

void StoppingRule::check_interior(int k, int m) const {
    if (m < 0 || m >= depth_ || k < 0 || k > m) {
        throw std::out_of_range("StoppingRule: continuation node out of range");
    }
}

double StoppingRule::q(int k, int m) const {
    if (m < 0 || m > depth_ || k < 0 || k > m) return 0.0;
    for (const auto& [node, qv] : fractional_) {
        if (node.k == k && node.m == m) return qv;
    }
    if (m == depth_) return 0.0;
    return (bits_[word_off_[m] + k / 64] >> (k % 64)) & 1u ? 1.0 : 0.0;
}

bool StoppingRule::continues_surely(int k, int m) const { return q(k, m) == 1.0; }

void StoppingRule::set_continue(int k, int m, bool on) {
    check_interior(k, m);
    std::erase_if(fractional_,
                  [&](const auto& e) { return e.first.k == k && e.first.m == m; });
    auto& w = bits_[word_off_[m] + k / 64];
    const std::uint64_t bit = 1ull << (k % 64);
    if (on)
        w |= bit;
    else
        w &= ~bit;
}

void StoppingRule::set_fractional(int k, int m, double q) {
    check_interior(k, m);
    if (!(q > 0.0) || !(q < 1.0)) {
        throw std::invalid_argument("StoppingRule: fractional q must lie in (0,1)");
    }
    set_continue(k, m, false);
    fractional_.push_back({{k, m}, q});
    std::sort(fractional_.begin(), fractional_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
}

void StoppingRule::clear_fractional() { fractional_.clear(); }

std::optional<std::pair<NodeId, double>> StoppingRule::fractional() const {
    if (fractional_.empty()) return std::nullopt;
    return fractional_.front();
}

std::vector<std::pair<NodeId, double>> StoppingRule::nonzero_nodes() const {
    std::vector<std::pair<NodeId, double>> out;
    for (int m = 0; m < depth_; ++m) {
        for (int k = 0; k <= m; ++k) {
            const double v = q(k, m);
            if (v > 0.0) out.push_back({{k, m}, v});
        }
    }
    return out;
}

std::size_t StoppingRule::continue_count() const {
    std::size_t n = 0;
    for (auto w : bits_) n += static_cast<std::size_t>(__builtin_popcountll(w));
    return n;
}

bool operator==(const StoppingRule& a, const StoppingRule& b) {
    return a.depth_ == b.depth_ && a.bits_ == b.bits_ && a.fractional_ == b.fractional_;
}

TriArray<double> reach_probabilities(const StoppingRule& rule, const BetaParams& prior) {
    const int d = rule.depth();
    TriArray<double> u(d, 0.0);
    u.at(0, 0) = 1.0;
    const double a = prior.alpha, b = prior.beta;
    for (int m = 0; m < d; ++m) {
        const double denom = a + b + m;
        for (int k = 0; k <= m; ++k) {
            const double mass = u.at(k, m) * rule.q(k, m);
            if (mass <= 0.0) continue;
            u.at(k + 1, m + 1) += mass * (a + k) / denom;
            u.at(k, m + 1) += mass * (b + m - k) / denom;
        }
    }
    return u;
}

namespace detail {

struct PredictiveBranch {
    double a, b;
    double operator()(int k, int m) const { return (a + k) / (a + b + m); }
};

}  // namespace detail

RuleMetrics evaluate_rule(const StoppingRule& rule, const BetaParams& prior,
                          Estimand estimand) {
    RuleMetrics out;
    out.estimand = estimand;
    double h = 0.0, g = 0.0;
    walk_leaves(rule, detail::PredictiveBranch{prior.alpha, prior.beta},
                [&](int k, int m, double w) {
                    h += w * m;
                    g += w * stop_risk(prior.posterior_after(k, m), estimand);
                });
    out.expected_trials = h;
    out.expected_bayes_risk = g;
    return out;
}

double expected_trials(const StoppingRule& rule, const BetaParams& prior) {
    double h = 0.0;
    walk_leaves(rule, detail::PredictiveBranch{prior.alpha, prior.beta},
                [&](int /*k*/, int m, double w) { h += w * m; });
    return h;
}

double expected_bayes_risk(const StoppingRule& rule, const BetaParams& prior,
                           Estimand estimand) {
    return evaluate_rule(rule, prior, estimand).expected_bayes_risk;
}

std::optional<std::string> validate_rule(const StoppingRule& rule) {
    const int d = rule.depth();
    int fractional_count = 0;
    for (int m = 0; m <= d; ++m) {
        for (int k = 0; k <= m; ++k) {
            const double v = rule.q(k, m);
            if (v < 0.0 || v > 1.0) {
                return "q out of [0,1] at (" + std::to_string(k) + "," +
                       std::to_string(m) + ")";
            }
            if (m == d && v != 0.0) {
                return "node at maximum depth must stop: (" + std::to_string(k) + "," +
                       std::to_string(m) + ")";
            }
            if (v > 0.0 && v < 1.0) ++fractional_count;
        }
    }
    if (fractional_count > 1) {
        return "more than one stochastic-multiplexing node (" +
               std::to_string(fractional_count) + " fractional q values)";
    }
    // Connectivity: every q > 0 node must be reachable from the root through
    // q > 0 ancestors.
    std::vector<char> reach_cur(1, 1), reach_next;
    for (int m = 0; m <= d; ++m) {
        reach_next.assign(static_cast<std::size_t>(m) + 2, 0);
        for (int k = 0; k <= m; ++k) {
            const double v = rule.q(k, m);
            if (v > 0.0 && !reach_cur[k]) {
                return "disconnected continuation node (" + std::to_string(k) + "," +
                       std::to_string(m) + ")";
            }
            if (v > 0.0 && reach_cur[k]) {
                reach_next[k] = 1;
                reach_next[k + 1] = 1;
            }
        }
        reach_cur.swap(reach_next);
    }
    return std::nullopt;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

LeafProfile leaf_profile(const StoppingRule& rule) {
    const int d = rule.depth();
    LeafProfile out;
    out.depth = d;
    std::vector<double> cur(1, 0.0);  // log path weights, -inf where unreachable
    std::vector<double> next;
    for (int m = 0; m <= d; ++m) {
        next.assign(static_cast<std::size_t>(m) + 2, kNegInf);
        bool flowing = false;
        for (int k = 0; k <= m; ++k) {
            const double lw = cur[k];
            if (lw == kNegInf) continue;
            const double qv = rule.q(k, m);
            if (qv < 1.0) {
                out.leaves.push_back({k, m, lw + (qv > 0.0 ? std::log1p(-qv) : 0.0)});
            }
            if (qv > 0.0) {
                const double step = lw + (qv < 1.0 ? std::log(qv) : 0.0);
                next[k + 1] = log_add(next[k + 1], step);
                next[k] = log_add(next[k], step);
                flowing = true;
            }
        }
        if (!flowing) break;
        cur.swap(next);
    }
    return out;
}

double leaf_mass(const LeafProfile::Leaf& leaf, double p) {
    if (p <= 0.0) return leaf.k == 0 ? std::exp(leaf.log_weight) : 0.0;
    if (p >= 1.0) return leaf.k == leaf.m ? std::exp(leaf.log_weight) : 0.0;
    return std::exp(leaf.log_weight + leaf.k * std::log(p) +
                    (leaf.m - leaf.k) * std::log1p(-p));
}

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_rule(std::ostream& os, const DesignedRule& designed, const std::string& meta) {
    const auto nodes = designed.rule.nonzero_nodes();
    os << "bstop-rule 1\n";
    if (!meta.empty()) {
        std::istringstream lines(meta);
        std::string line;
        while (std::getline(lines, line)) os << "# " << line << "\n";
    }
    os << "depth " << designed.rule.depth() << "\n";
    os << "prior " << format_double(designed.prior.alpha) << " "
       << format_double(designed.prior.beta) << "\n";
    os << "estimand " << estimand_name(designed.estimand) << "\n";
    os << "nodes " << nodes.size() << "\n";
    for (const auto& [node, qv] : nodes) {
        os << node.k << " " << node.m << " " << format_double(qv) << "\n";
    }
}

DesignedRule load_rule(std::istream& is) {
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "bstop-rule" || version != 1) {
        throw std::runtime_error("rule file: bad header");
    }
    int depth = -1;
    double alpha = 0, beta = 0;
    std::string estimand_str;
    long long node_count = -1;
    std::string key;
    while (is >> key) {
        if (key == "#") {
            std::string rest;
            std::getline(is, rest);
            continue;
        }
        if (key == "depth") {
            is >> depth;
        } else if (key == "prior") {
            is >> alpha >> beta;
        } else if (key == "estimand") {
            is >> estimand_str;
        } else if (key == "nodes") {
            is >> node_count;
            break;
        } else {
            throw std::runtime_error("rule file: unknown field '" + key + "'");
        }
    }
    if (depth < 1 || node_count < 0 || estimand_str.empty()) {
        throw std::runtime_error("rule file: missing fields");
    }
    DesignedRule out{StoppingRule(depth), BetaParams(alpha, beta),
                     parse_estimand(estimand_str)};
    for (long long i = 0; i < node_count; ++i) {
        int k, m;
        double qv;
        if (!(is >> k >> m >> qv)) throw std::runtime_error("rule file: truncated node list");
        if (qv == 1.0)
            out.rule.set_continue(k, m);
        else
            out.rule.set_fractional(k, m, qv);
    }
    return out;
}

void save_rule_file(const std::string& path, const DesignedRule& designed,
                    const std::string& meta) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    save_rule(os, designed, meta);
}

DesignedRule load_rule_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    return load_rule(is);
}

}  // namespace bstop
