#include "bstop/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "bstop/quadrature.hpp"

namespace bstop {

namespace {

double root_variance(double p) { return std::sqrt(p * (1.0 - p)); }

void check_params(const ParamSet& params) {
    if (params.values.empty()) throw std::invalid_argument("ParamSet: empty");
    for (double p : params.values) {
        if (!(p >= 0.0) || !(p <= 1.0)) {
            throw std::invalid_argument("ParamSet: values must lie in [0, 1]");
        }
    }
}

double gain_from_moments(double mean_pq, double mean_v) {
    if (!(mean_v > 0.0)) {
        throw std::invalid_argument("allocation gain: degenerate parameter set");
    }
    return mean_pq / (mean_v * mean_v);
}

GainReport report_from_gain(double gain) {
    GainReport r;
    r.gain_linear = gain;
    r.gain_db = 10.0 * std::log10(gain);
    return r;
}

}  // namespace

std::vector<double> oracle_allocation(const ParamSet& params, double eta) {
    check_params(params);
    if (!(eta > 0.0)) throw std::invalid_argument("oracle_allocation: eta must be positive");
    double total_v = 0.0;
    for (double p : params.values) total_v += root_variance(p);
    if (!(total_v > 0.0)) {
        throw std::invalid_argument("oracle_allocation: all parameters are degenerate");
    }
    const double scale = static_cast<double>(params.count()) * eta / total_v;
    std::vector<double> out;
    out.reserve(params.count());
    for (double p : params.values) out.push_back(scale * root_variance(p));
    return out;
}

GainReport allocation_gain_discrete(const ParamSet& params) {
    check_params(params);
    const double n = static_cast<double>(params.count());
    double sum_pq = 0.0, sum_v = 0.0;
    for (double p : params.values) {
        sum_pq += p * (1.0 - p);
        sum_v += root_variance(p);
    }
    auto r = report_from_gain(gain_from_moments(sum_pq / n, sum_v / n));
    r.allocations = oracle_allocation(params, 1.0);
    return r;
}

GainReport allocation_gain_empirical(const ParamSet& params) {
    check_params(params);
    const double n = static_cast<double>(params.count());
    double sum_pq = 0.0, sum_v = 0.0;
    for (double p : params.values) {
        sum_pq += p * (1.0 - p);
        sum_v += root_variance(p);
    }
    return report_from_gain(gain_from_moments(sum_pq / n, sum_v / n));
}

GainReport allocation_gain_beta(const BetaParams& prior) {
    const double mean_pq =
        beta_expectation([](double p) { return p * (1.0 - p); }, prior);
    const double mean_v = beta_expectation([](double p) { return root_variance(p); }, prior);
    return report_from_gain(gain_from_moments(mean_pq, mean_v));
}

double mean_root_variance(const BetaParams& prior) {
    return beta_expectation([](double p) { return root_variance(p); }, prior);
}

double oracle_trial_count(double p, const BetaParams& prior, double eta) {
    if (!(p > 0.0) || !(p < 1.0)) {
        throw std::invalid_argument("oracle_trial_count: p must lie in (0, 1)");
    }
    return eta * root_variance(p) / mean_root_variance(prior);
}

}  // namespace bstop
