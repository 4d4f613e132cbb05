#pragma once

#include <stdexcept>
#include <string>

namespace bstop {

// Which function of the Bernoulli parameter is being estimated.
enum class Estimand { P, LogP };

// Conjugate Beta(alpha, beta) state. Doubles as prior and posterior:
// observing k successes in m trials maps (a, b) to (a + k, b + m - k).
struct BetaParams {
    double alpha;
    double beta;

    BetaParams(double a, double b) : alpha(a), beta(b) {
        if (!(a > 0.0) || !(b > 0.0)) {
            throw std::invalid_argument("BetaParams: shape parameters must be positive");
        }
    }

    BetaParams posterior_after(long long successes, long long trials) const {
        if (trials < 0 || successes < 0 || successes > trials) {
            throw std::invalid_argument("BetaParams::posterior_after: need 0 <= k <= m");
        }
        return BetaParams(alpha + static_cast<double>(successes),
                          beta + static_cast<double>(trials - successes));
    }
};

// a / (a + b)
double beta_mean(const BetaParams& p);

// ab / ((a+b)^2 (a+b+1)). Equals the Bayes risk of the MMSE estimate of p.
double beta_variance(const BetaParams& p);

// psi(x) and psi'(x) for x > 0. Shift-up recurrence to x >= 10, then the
// Bernoulli-number asymptotic series; absolute error well under 1e-12 for
// x >= 1e-3.
double digamma(double x);
double trigamma(double x);

// Posterior moments of log p under Beta(a, b):
//   E[log P]   = psi(a) - psi(a+b)
//   Var[log P] = psi'(a) - psi'(a+b)
double logp_posterior_mean(const BetaParams& post);
double logp_posterior_var(const BetaParams& post);

// Bayes risk of stopping with the given posterior: posterior variance of the
// estimand (variance of P, or variance of log P).
double stop_risk(const BetaParams& post, Estimand estimand);

// log Beta(a, b)
double log_beta(double a, double b);

const char* estimand_name(Estimand e);
Estimand parse_estimand(const std::string& name);

}  // namespace bstop
