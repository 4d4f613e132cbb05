#include "bstop/beta.hpp"

#include <cmath>

namespace bstop {

double beta_mean(const BetaParams& p) {
    return p.alpha / (p.alpha + p.beta);
}

double beta_variance(const BetaParams& p) {
    const double s = p.alpha + p.beta;
    return p.alpha * p.beta / (s * s * (s + 1.0));
}

double digamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("digamma: argument must be positive");
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    // psi(x) ~ ln x - 1/(2x) - sum_n B_{2n} / (2n x^{2n}); truncated after the
    // x^-12 term the remainder is below 1e-15 for x >= 10.
    const double v = 1.0 / (x * x);
    const double series =
        v * (1.0 / 12.0 -
             v * (1.0 / 120.0 -
                  v * (1.0 / 252.0 -
                       v * (1.0 / 240.0 - v * (1.0 / 132.0 - v * (691.0 / 32760.0))))));
    return acc + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("trigamma: argument must be positive");
    double acc = 0.0;
    while (x < 10.0) {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double v = inv * inv;
    // psi'(x) ~ 1/x + 1/(2x^2) + sum_n B_{2n} / x^{2n+1}
    const double series =
        1.0 + 0.5 * inv +
        v * (1.0 / 6.0 -
             v * (1.0 / 30.0 -
                  v * (1.0 / 42.0 -
                       v * (1.0 / 30.0 - v * (5.0 / 66.0 - v * (691.0 / 2730.0))))));
    return acc + inv * series;
}

double logp_posterior_mean(const BetaParams& post) {
    return digamma(post.alpha) - digamma(post.alpha + post.beta);
}

double logp_posterior_var(const BetaParams& post) {
    return trigamma(post.alpha) - trigamma(post.alpha + post.beta);
}

double stop_risk(const BetaParams& post, Estimand estimand) {
    return estimand == Estimand::P ? beta_variance(post) : logp_posterior_var(post);
}

double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

const char* estimand_name(Estimand e) {
    return e == Estimand::P ? "p" : "logp";
}

Estimand parse_estimand(const std::string& name) {
    if (name == "p" || name == "P") return Estimand::P;
    if (name == "logp" || name == "log_p" || name == "LOGP") return Estimand::LogP;
    throw std::invalid_argument("unknown estimand: " + name);
}

}  // namespace bstop
