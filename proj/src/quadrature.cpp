#include "bstop/quadrature.hpp"

#include <cmath>

namespace bstop {

namespace {

// Kronrod-15 abscissae (positive half) and weights; the embedded Gauss-7 rule
// uses the odd-indexed abscissae.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

double gk15(const std::function<double(double)>& f, double a, double b, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double result_gauss = fc * kWg[3];
    double result_kronrod = fc * kWgk[7];
    for (int j = 0; j < 7; ++j) {
        const double x = h * kXgk[j];
        const double fsum = f(c - x) + f(c + x);
        result_kronrod += fsum * kWgk[j];
        if (j % 2 == 1) result_gauss += fsum * kWg[(j - 1) / 2];
    }
    err = std::abs((result_kronrod - result_gauss) * h);
    return result_kronrod * h;
}

double adaptive(const std::function<double(double)>& f, double a, double b,
                double tol, int depth) {
    double err = 0.0;
    const double val = gk15(f, a, b, err);
    if (err <= tol || depth <= 0 || !(b - a > 1e-15 * (std::abs(a) + 1.0))) return val;
    const double c = 0.5 * (a + b);
    return adaptive(f, a, c, 0.5 * tol, depth - 1) +
           adaptive(f, c, b, 0.5 * tol, depth - 1);
}

// Gauss-Legendre 16 (positive half).
constexpr double kGl16X[8] = {
    0.0950125098376374401853193, 0.2816035507792589132304605,
    0.4580167776572273863424194, 0.6178762444026437484466718,
    0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542};
constexpr double kGl16W[8] = {
    0.1894506104550684962853967, 0.1826034150449235888667637,
    0.1691565193950025381893121, 0.1495959888165767320815017,
    0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806};

double composite_gl16(const std::function<double(double)>& f, double a, double b,
                      int panels) {
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double c = a + (p + 0.5) * h;
        double s = 0.0;
        for (int j = 0; j < 8; ++j) {
            const double x = 0.5 * h * kGl16X[j];
            s += kGl16W[j] * (f(c - x) + f(c + x));
        }
        total += 0.5 * h * s;
    }
    return total;
}

// Builds the two half-interval integrands for E[f(P)] under Beta(a, b), with a
// power substitution p = (1/2) t^{1/a} (resp. mirrored) whenever the endpoint
// density exponent would otherwise be singular. Each returned integrand is
// smooth on (0, 1] and already carries the Beta normalization.
struct HalfIntegrand {
    std::function<double(double)> g;  // integrand over t in (0, 1)
};

HalfIntegrand left_half(const std::function<double(double)>& f, double a, double b,
                        double log_b_norm) {
    HalfIntegrand out;
    if (a < 1.0) {
        const double scale = std::exp(a * std::log(0.5) - std::log(a) - log_b_norm);
        out.g = [f, a, b, scale](double t) {
            const double p = 0.5 * std::pow(t, 1.0 / a);
            return scale * f(p) * std::exp((b - 1.0) * std::log1p(-p));
        };
    } else {
        const double lb = log_b_norm;
        out.g = [f, a, b, lb](double t) {
            const double p = 0.5 * t;
            const double logw = (a - 1.0) * std::log(p) + (b - 1.0) * std::log1p(-p) - lb;
            return 0.5 * f(p) * std::exp(logw);
        };
    }
    return out;
}

HalfIntegrand right_half(const std::function<double(double)>& f, double a, double b,
                         double log_b_norm) {
    HalfIntegrand out;
    if (b < 1.0) {
        const double scale = std::exp(b * std::log(0.5) - std::log(b) - log_b_norm);
        out.g = [f, a, b, scale](double t) {
            const double q = 0.5 * std::pow(t, 1.0 / b);
            return scale * f(1.0 - q) * std::exp((a - 1.0) * std::log1p(-q));
        };
    } else {
        const double lb = log_b_norm;
        out.g = [f, a, b, lb](double t) {
            const double q = 0.5 * t;
            const double logw = (a - 1.0) * std::log1p(-q) + (b - 1.0) * std::log(q) - lb;
            return 0.5 * f(1.0 - q) * std::exp(logw);
        };
    }
    return out;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol, int max_depth) {
    if (!(b > a)) return 0.0;
    return adaptive(f, a, b, abs_tol, max_depth);
}

double beta_expectation(const std::function<double(double)>& f, const BetaParams& prior,
                        double abs_tol) {
    const double lb = log_beta(prior.alpha, prior.beta);
    const auto left = left_half(f, prior.alpha, prior.beta, lb);
    const auto right = right_half(f, prior.alpha, prior.beta, lb);
    return integrate(left.g, 0.0, 1.0, 0.5 * abs_tol) +
           integrate(right.g, 0.0, 1.0, 0.5 * abs_tol);
}

double beta_expectation_fixed(const std::function<double(double)>& f,
                              const BetaParams& prior) {
    const double lb = log_beta(prior.alpha, prior.beta);
    const auto left = left_half(f, prior.alpha, prior.beta, lb);
    const auto right = right_half(f, prior.alpha, prior.beta, lb);
    return composite_gl16(left.g, 0.0, 1.0, 64) + composite_gl16(right.g, 0.0, 1.0, 64);
}

}  // namespace bstop
