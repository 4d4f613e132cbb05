#pragma once

#include <functional>

#include "bstop/beta.hpp"

namespace bstop {

// Adaptive Gauss-Kronrod (G7, K15) on a finite interval, absolute tolerance.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-10, int max_depth = 48);

// E[f(P)] for P ~ Beta(a, b). Integrable endpoint singularities (a < 1 or
// b < 1) are removed exactly by a power substitution before integrating.
double beta_expectation(const std::function<double(double)>& f, const BetaParams& prior,
                        double abs_tol = 1e-10);

// Same expectation on a fixed 2048-point composite Gauss-Legendre grid. Used
// where the integrand is an exact trellis polynomial and the quadrature must
// not dominate the error budget.
double beta_expectation_fixed(const std::function<double(double)>& f,
                              const BetaParams& prior);

}  // namespace bstop
