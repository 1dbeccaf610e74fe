#pragma once

namespace ccgm {

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed
/// directly (no cancellation) in the tail.
double gamma_q(double a, double x);
/// Upper tail probability of a chi-square variate with `df` degrees of
/// freedom. df == 0 (a saturated comparison) yields 1.
double chi2_sf(double x, double df);

}  // namespace ccgm
