#pragma once

namespace ren {

// Natural log of the gamma function, valid for x > 0.
double lgamma_fn(double x);

// Digamma psi(x) = d/dx lgamma(x), valid for x > 0.
double digamma(double x);

// Trigamma psi'(x), valid for x > 0.
double trigamma(double x);

// Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0.
double reg_lower_inc_gamma(double a, double x);

// Density of Gamma(concentration a, rate b) at x > 0.
double gamma_pdf(double a, double b, double x);

}  // namespace ren
