#pragma once

// Special-function kernel used by the closed-form analyses: log-gamma,
// incomplete gammas, the modified Bessel function K0, the Gauss
// hypergeometric function on [-1, 0] and the non-central chi-square density.
//
// All functions are pure and thread-safe. Domain violations throw
// covprior::DomainError.

#include <limits>

namespace covprior::specfun {

struct SpecFunResult {
    double value = 0.0;
    double est_abs_error = 0.0;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// ln Γ(x) for x > 0.
double log_gamma(double x);

/// Γ(x) for x > 0; overflows to +inf beyond x ≈ 171.6.
double gamma_fn(double x);

/// ln γ(a, x), the lower incomplete gamma ∫_0^x t^{a-1} e^{-t} dt.
/// Returns -inf at x = 0.
double log_lower_incomplete_gamma(double a, double x);

/// ln Γ(a, x), the upper incomplete gamma ∫_x^∞ t^{a-1} e^{-t} dt.
double log_upper_incomplete_gamma(double a, double x);

/// ln(γ(a, x) / x^a). Finite at x = 0 where it equals -ln a; lets callers
/// form ratios such as x^a / γ(a, x) without 0/0 as x → 0.
double log_lower_incomplete_gamma_scaled(double a, double x);

/// Regularized P(a, x) = γ(a, x) / Γ(a).
double regularized_lower_gamma(double a, double x);

/// Generalized incomplete gamma ∫_{z1}^{z2} t^{a-1} e^{-t} dt. z2 may be +inf.
double gen_incomplete_gamma(double a, double z1, double z2);
SpecFunResult gen_incomplete_gamma_with_error(double a, double z1, double z2);

/// Modified Bessel function of the second kind, order zero.
double bessel_k0(double x);
SpecFunResult bessel_k0_with_error(double x);

/// Gauss hypergeometric 2F1(a, b; c; z), restricted to z in [-1, 0].
double hyp2f1(double a, double b, double c, double z);
SpecFunResult hyp2f1_with_error(double a, double b, double c, double z);

/// Chi-square density with `dof` degrees of freedom at x > 0.
double chi2_pdf(double dof, double x);

/// Non-central chi-square density (Poisson mixture of central densities).
/// `noncentrality` is λ² (the sum of squared means).
double noncentral_chi2_pdf(int dof, double noncentrality, double x);
SpecFunResult noncentral_chi2_pdf_with_error(int dof, double noncentrality, double x);

}  // namespace covprior::specfun
