#pragma once

// Closed-form analyses of the classic prior paradoxes: the standardized
// Gaussian mean, the multinormal subset posterior, the multinomial cell
// count, the Stein and Neyman-Scott problems and the marginalization
// paradox. Everything is evaluated in log space; the hierarchical averages
// are also available as numerical quadratures for cross-checking.

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "covprior/inference.hpp"
#include "covprior/quadrature.hpp"

namespace covprior::casestudies {

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct CaseStudyReport {
    std::string scenario;
    std::vector<std::pair<std::string, double>> scalars;
    std::vector<Table> tables;
    std::map<std::string, std::string> provenance;

    /// Throws DomainError for an unknown name.
    double scalar(const std::string& name) const;
    const Table& table(const std::string& name) const;
};

// ---------------------------------------------------------------------------
// Gaussian model with standardized data (sample mean 0, biased sd 1)

/// Evidence of n standardized points under N(mu, sigma) with the 1/sigma
/// reference prior: Γ(n/2 - 1/2) / (2 sqrt(n^n π^(n-1))). Up to a constant.
inference::Evidence gauss_std_evidence_mu(int n);

/// Same data under N(lambda sigma, sigma) with the 1/(sqrt(2 + λ²) σ) prior:
/// K0(n/2) Γ(n/2 + 1) e^(n/2) / (n sqrt((nπ)^n)). Up to a constant.
inference::Evidence gauss_std_evidence_lambda(int n);

/// Joint posterior density of (mu, sigma).
double gauss_std_posterior_mu(int n, double mu, double sigma);
/// Joint posterior density of (lambda, sigma), built as likelihood x prior / evidence.
double gauss_std_posterior_lambda(int n, double lambda, double sigma);
/// The (mu, sigma) posterior carried to (lambda, sigma) by the change of variables mu = lambda sigma.
double gauss_std_posterior_mu_in_lambda(int n, double lambda, double sigma);

CaseStudyReport gauss_std_report(int n_min, int n_max);

// ---------------------------------------------------------------------------
// Multinormal: m measurands, n repetitions each, common unknown variance

struct MultinormalInput {
    int m = 1;
    int n = 2;
    double pooled_s2 = 1.0;
    std::vector<double> xbar;  // m sample means; empty means all zero
    int q = 1;
    double sigma0 = 1.0;
    double v_mu = 1.0;
};

/// Probability that a q-subset lies in the one-sd ball of its Student posterior with mn dof.
double credible_ball_probability(int q, int mn);

/// Marginal likelihood with the m sigma0^m / (V_mu sigma^(m+1)) prior, the
/// integration domain extended to R^m x R+. Defined for every mn >= 1.
inference::Evidence multinormal_evidence(const MultinormalInput& in);

/// Throws MomentUndefinedError when mn <= 2.
CaseStudyReport multinormal_summary(const MultinormalInput& in);

// ---------------------------------------------------------------------------
// Multinomial with an unknown number of cells

struct MultinomialInput {
    std::vector<int> counts;
    int m_max = 0;
};

/// ln Z(x | m) under the Jeffreys (Dirichlet 1/2) prior; void cells pad the observed ones.
double multinomial_log_evidence(const std::vector<int>& counts, int m);
/// (x_i + 1/2) / (n + m/2).
double multinomial_posterior_mean(const std::vector<int>& counts, std::size_t cell, int m);

/// Least-squares slope of ln Prob(m|x) against ln m over m in [m_lo, m_hi].
double loglog_slope(const std::vector<double>& m, const std::vector<double>& prob, double m_lo, double m_hi);
/// Tail exponent k from a fit ln P = c + k ln m + d/m over [m_lo, m_hi], removing the leading 1/m drift.
double asymptotic_exponent(const std::vector<double>& m, const std::vector<double>& prob, double m_lo, double m_hi);

CaseStudyReport multinomial_report(const MultinomialInput& in);

// ---------------------------------------------------------------------------
// Stein: m unit-variance observations x_i of means mu_i

struct SteinInput {
    std::vector<double> x;

    std::size_t m() const { return x.size(); }
    double xbar() const;
    double s_x2() const;     // biased sample variance
    double mean_sq() const;  // mean of x_i^2
};

struct FlatMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Posterior mean and variance of theta^2 under flat priors on every mu_i.
FlatMoments stein_flat_model_moments(const SteinInput& in);
/// Frequentist expectation of the flat-prior estimate given the true theta^2.
double stein_frequentist_mean(double theta2);

/// Hyper-posterior density of the Gaussian-prior model (b, a).
double stein_hyper_posterior(double b, double a, double xbar, double s_x2, int m);
double stein_log_hyper_posterior(double b, double a, double xbar, double s_x2, int m);

/// ∫ N(x|mu,1) N(mu|b,a) dmu.
double stein_marginal_likelihood(double x, double b, double a);

struct ConditionalMoments {
    double mean = 0.0;
    double variance = 0.0;
    double second_moment = 0.0;
};
/// Posterior of mu_i given one model (b, a).
ConditionalMoments stein_conditional(double x_i, double b, double a);

/// Uniform prior on [b - sqrt(3) a, b + sqrt(3) a], for comparison experiments only.
double stein_gate_prior(double mu, double b, double a);

/// Model-averaged E(mu_i).
double stein_averaged_mu(double x_i, double xbar, double s_x2, int m);
/// Model-averaged E(mu_i^2).
double stein_averaged_mu2(double x_i, double xbar, double s_x2, int m);
/// Model-averaged E(theta^2) = 1 + mean_sq + 2A/B.
double stein_averaged_theta2(double mean_sq, double s_x2, int m);

/// ∫∫ g(b, a) p(b, a | xbar, s_x2) db da by adaptive quadrature.
oracle::OracleEstimate stein_average_numeric(const std::function<double(double, double)>& g, double xbar,
                                             double s_x2, int m, const oracle::IntegrationSpec& spec = {});

/// m = 1: the posterior of mu averaged over the hyper-posterior, by quadrature.
double stein_averaged_density_m1(double mu, double x, const oracle::IntegrationSpec& spec = {});

CaseStudyReport stein_report(const SteinInput& in);

// ---------------------------------------------------------------------------
// Neyman-Scott: m pairs, common variance zeta

struct NeymanScottInput {
    int m = 3;
    double s2 = 1.0;
    std::vector<double> xbar;  // carried for completeness; results depend on s2 only
};

/// ln Z(xbar, s2 | zeta0) for the model with zeta > zeta0.
double neyman_scott_log_evidence(double zeta0, int m, double s2);
/// E(zeta | zeta0), m >= 2.
double neyman_scott_conditional_mean(double zeta0, int m, double s2);
/// Normalized posterior density of zeta0 under the 1/zeta0 hyper-prior.
double neyman_scott_zeta0_density(double zeta0, int m, double s2);
/// Posterior density of zeta for the zeta0 = 0 model.
double neyman_scott_flat_density(double zeta, int m, double s2);
/// E(zeta) = 2 m s2 / (m - 2), m >= 3.
double neyman_scott_averaged_mean(int m, double s2);
/// E(zeta | zeta0) averaged over the zeta0 posterior by quadrature in ln zeta0.
/// Finite-difference-free but heavy-tailed at m = 3, hence the 1e-8 default.
oracle::OracleEstimate neyman_scott_averaged_mean_numeric(
    int m, double s2, const oracle::IntegrationSpec& spec = {oracle::Scheme::AdaptiveQuadrature, 1e-13, 1e-8});
/// Argmax of the zeta0 posterior (grid scan plus golden-section refinement).
double neyman_scott_zeta0_mode(int m, double s2);

CaseStudyReport neyman_scott_report(const NeymanScottInput& in, const std::vector<double>& zeta0_grid);

// ---------------------------------------------------------------------------
// Marginalization paradox: s2 alone with the 1/zeta prior

double marginalization_posterior(double zeta, int m, double s2);
double marginalization_mean(int m, double s2);      // m >= 3
double marginalization_variance(int m, double s2);  // m >= 5

CaseStudyReport marginalization_report(int m, double s2);

}  // namespace covprior::casestudies
