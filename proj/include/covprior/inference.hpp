#pragma once

// Bayes machinery over LogDensityModel: gridded posteriors, marginal
// likelihoods, model posteriors over discrete or 1-D continuous families,
// and model averaging.
//
// Improper priors are allowed but tagged: every evidence computed from one
// is marked up_to_constant and model_posterior refuses it.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "covprior/geometry.hpp"
#include "covprior/quadrature.hpp"

namespace covprior::inference {

using geometry::LogDensityModel;
using geometry::Matrix;
using geometry::Vector;

// Observation set: one data point (of the model's data_dim) per entry.
using Dataset = std::vector<std::vector<double>>;

struct Prior {
    std::string name;
    std::function<double(const Vector&)> log_density;
    bool proper = true;  // false: known only up to a constant factor
};

struct Evidence {
    double log_value = 0.0;
    double rel_error = 0.0;
    bool up_to_constant = false;

    double value() const;
};

double log_likelihood(const LogDensityModel& model, const Dataset& data, const Vector& alpha);

/// Unnormalized Jeffreys prior; improper unless normalized below.
Prior jeffreys_prior(const LogDensityModel& model, const oracle::IntegrationSpec& spec = geometry::default_fisher_spec(),
                     bool richardson = false);

/// Jeffreys prior of a 1-D model normalized over [lo, hi] (finite).
Prior normalized_jeffreys_prior(const LogDensityModel& model, oracle::Interval range,
                                const oracle::IntegrationSpec& fisher_spec = geometry::default_fisher_spec(),
                                bool richardson = false);

struct GridAxis {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t points = 257;  // odd, for Simpson weights
};

struct GriddedPosterior {
    std::vector<Vector> grid;
    std::vector<double> cell_volume;  // quadrature weight of each point
    std::vector<double> log_unnorm;   // ln(L * prior) at each point
    double log_evidence = 0.0;
    bool up_to_constant = false;
    std::vector<std::string> warnings;

    /// Normalized posterior density at grid point i.
    double density(std::size_t i) const;
    /// Sum of density * cell_volume (1 up to rounding).
    double total_mass() const;
    Vector mean() const;
    Matrix covariance() const;
};

/// Posterior on a tensor grid with Simpson weights, accumulated in log space.
/// Throws EmptySupportError when every point has zero posterior.
GriddedPosterior posterior_on_grid(const LogDensityModel& model, const Prior& prior, const Dataset& data,
                                   const std::vector<GridAxis>& axes);

/// ∫ L(alpha) prior(alpha) d alpha over `domain` (defaults to the model
/// support). Throws EmptySupportError on a zero-width domain and
/// DivergenceError when the integral does not settle.
Evidence marginal_likelihood(const LogDensityModel& model, const Prior& prior, const Dataset& data,
                             const oracle::IntegrationSpec& spec = {}, const std::vector<oracle::Interval>& domain = {});

/// Evidence of an arbitrary log-integrand over a box, with max-shift scaling.
Evidence log_integral(const std::function<double(std::span<const double>)>& log_f,
                      const std::vector<oracle::Interval>& domain, const oracle::IntegrationSpec& spec,
                      bool up_to_constant = false);

struct EnsembleMember {
    std::string label;
    std::function<Evidence()> evidence;  // closure over the data
    double prior_weight = 0.0;
};

struct ModelEnsemble {
    std::vector<EnsembleMember> members;

    /// Labels unique, weights non-negative and summing to 1.
    void validate() const;
    /// Equal prior weights over the given members.
    static ModelEnsemble uniform(std::vector<std::string> labels, std::vector<std::function<Evidence()>> evidences);
};

struct ModelPosterior {
    std::vector<std::string> labels;
    std::vector<double> weights;
    std::vector<double> log_evidence;

    double weight(const std::string& label) const;
};

/// Posterior model probabilities proportional to Z_k * pi_k.
ModelPosterior model_posterior(const ModelEnsemble& ensemble);

/// Posterior over a continuous 1-D model index k on [lo, hi] (may be infinite).
class HyperPosterior1D {
public:
    HyperPosterior1D(std::function<Evidence(double)> evidence, std::function<double(double)> log_hyperprior,
                     oracle::Interval range, const oracle::IntegrationSpec& spec = {},
                     std::vector<double> breakpoints = {});

    double density(double k) const;
    double log_density(double k) const;
    /// ∫ g(k) p(k | x) dk.
    oracle::OracleEstimate expectation(const std::function<double(double)>& g) const;
    double log_normalizer() const { return log_norm_; }

private:
    double log_unnorm(double k) const;

    std::function<Evidence(double)> evidence_;
    std::function<double(double)> log_hyperprior_;
    oracle::Interval range_;
    oracle::IntegrationSpec spec_;
    std::vector<double> breakpoints_;
    double shift_ = 0.0;
    double log_norm_ = 0.0;
};

struct MomentSummary {
    Vector mean;
    Matrix covariance;
};

struct DensitySummary {
    std::vector<double> grid;
    std::vector<double> density;
};

/// Mixture moments: mean = Σ w_k mean_k, covariance by the law of total variance.
MomentSummary model_average(const std::vector<MomentSummary>& summaries, const ModelPosterior& weights);
/// Mixture density on a common grid.
DensitySummary model_average(const std::vector<DensitySummary>& summaries, const ModelPosterior& weights);

/// Total variation ½ ∫ |p - q| of two densities sampled on one grid (trapezoid rule).
double total_variation(const std::vector<double>& grid, const std::vector<double>& p, const std::vector<double>& q);

}  // namespace covprior::inference
