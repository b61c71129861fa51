#pragma once

// Information geometry of parametric sampling models: Fisher information,
// the Jeffreys density, Hellinger and Kullback-Leibler divergences, and
// coordinate changes on parameter space.

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "covprior/quadrature.hpp"
#include "covprior/rng.hpp"

namespace covprior::geometry {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Bound {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool lo_closed = false;
    bool hi_closed = false;

    bool contains(double v) const;
};

struct ParamSupport {
    std::vector<Bound> bounds;
    // Extra joint constraint (e.g. the open simplex); empty means none.
    std::function<bool(const Vector&)> constraint;

    bool contains(const Vector& alpha) const;
};

// Data space integrated by adaptive quadrature over a box. `breakpoints`
// may suggest per-axis interior points for a given parameter.
struct QuadratureDomain {
    oracle::Box box;
    std::function<std::vector<std::vector<double>>(const Vector&)> breakpoints;
};

// Finite data space summed exactly.
struct DiscreteSupport {
    std::vector<std::vector<double>> points;
};

using DataSpace = std::variant<QuadratureDomain, DiscreteSupport>;

// Draws one data point x ~ p(x|alpha) into `out`.
using Sampler = std::function<void(oracle::CounterRng&, const Vector&, std::span<double>)>;

using LogDensity = std::function<double(std::span<const double>, const Vector&)>;

struct LogDensityModel {
    std::string name;
    std::size_t param_dim = 1;
    std::size_t data_dim = 1;
    LogDensity log_density;
    ParamSupport support;
    DataSpace data_space;
    Sampler sampler;  // optional; enables Monte-Carlo expectations

    /// Throws DomainError unless alpha has param_dim entries and lies in the support.
    void check_param(const Vector& alpha) const;
};

struct FisherMatrix {
    Vector at_param;
    Matrix matrix;
    // Largest absolute integration error over the entries.
    double error = 0.0;
};

struct Reparameterization {
    std::function<Vector(const Vector&)> forward;   // alpha -> beta
    std::function<Vector(const Vector&)> inverse;   // beta -> alpha
    std::function<Matrix(const Vector&)> jacobian;  // d alpha / d beta at beta; optional
    std::optional<ParamSupport> image_support;      // support in beta; default maps bounds coordinate-wise
};

/// Default settings for expectations of finite-difference integrands.
oracle::IntegrationSpec default_fisher_spec();

/// E_alpha[g(x)] for a k-valued g. The scheme follows spec.scheme, except
/// that discrete data spaces are always summed exactly.
oracle::VectorEstimate expectation(const LogDensityModel& model, const Vector& alpha, std::size_t k,
                                   const std::function<void(std::span<const double>, std::span<double>)>& g,
                                   const oracle::IntegrationSpec& spec);

/// -E[Hessian of ln p(x|alpha)], central differences with h = max(1e-4, 1e-4|alpha_j|).
FisherMatrix fisher_information(const LogDensityModel& model, const Vector& alpha,
                                const oracle::IntegrationSpec& spec = default_fisher_spec(), bool richardson = false);

/// E[score score^T], the outer-product form.
FisherMatrix fisher_information_score(const LogDensityModel& model, const Vector& alpha,
                                      const oracle::IntegrationSpec& spec = default_fisher_spec(),
                                      bool richardson = false);

/// Throws DegenerateMetricError when det J < 1e-12 (trace J / p)^p.
double log_det_checked(const Matrix& J);

/// 1/2 ln det J(alpha): the unnormalized log Jeffreys density.
double jeffreys_log_density(const LogDensityModel& model, const Vector& alpha,
                            const oracle::IntegrationSpec& spec = default_fisher_spec(), bool richardson = false);

/// ∫ (sqrt p(x|a2) - sqrt p(x|a1))^2 dx, in [0, 2].
double hellinger_sq_distance(const LogDensityModel& model, const Vector& a1, const Vector& a2,
                             const oracle::IntegrationSpec& spec = {});

/// ∫ p(x|a2) ln(p(x|a2) / p(x|a1)) dx.
double kl_divergence(const LogDensityModel& model, const Vector& a2, const Vector& a1,
                     const oracle::IntegrationSpec& spec = {});

/// Model in the new coordinates: log_density(x, beta) = original(x, inverse(beta)).
LogDensityModel reparameterize(const LogDensityModel& model, const Reparameterization& map);

/// d alpha / d beta at beta, analytic when supplied, otherwise by central differences.
Matrix reparam_jacobian(const Reparameterization& map, const Vector& beta);

}  // namespace covprior::geometry
