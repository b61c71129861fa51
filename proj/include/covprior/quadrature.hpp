#pragma once

// Integration engines behind every expectation and evidence in the library.
//
// One-dimensional integrals use adaptive Gauss-Kronrod (10/21) with a global
// error heap; infinite ends are mapped onto a finite interval first:
//   [a, +inf)   x = a + t/(1-t)
//   (-inf, b]   x = b - t/(1-t)
//   (-inf,+inf) x = t/(1-t^2)
// Boxes are integrated by nesting the 1-D engine; simplices are mapped onto
// the unit box by stick breaking. Monte-Carlo runs use the counter-based RNG
// and are bit-reproducible for a fixed seed.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

namespace covprior::oracle {

enum class Scheme { AdaptiveQuadrature, MonteCarlo, ExactSum };

const char* to_string(Scheme s) noexcept;

struct IntegrationSpec {
    Scheme scheme = Scheme::AdaptiveQuadrature;
    double abs_tol = 1e-13;
    double rel_tol = 1e-10;
    std::size_t max_evals = 5'000'000;
    std::uint64_t seed = 0;

    /// Throws DomainError unless tolerances and max_evals are positive.
    void validate() const;
    /// Same spec with both tolerances multiplied by `factor`.
    IntegrationSpec tightened(double factor) const;
};

struct OracleEstimate {
    double value = 0.0;
    double error = 0.0;  // standard error (Monte-Carlo) or error bound (quadrature)
    std::size_t evals_used = 0;
    Scheme scheme = Scheme::AdaptiveQuadrature;
};

struct VectorEstimate {
    std::vector<double> value;
    std::vector<double> error;
    std::size_t evals_used = 0;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct Box {
    std::vector<Interval> axes;
    // Optional interior points per axis where the integrand changes character.
    std::vector<std::vector<double>> breakpoints;
};

// Probability simplex with `cells` coordinates; integration is with respect
// to Lebesgue measure on the first cells-1 coordinates.
struct Simplex {
    std::size_t cells = 0;
};

using Domain = std::variant<Box, Simplex>;

using ScalarIntegrand = std::function<double(double)>;
using VectorIntegrand = std::function<void(double, std::span<double>)>;
using PointIntegrand = std::function<double(std::span<const double>)>;
using PointVectorIntegrand = std::function<void(std::span<const double>, std::span<double>)>;

OracleEstimate integrate_1d(const ScalarIntegrand& f, Interval range, const IntegrationSpec& spec,
                            std::span<const double> breakpoints = {});

/// k-component integrand sharing one adaptive mesh. Converges when every
/// component's error is below max(abs_tol, rel_tol * max_c |I_c|).
VectorEstimate integrate_1d_vector(const VectorIntegrand& f, std::size_t k, Interval range,
                                   const IntegrationSpec& spec, std::span<const double> breakpoints = {});

VectorEstimate integrate_box_vector(const PointVectorIntegrand& f, std::size_t k, const Box& box,
                                    const IntegrationSpec& spec);

/// Scalar integral over a box or simplex with either quadrature or Monte-Carlo
/// (spec.max_evals draws). Throws IntegrationError when the error bound
/// exceeds the requested tolerance.
OracleEstimate integrate_nd(const PointIntegrand& f, const Domain& domain, const IntegrationSpec& spec);

}  // namespace covprior::oracle
