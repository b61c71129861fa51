#pragma once

// Ready-made sampling models for the geometry engine.

#include <cstddef>

#include "covprior/geometry.hpp"

namespace covprior::models {

/// N(x | mu, sigma) with sigma fixed; parameter (mu).
geometry::LogDensityModel gaussian_location(double sigma = 1.0);

/// N(x | mu, sigma); parameter (mu, sigma), sigma > 0.
geometry::LogDensityModel gaussian();

/// N(x | lambda sigma, sigma); parameter (lambda, sigma), the standardized mean.
geometry::LogDensityModel gaussian_standardized();

/// lambda e^{-lambda x} on x >= 0; parameter (lambda), lambda > 0.
geometry::LogDensityModel exponential_rate();

/// theta^x (1-theta)^{1-x} on x in {0, 1}; parameter (theta) in (0, 1).
geometry::LogDensityModel bernoulli();

/// Multinomial with `cells` cells and `trials` draws; parameter is the first
/// cells-1 cell probabilities (the last is one minus their sum). The data
/// space enumerates every count vector, so keep cells and trials small.
geometry::LogDensityModel multinomial(std::size_t cells, std::size_t trials = 1);

}  // namespace covprior::models
