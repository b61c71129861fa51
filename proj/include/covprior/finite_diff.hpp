#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace covprior::oracle {

// Per-coordinate step h_j = max(min_abs, rel * |x_j|). With bounds, h_j is
// also capped at 1% of the distance to the nearest bound.
struct StepPolicy {
    double rel = 1e-4;
    double min_abs = 1e-4;
    bool richardson = false;  // combine steps h and h/2 to cancel the O(h^2) term
    std::optional<std::vector<double>> lower;
    std::optional<std::vector<double>> upper;

    double step(std::size_t j, double xj) const;
};

using ScalarField = std::function<double(std::span<const double>)>;

Eigen::VectorXd finite_diff_gradient(const ScalarField& f, std::span<const double> x, const StepPolicy& policy = {});

/// Central-difference Hessian, symmetrized by averaging. Non-finite
/// evaluations throw DomainError.
Eigen::MatrixXd finite_diff_hessian(const ScalarField& f, std::span<const double> x, const StepPolicy& policy = {});

}  // namespace covprior::oracle
