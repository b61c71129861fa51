#include "covprior/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "covprior/errors.hpp"

namespace covprior::oracle {
namespace {

// Near a bound the step shrinks to this fraction of the remaining room, which
// keeps the truncation error of log-type singularities at the bound small.
constexpr double kBoundFraction = 0.01;

double checked(const ScalarField& f, std::span<const double> x) {
    const double v = f(x);
    if (!std::isfinite(v)) throw DomainError("finite difference: non-finite function value");
    return v;
}

Eigen::VectorXd gradient_with(const ScalarField& f, std::span<const double> x, const std::vector<double>& h) {
    const std::size_t p = x.size();
    std::vector<double> y(x.begin(), x.end());
    Eigen::VectorXd g(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
        y[j] = x[j] + h[j];
        const double fp = checked(f, y);
        y[j] = x[j] - h[j];
        const double fm = checked(f, y);
        y[j] = x[j];
        g(static_cast<Eigen::Index>(j)) = (fp - fm) / (2.0 * h[j]);
    }
    return g;
}

Eigen::MatrixXd hessian_with(const ScalarField& f, std::span<const double> x, const std::vector<double>& h) {
    const std::size_t p = x.size();
    std::vector<double> y(x.begin(), x.end());
    Eigen::MatrixXd H(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    const double f0 = checked(f, x);
    for (std::size_t i = 0; i < p; ++i) {
        y[i] = x[i] + h[i];
        const double fp = checked(f, y);
        y[i] = x[i] - h[i];
        const double fm = checked(f, y);
        y[i] = x[i];
        H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for (std::size_t j = i + 1; j < p; ++j) {
            double acc = 0.0;
            for (int si : {1, -1})
                for (int sj : {1, -1}) {
                    y[i] = x[i] + si * h[i];
                    y[j] = x[j] + sj * h[j];
                    acc += si * sj * checked(f, y);
                }
            y[i] = x[i];
            y[j] = x[j];
            const double v = acc / (4.0 * h[i] * h[j]);
            H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    }
    return 0.5 * (H + H.transpose());
}

std::vector<double> steps(const StepPolicy& policy, std::span<const double> x) {
    std::vector<double> h(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) h[j] = policy.step(j, x[j]);
    return h;
}

}  // namespace

double StepPolicy::step(std::size_t j, double xj) const {
    double h = std::max(min_abs, rel * std::fabs(xj));
    if (lower && j < lower->size() && std::isfinite((*lower)[j])) {
        const double room = xj - (*lower)[j];
        if (room <= 0.0) throw DomainError("finite difference: point on or below lower bound");
        h = std::min(h, kBoundFraction * room);
    }
    if (upper && j < upper->size() && std::isfinite((*upper)[j])) {
        const double room = (*upper)[j] - xj;
        if (room <= 0.0) throw DomainError("finite difference: point on or above upper bound");
        h = std::min(h, kBoundFraction * room);
    }
    return h;
}

Eigen::VectorXd finite_diff_gradient(const ScalarField& f, std::span<const double> x, const StepPolicy& policy) {
    const auto h = steps(policy, x);
    Eigen::VectorXd g = gradient_with(f, x, h);
    if (!policy.richardson) return g;
    std::vector<double> h2(h);
    for (double& v : h2) v *= 0.5;
    const Eigen::VectorXd g2 = gradient_with(f, x, h2);
    return (4.0 * g2 - g) / 3.0;
}

Eigen::MatrixXd finite_diff_hessian(const ScalarField& f, std::span<const double> x, const StepPolicy& policy) {
    const auto h = steps(policy, x);
    Eigen::MatrixXd H = hessian_with(f, x, h);
    if (!policy.richardson) return H;
    std::vector<double> h2(h);
    for (double& v : h2) v *= 0.5;
    const Eigen::MatrixXd H2 = hessian_with(f, x, h2);
    return (4.0 * H2 - H) / 3.0;
}

}  // namespace covprior::oracle
