#include "covprior/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "covprior/errors.hpp"
#include "covprior/finite_diff.hpp"
#include "covprior/montecarlo.hpp"

namespace covprior::geometry {
namespace {

using DataFn = std::function<void(std::span<const double>, std::span<double>)>;

Vector to_vector(std::span<const double> s) {
    Vector v(static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) v(static_cast<Eigen::Index>(i)) = s[i];
    return v;
}

// ∫ h(x) dx over the data space (or Σ_x h(x) for discrete spaces), with
// breakpoints collected from every parameter in `hints`.
oracle::VectorEstimate integrate_data(const LogDensityModel& model, std::size_t k, const DataFn& h,
                                      const oracle::IntegrationSpec& spec, const std::vector<Vector>& hints) {
    if (const auto* disc = std::get_if<DiscreteSupport>(&model.data_space)) {
        oracle::VectorEstimate out;
        out.value.assign(k, 0.0);
        out.error.assign(k, 0.0);
        std::vector<double> buf(k);
        for (const auto& x : disc->points) {
            h(x, buf);
            for (std::size_t c = 0; c < k; ++c) {
                out.value[c] += buf[c];
                out.error[c] += 4.0 * std::numeric_limits<double>::epsilon() * std::fabs(buf[c]);
            }
        }
        out.evals_used = disc->points.size();
        return out;
    }
    const auto& quad = std::get<QuadratureDomain>(model.data_space);
    oracle::Box box = quad.box;
    if (quad.breakpoints) {
        box.breakpoints.assign(box.axes.size(), {});
        for (const auto& a : hints) {
            const auto bp = quad.breakpoints(a);
            for (std::size_t i = 0; i < bp.size() && i < box.axes.size(); ++i)
                box.breakpoints[i].insert(box.breakpoints[i].end(), bp[i].begin(), bp[i].end());
        }
    }
    return oracle::integrate_box_vector(h, k, box, spec);
}

oracle::StepPolicy step_policy(const LogDensityModel& model, bool richardson) {
    oracle::StepPolicy policy;
    policy.richardson = richardson;
    std::vector<double> lo(model.param_dim), hi(model.param_dim);
    for (std::size_t j = 0; j < model.param_dim; ++j) {
        const Bound b = j < model.support.bounds.size() ? model.support.bounds[j] : Bound{};
        lo[j] = b.lo;
        hi[j] = b.hi;
    }
    policy.lower = lo;
    policy.upper = hi;
    return policy;
}

FisherMatrix assemble(const Vector& alpha, std::size_t p, const oracle::VectorEstimate& est) {
    FisherMatrix F;
    F.at_param = alpha;
    F.matrix = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    std::size_t c = 0;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i; j < p; ++j, ++c) {
            F.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = est.value[c];
            F.matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = est.value[c];
            F.error = std::max(F.error, est.error[c]);
        }
    return F;
}

}  // namespace

bool Bound::contains(double v) const {
    if (std::isnan(v)) return false;
    const bool above = lo_closed ? v >= lo : v > lo;
    const bool below = hi_closed ? v <= hi : v < hi;
    return above && below;
}

bool ParamSupport::contains(const Vector& alpha) const {
    for (std::size_t j = 0; j < bounds.size(); ++j) {
        if (static_cast<Eigen::Index>(j) >= alpha.size()) return false;
        if (!bounds[j].contains(alpha(static_cast<Eigen::Index>(j)))) return false;
    }
    return !constraint || constraint(alpha);
}

void LogDensityModel::check_param(const Vector& alpha) const {
    if (static_cast<std::size_t>(alpha.size()) != param_dim)
        throw ShapeError(name + ": parameter has " + std::to_string(alpha.size()) + " entries, expected " +
                         std::to_string(param_dim));
    if (!support.contains(alpha)) throw DomainError(name + ": parameter outside the model support");
}

oracle::IntegrationSpec default_fisher_spec() {
    oracle::IntegrationSpec spec;
    // Finite-difference round-off puts a noise floor near 1e-8 relative on the
    // integrand (higher with Richardson), so tighter targets cannot converge.
    spec.abs_tol = 1e-12;
    spec.rel_tol = 1e-7;
    return spec;
}

oracle::VectorEstimate expectation(const LogDensityModel& model, const Vector& alpha, std::size_t k,
                                   const std::function<void(std::span<const double>, std::span<double>)>& g,
                                   const oracle::IntegrationSpec& spec) {
    model.check_param(alpha);
    spec.validate();
    if (spec.scheme == oracle::Scheme::MonteCarlo && !std::holds_alternative<DiscreteSupport>(model.data_space)) {
        if (!model.sampler) throw DomainError(model.name + ": Monte-Carlo expectation needs a sampler");
        const std::size_t d = model.data_dim;
        auto draw = [&](oracle::CounterRng& rng) {
            std::vector<double> x(d);
            model.sampler(rng, alpha, x);
            return x;
        };
        auto eval = [&](const std::vector<double>& x, std::span<double> out) { g(x, out); };
        return oracle::mc_expectation_vector(draw, eval, k, spec.max_evals, spec.seed);
    }
    if (spec.scheme == oracle::Scheme::ExactSum && !std::holds_alternative<DiscreteSupport>(model.data_space))
        throw DomainError(model.name + ": exact-sum expectation needs a discrete data space");
    const DataFn h = [&](std::span<const double> x, std::span<double> out) {
        const double lp = model.log_density(x, alpha);
        if (lp == -std::numeric_limits<double>::infinity()) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        const double p = std::exp(lp);
        if (p == 0.0) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        g(x, out);
        for (double& v : out) v *= p;
    };
    return integrate_data(model, k, h, spec, {alpha});
}

FisherMatrix fisher_information(const LogDensityModel& model, const Vector& alpha, const oracle::IntegrationSpec& spec,
                                bool richardson) {
    model.check_param(alpha);
    const std::size_t p = model.param_dim;
    const std::size_t k = p * (p + 1) / 2;
    const auto policy = step_policy(model, richardson);
    const std::vector<double> a(alpha.data(), alpha.data() + alpha.size());
    const auto g = [&](std::span<const double> x, std::span<double> out) {
        const oracle::ScalarField f = [&](std::span<const double> b) { return model.log_density(x, to_vector(b)); };
        const Matrix H = oracle::finite_diff_hessian(f, a, policy);
        std::size_t c = 0;
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = i; j < p; ++j) out[c++] = -H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    };
    return assemble(alpha, p, expectation(model, alpha, k, g, spec));
}

FisherMatrix fisher_information_score(const LogDensityModel& model, const Vector& alpha,
                                      const oracle::IntegrationSpec& spec, bool richardson) {
    model.check_param(alpha);
    const std::size_t p = model.param_dim;
    const std::size_t k = p * (p + 1) / 2;
    const auto policy = step_policy(model, richardson);
    const std::vector<double> a(alpha.data(), alpha.data() + alpha.size());
    const auto g = [&](std::span<const double> x, std::span<double> out) {
        const oracle::ScalarField f = [&](std::span<const double> b) { return model.log_density(x, to_vector(b)); };
        const Vector s = oracle::finite_diff_gradient(f, a, policy);
        std::size_t c = 0;
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = i; j < p; ++j) out[c++] = s(static_cast<Eigen::Index>(i)) * s(static_cast<Eigen::Index>(j));
    };
    return assemble(alpha, p, expectation(model, alpha, k, g, spec));
}

double log_det_checked(const Matrix& J) {
    const auto p = J.rows();
    if (p == 0 || J.cols() != p) throw ShapeError("Fisher matrix must be square and non-empty");
    const double trace = J.trace();
    if (!(trace > 0.0)) throw DegenerateMetricError("Fisher matrix has non-positive trace");
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (J + J.transpose()), Eigen::EigenvaluesOnly);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
        const double ev = eig.eigenvalues()(i);
        if (!(ev > 0.0)) throw DegenerateMetricError("Fisher matrix is singular");
        log_det += std::log(ev);
    }
    const double threshold = std::log(1e-12) + static_cast<double>(p) * std::log(trace / static_cast<double>(p));
    if (log_det < threshold) throw DegenerateMetricError("Fisher matrix is numerically singular");
    return log_det;
}

double jeffreys_log_density(const LogDensityModel& model, const Vector& alpha, const oracle::IntegrationSpec& spec,
                            bool richardson) {
    return 0.5 * log_det_checked(fisher_information(model, alpha, spec, richardson).matrix);
}

double hellinger_sq_distance(const LogDensityModel& model, const Vector& a1, const Vector& a2,
                             const oracle::IntegrationSpec& spec) {
    model.check_param(a1);
    model.check_param(a2);
    spec.validate();
    if (spec.scheme == oracle::Scheme::MonteCarlo && !std::holds_alternative<DiscreteSupport>(model.data_space)) {
        // E_{a1}[(sqrt(p2/p1) - 1)^2]
        const auto g = [&](std::span<const double> x, std::span<double> out) {
            const double r = std::exp(0.5 * (model.log_density(x, a2) - model.log_density(x, a1)));
            out[0] = (r - 1.0) * (r - 1.0);
        };
        return expectation(model, a1, 1, g, spec).value[0];
    }
    const DataFn h = [&](std::span<const double> x, std::span<double> out) {
        const double d = std::exp(0.5 * model.log_density(x, a2)) - std::exp(0.5 * model.log_density(x, a1));
        out[0] = d * d;
    };
    const double v = integrate_data(model, 1, h, spec, {a1, a2}).value[0];
    return std::clamp(v, 0.0, 2.0);
}

double kl_divergence(const LogDensityModel& model, const Vector& a2, const Vector& a1,
                     const oracle::IntegrationSpec& spec) {
    model.check_param(a1);
    model.check_param(a2);
    spec.validate();
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    // Pointwise non-negative integrand p2 ln(p2/p1) - p2 + p1.
    auto pointwise = [&](std::span<const double> x) {
        const double l2 = model.log_density(x, a2);
        const double l1 = model.log_density(x, a1);
        if (l2 == kNegInf) return l1 == kNegInf ? 0.0 : std::exp(l1);
        if (l1 == kNegInf) throw DomainError(model.name + ": support of p(.|a2) is not contained in that of p(.|a1)");
        const double p2 = std::exp(l2);
        return p2 * (l2 - l1) - p2 + std::exp(l1);
    };
    if (spec.scheme == oracle::Scheme::MonteCarlo && !std::holds_alternative<DiscreteSupport>(model.data_space)) {
        const auto g = [&](std::span<const double> x, std::span<double> out) {
            const double d = model.log_density(x, a1) - model.log_density(x, a2);
            out[0] = std::expm1(d) - d;
        };
        return std::max(0.0, expectation(model, a2, 1, g, spec).value[0]);
    }
    const DataFn h = [&](std::span<const double> x, std::span<double> out) { out[0] = pointwise(x); };
    return std::max(0.0, integrate_data(model, 1, h, spec, {a1, a2}).value[0]);
}

LogDensityModel reparameterize(const LogDensityModel& model, const Reparameterization& map) {
    if (!map.forward || !map.inverse) throw DomainError("reparameterization needs forward and inverse maps");
    LogDensityModel out = model;
    out.name = model.name + "/reparameterized";
    const auto inverse = map.inverse;
    const std::size_t p = model.param_dim;
    auto back = [inverse, p](const Vector& beta) {
        const Vector alpha = inverse(beta);
        if (static_cast<std::size_t>(alpha.size()) != p || !alpha.allFinite())
            throw DomainError("reparameterization inverse failed");
        return alpha;
    };
    const auto base = model.log_density;
    out.log_density = [base, back](std::span<const double> x, const Vector& beta) { return base(x, back(beta)); };

    const ParamSupport orig = model.support;
    if (map.image_support) {
        out.support = *map.image_support;
    } else if (p == 1 && !orig.bounds.empty()) {
        const Bound b = orig.bounds[0];
        Vector lo(1), hi(1);
        lo(0) = b.lo;
        hi(0) = b.hi;
        const double f_lo = map.forward(lo)(0);
        const double f_hi = map.forward(hi)(0);
        if (std::isnan(f_lo) || std::isnan(f_hi)) throw DomainError("reparameterization: image of the support is undefined");
        Bound nb;
        nb.lo = std::min(f_lo, f_hi);
        nb.hi = std::max(f_lo, f_hi);
        nb.lo_closed = f_lo <= f_hi ? b.lo_closed : b.hi_closed;
        nb.hi_closed = f_lo <= f_hi ? b.hi_closed : b.lo_closed;
        out.support.bounds = {nb};
    } else {
        out.support.bounds.assign(p, Bound{});
    }
    const auto orig_constraint = orig;
    out.support.constraint = [orig_constraint, inverse](const Vector& beta) {
        const Vector alpha = inverse(beta);
        return alpha.allFinite() && orig_constraint.contains(alpha);
    };

    if (auto* quad = std::get_if<QuadratureDomain>(&out.data_space); quad && quad->breakpoints) {
        const auto bp = quad->breakpoints;
        quad->breakpoints = [bp, back](const Vector& beta) { return bp(back(beta)); };
    }
    if (model.sampler) {
        const auto draw = model.sampler;
        out.sampler = [draw, back](oracle::CounterRng& rng, const Vector& beta, std::span<double> x) {
            draw(rng, back(beta), x);
        };
    }
    return out;
}

Matrix reparam_jacobian(const Reparameterization& map, const Vector& beta) {
    if (map.jacobian) return map.jacobian(beta);
    const Eigen::Index q = beta.size();
    const Vector a0 = map.inverse(beta);
    Matrix J(a0.size(), q);
    for (Eigen::Index j = 0; j < q; ++j) {
        const double h = std::max(1e-6, 1e-6 * std::fabs(beta(j)));
        Vector bp = beta, bm = beta;
        bp(j) += h;
        bm(j) -= h;
        J.col(j) = (map.inverse(bp) - map.inverse(bm)) / (2.0 * h);
    }
    if (!J.allFinite()) throw DomainError("reparameterization jacobian is not finite");
    return J;
}

}  // namespace covprior::geometry
