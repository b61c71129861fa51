#include "covprior/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "covprior/errors.hpp"

namespace covprior::inference {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMassLeak = 1e-4;
constexpr std::size_t kScanBudget = 20000;

double log_sum_exp(const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Interior sample points of an interval, spread through the same maps the
// quadrature engine uses for infinite ends.
std::vector<double> scan_points(oracle::Interval r, std::size_t n) {
    std::vector<double> out(n);
    const bool lo_inf = std::isinf(r.lo), hi_inf = std::isinf(r.hi);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        if (!lo_inf && !hi_inf) {
            out[i] = r.lo + (r.hi - r.lo) * u;
        } else if (!lo_inf) {
            out[i] = r.lo + u / (1.0 - u);
        } else if (!hi_inf) {
            out[i] = r.hi - u / (1.0 - u);
        } else {
            const double t = 2.0 * u - 1.0;
            out[i] = t / (1.0 - t * t);
        }
    }
    return out;
}

void check_domain(const std::vector<oracle::Interval>& domain) {
    if (domain.empty()) throw ShapeError("integration domain has no axes");
    for (const auto& r : domain) {
        if (std::isnan(r.lo) || std::isnan(r.hi)) throw DomainError("integration domain bound is NaN");
        if (!(r.lo < r.hi)) throw EmptySupportError("integration domain has zero width");
    }
}

std::vector<double> simpson_weights(const GridAxis& ax, std::vector<double>& nodes) {
    if (ax.points < 3 || ax.points % 2 == 0) throw DomainError("grid axis needs an odd number (>= 3) of points");
    if (!std::isfinite(ax.lo) || !std::isfinite(ax.hi)) throw DomainError("grid axis bounds must be finite");
    if (!(ax.lo < ax.hi)) throw EmptySupportError("grid axis has zero width");
    const std::size_t n = ax.points;
    const double h = (ax.hi - ax.lo) / static_cast<double>(n - 1);
    nodes.resize(n);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        nodes[i] = ax.lo + h * static_cast<double>(i);
        w[i] = (i == 0 || i == n - 1) ? h / 3.0 : (i % 2 == 1 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
    }
    nodes[n - 1] = ax.hi;
    return w;
}

double guarded(const std::function<double()>& f) {
    try {
        const double v = f();
        return std::isnan(v) ? kNegInf : v;
    } catch (const DomainError&) {
        return kNegInf;
    } catch (const DegenerateMetricError&) {
        return kNegInf;
    }
}

}  // namespace

double Evidence::value() const { return std::exp(log_value); }

double log_likelihood(const LogDensityModel& model, const Dataset& data, const Vector& alpha) {
    if (static_cast<std::size_t>(alpha.size()) != model.param_dim) throw ShapeError("parameter has wrong dimension");
    if (!model.support.contains(alpha)) return kNegInf;
    double s = 0.0;
    for (const auto& x : data) {
        if (x.size() != model.data_dim) throw ShapeError("data point has wrong dimension");
        s += model.log_density(x, alpha);
        if (s == kNegInf) return s;
    }
    return s;
}

Prior jeffreys_prior(const LogDensityModel& model, const oracle::IntegrationSpec& spec, bool richardson) {
    Prior p;
    p.name = "jeffreys(" + model.name + ")";
    p.proper = false;
    p.log_density = [model, spec, richardson](const Vector& a) {
        if (!model.support.contains(a)) return kNegInf;
        return geometry::jeffreys_log_density(model, a, spec, richardson);
    };
    return p;
}

Prior normalized_jeffreys_prior(const LogDensityModel& model, oracle::Interval range,
                                const oracle::IntegrationSpec& fisher_spec, bool richardson) {
    if (model.param_dim != 1) throw ShapeError("normalized_jeffreys_prior needs a one-parameter model");
    if (!std::isfinite(range.lo) || !std::isfinite(range.hi)) throw DomainError("normalization range must be finite");
    if (!(range.lo < range.hi)) throw EmptySupportError("normalization range has zero width");
    auto density = [&](double a) {
        Vector v(1);
        v(0) = a;
        return std::exp(geometry::jeffreys_log_density(model, v, fisher_spec, richardson));
    };
    oracle::IntegrationSpec spec;
    spec.rel_tol = 1e-7;
    spec.abs_tol = 1e-14;
    const auto norm = oracle::integrate_1d(density, range, spec);
    if (!(norm.value > 0.0) || !std::isfinite(norm.value)) throw DivergenceError("Jeffreys density not normalizable");
    const double log_norm = std::log(norm.value);

    Prior p;
    p.name = "jeffreys(" + model.name + ")/normalized";
    p.proper = true;
    p.log_density = [model, fisher_spec, richardson, range, log_norm](const Vector& a) {
        if (a(0) < range.lo || a(0) > range.hi || !model.support.contains(a)) return kNegInf;
        return geometry::jeffreys_log_density(model, a, fisher_spec, richardson) - log_norm;
    };
    return p;
}

double GriddedPosterior::density(std::size_t i) const { return std::exp(log_unnorm.at(i) - log_evidence); }

double GriddedPosterior::total_mass() const {
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) s += cell_volume[i] * density(i);
    return s;
}

Vector GriddedPosterior::mean() const {
    if (grid.empty()) throw EmptySupportError("empty grid");
    Vector m = Vector::Zero(grid.front().size());
    for (std::size_t i = 0; i < grid.size(); ++i) m += cell_volume[i] * density(i) * grid[i];
    return m;
}

Matrix GriddedPosterior::covariance() const {
    const Vector m = mean();
    Matrix c = Matrix::Zero(m.size(), m.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vector d = grid[i] - m;
        c += cell_volume[i] * density(i) * d * d.transpose();
    }
    return c;
}

GriddedPosterior posterior_on_grid(const LogDensityModel& model, const Prior& prior, const Dataset& data,
                                   const std::vector<GridAxis>& axes) {
    if (axes.size() != model.param_dim) throw ShapeError("grid dimension differs from parameter dimension");
    if (!prior.log_density) throw DomainError("prior has no log density");
    const std::size_t d = axes.size();
    std::vector<std::vector<double>> nodes(d), weights(d);
    std::size_t total = 1;
    for (std::size_t j = 0; j < d; ++j) {
        weights[j] = simpson_weights(axes[j], nodes[j]);
        total *= nodes[j].size();
    }

    GriddedPosterior post;
    post.up_to_constant = !prior.proper;
    post.grid.reserve(total);
    post.cell_volume.reserve(total);
    post.log_unnorm.reserve(total);
    std::vector<bool> on_edge;
    on_edge.reserve(total);
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> log_terms;
    log_terms.reserve(total);
    for (std::size_t n = 0; n < total; ++n) {
        Vector a(static_cast<Eigen::Index>(d));
        double w = 1.0;
        bool edge = false;
        for (std::size_t j = 0; j < d; ++j) {
            a(static_cast<Eigen::Index>(j)) = nodes[j][idx[j]];
            w *= weights[j][idx[j]];
            edge |= idx[j] == 0 || idx[j] + 1 == nodes[j].size();
        }
        double lp = kNegInf;
        if (model.support.contains(a)) {
            const double prior_term = guarded([&] { return prior.log_density(a); });
            if (prior_term != kNegInf) lp = prior_term + guarded([&] { return log_likelihood(model, data, a); });
        }
        if (std::isnan(lp) || lp == std::numeric_limits<double>::infinity()) lp = kNegInf;
        post.grid.push_back(std::move(a));
        post.cell_volume.push_back(w);
        post.log_unnorm.push_back(lp);
        on_edge.push_back(edge);
        log_terms.push_back(lp + std::log(w));
        for (std::size_t j = d; j-- > 0;) {
            if (++idx[j] < nodes[j].size()) break;
            idx[j] = 0;
        }
    }
    post.log_evidence = log_sum_exp(log_terms);
    if (post.log_evidence == kNegInf) throw EmptySupportError("posterior is zero on every grid point");

    double edge_mass = 0.0;
    for (std::size_t i = 0; i < total; ++i)
        if (on_edge[i]) edge_mass += std::exp(log_terms[i] - post.log_evidence);
    if (edge_mass > kMassLeak)
        post.warnings.push_back("mass leak: boundary grid points carry " + std::to_string(edge_mass) +
                                " of the posterior mass");
    return post;
}

Evidence log_integral(const std::function<double(std::span<const double>)>& log_f,
                      const std::vector<oracle::Interval>& domain, const oracle::IntegrationSpec& spec,
                      bool up_to_constant) {
    check_domain(domain);
    spec.validate();
    const std::size_t d = domain.size();

    // Coarse scan for the scale of the integrand.
    const auto per_axis = std::max<std::size_t>(
        5, static_cast<std::size_t>(std::pow(static_cast<double>(kScanBudget), 1.0 / static_cast<double>(d))));
    std::vector<std::vector<double>> pts(d);
    std::size_t total = 1;
    for (std::size_t j = 0; j < d; ++j) {
        pts[j] = scan_points(domain[j], per_axis);
        total *= per_axis;
    }
    double shift = kNegInf;
    std::vector<double> best(d), x(d);
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t n = 0; n < total; ++n) {
        for (std::size_t j = 0; j < d; ++j) x[j] = pts[j][idx[j]];
        const double v = log_f(x);
        if (!std::isnan(v) && v > shift) {
            shift = v;
            best = x;
        }
        for (std::size_t j = d; j-- > 0;) {
            if (++idx[j] < per_axis) break;
            idx[j] = 0;
        }
    }
    if (shift == kNegInf) throw EmptySupportError("integrand is zero on the whole scan");
    if (!std::isfinite(shift)) throw DivergenceError("integrand is infinite");

    oracle::Box box;
    box.axes = domain;
    box.breakpoints.resize(d);
    for (std::size_t j = 0; j < d; ++j) box.breakpoints[j] = {best[j]};

    auto f = [&](std::span<const double> a) {
        const double v = log_f(a);
        if (std::isnan(v)) return 0.0;
        return std::exp(v - shift);
    };
    oracle::OracleEstimate r;
    try {
        r = oracle::integrate_nd(f, box, spec);
    } catch (const IntegrationError& e) {
        if (!std::isfinite(e.best_estimate()) || e.error_estimate() > 1e-2 * std::fabs(e.best_estimate()))
            throw DivergenceError(std::string("evidence integral does not converge: ") + e.what());
        throw;
    }
    if (!std::isfinite(r.value)) throw DivergenceError("evidence integral is infinite");
    if (!(r.value > 0.0)) throw EmptySupportError("evidence is zero");
    Evidence ev;
    ev.log_value = shift + std::log(r.value);
    ev.rel_error = r.error / r.value;
    ev.up_to_constant = up_to_constant;
    return ev;
}

Evidence marginal_likelihood(const LogDensityModel& model, const Prior& prior, const Dataset& data,
                             const oracle::IntegrationSpec& spec, const std::vector<oracle::Interval>& domain) {
    if (!prior.log_density) throw DomainError("prior has no log density");
    std::vector<oracle::Interval> dom = domain;
    if (dom.empty()) {
        if (model.support.bounds.size() != model.param_dim) throw ShapeError("model support has wrong dimension");
        for (const auto& b : model.support.bounds) dom.push_back({b.lo, b.hi});
    }
    if (dom.size() != model.param_dim) throw ShapeError("domain dimension differs from parameter dimension");
    if (spec.scheme == oracle::Scheme::MonteCarlo)
        for (const auto& r : dom)
            if (!std::isfinite(r.lo) || !std::isfinite(r.hi))
                throw DomainError("Monte-Carlo evidence needs a finite domain");

    auto log_f = [&](std::span<const double> x) {
        const Vector a = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
        if (!model.support.contains(a)) return kNegInf;
        const double lp = guarded([&] { return prior.log_density(a); });
        if (lp == kNegInf) return kNegInf;
        return lp + guarded([&] { return log_likelihood(model, data, a); });
    };
    return log_integral(log_f, dom, spec, !prior.proper);
}

void ModelEnsemble::validate() const {
    if (members.empty()) throw DomainError("model ensemble is empty");
    std::set<std::string> seen;
    double sum = 0.0;
    for (const auto& m : members) {
        if (!seen.insert(m.label).second) throw DomainError("duplicate model label: " + m.label);
        if (!(m.prior_weight >= 0.0) || !std::isfinite(m.prior_weight))
            throw DomainError("model prior weight must be non-negative: " + m.label);
        if (!m.evidence) throw DomainError("model has no evidence evaluator: " + m.label);
        sum += m.prior_weight;
    }
    if (std::fabs(sum - 1.0) > 1e-10) throw DomainError("model prior weights must sum to 1");
}

ModelEnsemble ModelEnsemble::uniform(std::vector<std::string> labels,
                                     std::vector<std::function<Evidence()>> evidences) {
    if (labels.size() != evidences.size()) throw ShapeError("labels and evidences differ in length");
    if (labels.empty()) throw DomainError("model ensemble is empty");
    ModelEnsemble e;
    const double w = 1.0 / static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        e.members.push_back({std::move(labels[i]), std::move(evidences[i]), w});
    return e;
}

double ModelPosterior::weight(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return weights[i];
    throw DomainError("unknown model label: " + label);
}

ModelPosterior model_posterior(const ModelEnsemble& ensemble) {
    ensemble.validate();
    ModelPosterior out;
    std::vector<double> log_terms;
    for (const auto& m : ensemble.members) {
        double log_z = kNegInf;
        if (m.prior_weight > 0.0) {
            try {
                const Evidence ev = m.evidence();
                if (ev.up_to_constant)
                    throw IncomparableEvidenceError("evidence of model '" + m.label +
                                                    "' is defined only up to a constant");
                log_z = ev.log_value;
            } catch (const EmptySupportError&) {
                log_z = kNegInf;
            }
        }
        out.labels.push_back(m.label);
        out.log_evidence.push_back(log_z);
        log_terms.push_back(m.prior_weight > 0.0 ? log_z + std::log(m.prior_weight) : kNegInf);
    }
    const double total = log_sum_exp(log_terms);
    if (total == kNegInf) throw EmptySupportError("every model has zero evidence");
    if (!std::isfinite(total)) throw DivergenceError("model evidence is infinite");
    for (double t : log_terms) out.weights.push_back(std::exp(t - total));
    return out;
}

HyperPosterior1D::HyperPosterior1D(std::function<Evidence(double)> evidence,
                                   std::function<double(double)> log_hyperprior, oracle::Interval range,
                                   const oracle::IntegrationSpec& spec, std::vector<double> breakpoints)
    : evidence_(std::move(evidence)),
      log_hyperprior_(std::move(log_hyperprior)),
      range_(range),
      spec_(spec),
      breakpoints_(std::move(breakpoints)) {
    check_domain({range_});
    spec_.validate();
    double best = std::numeric_limits<double>::quiet_NaN();
    shift_ = kNegInf;
    for (double k : scan_points(range_, 513)) {
        const double v = log_unnorm(k);
        if (v > shift_) {
            shift_ = v;
            best = k;
        }
    }
    for (double k : breakpoints_) {
        if (!(k > range_.lo && k < range_.hi)) continue;
        const double v = log_unnorm(k);
        if (v > shift_) shift_ = v;
    }
    if (shift_ == kNegInf) throw EmptySupportError("hyper-posterior is zero everywhere");
    if (!std::isfinite(shift_)) throw DivergenceError("hyper-posterior is infinite");
    breakpoints_.push_back(best);
    std::sort(breakpoints_.begin(), breakpoints_.end());
    const auto r = oracle::integrate_1d([this](double k) { return std::exp(log_unnorm(k) - shift_); }, range_,
                                        spec_, breakpoints_);
    if (!(r.value > 0.0)) throw EmptySupportError("hyper-posterior normalizer is zero");
    if (!std::isfinite(r.value)) throw DivergenceError("hyper-posterior is not normalizable");
    log_norm_ = shift_ + std::log(r.value);
}

double HyperPosterior1D::log_unnorm(double k) const {
    if (!(k > range_.lo && k < range_.hi)) return kNegInf;
    const double lh = guarded([&] { return log_hyperprior_(k); });
    if (lh == kNegInf) return kNegInf;
    Evidence ev;
    try {
        ev = evidence_(k);
    } catch (const EmptySupportError&) {
        return kNegInf;
    }
    if (ev.up_to_constant)
        throw IncomparableEvidenceError("continuous model family has an up-to-constant evidence");
    const double v = ev.log_value + lh;
    return std::isnan(v) ? kNegInf : v;
}

double HyperPosterior1D::log_density(double k) const { return log_unnorm(k) - log_norm_; }

double HyperPosterior1D::density(double k) const { return std::exp(log_density(k)); }

oracle::OracleEstimate HyperPosterior1D::expectation(const std::function<double(double)>& g) const {
    auto f = [&](double k) {
        const double p = density(k);
        return p == 0.0 ? 0.0 : g(k) * p;
    };
    return oracle::integrate_1d(f, range_, spec_, breakpoints_);
}

MomentSummary model_average(const std::vector<MomentSummary>& summaries, const ModelPosterior& weights) {
    if (summaries.size() != weights.weights.size()) throw ShapeError("one summary per model is required");
    if (summaries.empty()) throw ShapeError("no summaries to average");
    const Eigen::Index d = summaries.front().mean.size();
    const bool with_cov = summaries.front().covariance.size() != 0;
    for (const auto& s : summaries) {
        if (s.mean.size() != d) throw ShapeError("summaries describe measurands of different dimension");
        if (with_cov != (s.covariance.size() != 0)) throw ShapeError("covariance given for some models only");
        if (with_cov && (s.covariance.rows() != d || s.covariance.cols() != d))
            throw ShapeError("covariance has wrong shape");
    }
    MomentSummary out;
    out.mean = Vector::Zero(d);
    for (std::size_t k = 0; k < summaries.size(); ++k) out.mean += weights.weights[k] * summaries[k].mean;
    if (with_cov) {
        out.covariance = Matrix::Zero(d, d);
        for (std::size_t k = 0; k < summaries.size(); ++k) {
            const Vector dm = summaries[k].mean - out.mean;
            out.covariance += weights.weights[k] * (summaries[k].covariance + dm * dm.transpose());
        }
    }
    return out;
}

DensitySummary model_average(const std::vector<DensitySummary>& summaries, const ModelPosterior& weights) {
    if (summaries.size() != weights.weights.size()) throw ShapeError("one summary per model is required");
    if (summaries.empty()) throw ShapeError("no summaries to average");
    const auto& grid = summaries.front().grid;
    for (const auto& s : summaries) {
        if (s.grid.size() != grid.size() || s.density.size() != grid.size())
            throw ShapeError("densities are not on a common grid");
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (std::fabs(s.grid[i] - grid[i]) > 1e-12 * std::max(1.0, std::fabs(grid[i])))
                throw ShapeError("densities are not on a common grid");
    }
    DensitySummary out;
    out.grid = grid;
    out.density.assign(grid.size(), 0.0);
    for (std::size_t k = 0; k < summaries.size(); ++k)
        for (std::size_t i = 0; i < grid.size(); ++i) out.density[i] += weights.weights[k] * summaries[k].density[i];
    return out;
}

double total_variation(const std::vector<double>& grid, const std::vector<double>& p, const std::vector<double>& q) {
    if (grid.size() != p.size() || grid.size() != q.size()) throw ShapeError("densities and grid differ in length");
    if (grid.size() < 2) throw ShapeError("total variation needs at least two grid points");
    double s = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        s += 0.5 * (grid[i] - grid[i - 1]) * (std::fabs(p[i] - q[i]) + std::fabs(p[i - 1] - q[i - 1]));
    return 0.5 * s;
}

}  // namespace covprior::inference
