#include "covprior/models.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "covprior/errors.hpp"

namespace covprior::models {
namespace {

using geometry::Bound;
using geometry::DiscreteSupport;
using geometry::LogDensityModel;
using geometry::QuadratureDomain;
using geometry::Vector;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNegInf = -kInf;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double log_normal(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return -0.5 * z * z - std::log(sigma) - kHalfLog2Pi;
}

QuadratureDomain real_line(std::function<std::vector<std::vector<double>>(const Vector&)> bp) {
    QuadratureDomain d;
    d.box.axes = {{-kInf, kInf}};
    d.breakpoints = std::move(bp);
    return d;
}

void enumerate_counts(std::size_t cells, std::size_t left, std::vector<double>& cur,
                      std::vector<std::vector<double>>& out) {
    if (cur.size() + 1 == cells) {
        cur.push_back(static_cast<double>(left));
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
        cur.push_back(static_cast<double>(c));
        enumerate_counts(cells, left - c, cur, out);
        cur.pop_back();
    }
}

}  // namespace

LogDensityModel gaussian_location(double sigma) {
    if (!(sigma > 0.0)) throw DomainError("gaussian_location: sigma must be positive");
    LogDensityModel m;
    m.name = "gaussian-location";
    m.param_dim = 1;
    m.log_density = [sigma](std::span<const double> x, const Vector& a) { return log_normal(x[0], a(0), sigma); };
    m.support.bounds = {Bound{}};
    m.data_space = real_line([](const Vector& a) { return std::vector<std::vector<double>>{{a(0)}}; });
    m.sampler = [sigma](oracle::CounterRng& rng, const Vector& a, std::span<double> x) {
        x[0] = a(0) + sigma * rng.normal();
    };
    return m;
}

LogDensityModel gaussian() {
    LogDensityModel m;
    m.name = "gaussian";
    m.param_dim = 2;
    m.log_density = [](std::span<const double> x, const Vector& a) { return log_normal(x[0], a(0), a(1)); };
    m.support.bounds = {Bound{}, Bound{0.0, kInf}};
    m.data_space = real_line([](const Vector& a) {
        return std::vector<std::vector<double>>{{a(0) - a(1), a(0), a(0) + a(1)}};
    });
    m.sampler = [](oracle::CounterRng& rng, const Vector& a, std::span<double> x) { x[0] = a(0) + a(1) * rng.normal(); };
    return m;
}

LogDensityModel gaussian_standardized() {
    LogDensityModel m;
    m.name = "gaussian-standardized";
    m.param_dim = 2;
    m.log_density = [](std::span<const double> x, const Vector& a) { return log_normal(x[0], a(0) * a(1), a(1)); };
    m.support.bounds = {Bound{}, Bound{0.0, kInf}};
    m.data_space = real_line([](const Vector& a) {
        const double mu = a(0) * a(1);
        return std::vector<std::vector<double>>{{mu - a(1), mu, mu + a(1)}};
    });
    m.sampler = [](oracle::CounterRng& rng, const Vector& a, std::span<double> x) {
        x[0] = a(1) * (a(0) + rng.normal());
    };
    return m;
}

LogDensityModel exponential_rate() {
    LogDensityModel m;
    m.name = "exponential-rate";
    m.param_dim = 1;
    m.log_density = [](std::span<const double> x, const Vector& a) {
        if (x[0] < 0.0) return kNegInf;
        return std::log(a(0)) - a(0) * x[0];
    };
    m.support.bounds = {Bound{0.0, kInf}};
    QuadratureDomain d;
    d.box.axes = {{0.0, kInf}};
    d.breakpoints = [](const Vector& a) { return std::vector<std::vector<double>>{{1.0 / a(0)}}; };
    m.data_space = d;
    m.sampler = [](oracle::CounterRng& rng, const Vector& a, std::span<double> x) { x[0] = rng.exponential() / a(0); };
    return m;
}

LogDensityModel bernoulli() {
    LogDensityModel m;
    m.name = "bernoulli";
    m.param_dim = 1;
    m.log_density = [](std::span<const double> x, const Vector& a) {
        const double t = a(0);
        if (x[0] == 1.0) return std::log(t);
        if (x[0] == 0.0) return std::log1p(-t);
        return kNegInf;
    };
    m.support.bounds = {Bound{0.0, 1.0}};
    m.data_space = DiscreteSupport{{{0.0}, {1.0}}};
    m.sampler = [](oracle::CounterRng& rng, const Vector& a, std::span<double> x) {
        x[0] = rng.uniform() < a(0) ? 1.0 : 0.0;
    };
    return m;
}

LogDensityModel multinomial(std::size_t cells, std::size_t trials) {
    if (cells < 2) throw DomainError("multinomial: need at least two cells");
    if (trials < 1) throw DomainError("multinomial: need at least one trial");
    LogDensityModel m;
    m.name = "multinomial";
    m.param_dim = cells - 1;
    m.data_dim = cells;
    const double log_n_fact = std::lgamma(static_cast<double>(trials) + 1.0);
    m.log_density = [cells, log_n_fact](std::span<const double> x, const Vector& a) {
        double last = 1.0;
        for (Eigen::Index i = 0; i < a.size(); ++i) last -= a(i);
        double lp = log_n_fact;
        for (std::size_t i = 0; i < cells; ++i) {
            const double t = i + 1 < cells ? a(static_cast<Eigen::Index>(i)) : last;
            lp -= std::lgamma(x[i] + 1.0);
            if (x[i] > 0.0) lp += x[i] * std::log(t);
        }
        return lp;
    };
    m.support.bounds.assign(cells - 1, Bound{0.0, 1.0});
    m.support.constraint = [](const Vector& a) { return a.sum() < 1.0; };
    DiscreteSupport d;
    std::vector<double> cur;
    enumerate_counts(cells, trials, cur, d.points);
    m.data_space = std::move(d);
    m.sampler = [cells, trials](oracle::CounterRng& rng, const Vector& a, std::span<double> x) {
        std::fill(x.begin(), x.end(), 0.0);
        for (std::size_t t = 0; t < trials; ++t) {
            double u = rng.uniform();
            std::size_t i = 0;
            for (; i + 1 < cells; ++i) {
                u -= a(static_cast<Eigen::Index>(i));
                if (u < 0.0) break;
            }
            x[i] += 1.0;
        }
    };
    return m;
}

}  // namespace covprior::models
