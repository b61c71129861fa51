#include "covprior/casestudies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "covprior/errors.hpp"
#include "covprior/specfun.hpp"

namespace covprior::casestudies {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLogPi = std::log(kPi);

void require(bool ok, const char* what) {
    if (!ok) throw DomainError(what);
}

double lgs(double a, double y) { return specfun::log_lower_incomplete_gamma_scaled(a, y); }

// E[w] and E[w^2] of the Stein shrinkage weight w = 1/(1+a^2) under the
// hyper-posterior, with y = m s_x^2 / 2:
//   E[w]   = γ(m/2+1, y) / (y γ(m/2, y))
//   E[w^2] = γ(m/2+2, y) / (y^2 γ(m/2, y))
// written with scaled incomplete gammas so that y -> 0 stays finite.
struct ShrinkWeights {
    double w1, w2;
};

ShrinkWeights shrink_weights(double s_x2, int m) {
    const double a = 0.5 * m, y = 0.5 * m * s_x2;
    const double base = lgs(a, y);
    return {std::exp(lgs(a + 1.0, y) - base), std::exp(lgs(a + 2.0, y) - base)};
}

void check_stein(double s_x2, int m) {
    require(m >= 1, "stein: m must be at least 1");
    require(std::isfinite(s_x2) && s_x2 >= 0.0, "stein: sample variance must be non-negative");
}

void check_ns(int m, double s2) {
    require(m >= 1, "neyman-scott: m must be at least 1");
    require(std::isfinite(s2) && s2 > 0.0, "neyman-scott: s2 must be positive");
}

double normal_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * kPi));
}

}  // namespace

double CaseStudyReport::scalar(const std::string& name) const {
    for (const auto& [k, v] : scalars)
        if (k == name) return v;
    throw DomainError("report has no scalar '" + name + "'");
}

const Table& CaseStudyReport::table(const std::string& name) const {
    for (const auto& t : tables)
        if (t.name == name) return t;
    throw DomainError("report has no table '" + name + "'");
}

// ---------------------------------------------------------------------------

inference::Evidence gauss_std_evidence_mu(int n) {
    if (n < 2) throw DomainError("gauss_std_evidence_mu: n must be at least 2");
    const double dn = n;
    inference::Evidence ev;
    ev.log_value = specfun::log_gamma(0.5 * dn - 0.5) - std::log(2.0) - 0.5 * (dn * std::log(dn) + (dn - 1.0) * kLogPi);
    ev.up_to_constant = true;
    return ev;
}

inference::Evidence gauss_std_evidence_lambda(int n) {
    if (n < 2) throw DomainError("gauss_std_evidence_lambda: n must be at least 2");
    const double dn = n;
    const double k0 = specfun::bessel_k0(0.5 * dn);
    if (!(k0 > 0.0)) throw DomainError("gauss_std_evidence_lambda: n too large for K0 in double precision");
    inference::Evidence ev;
    ev.log_value = std::log(k0) + specfun::log_gamma(0.5 * dn + 1.0) + 0.5 * dn - std::log(dn) -
                   0.5 * dn * std::log(dn * kPi);
    ev.up_to_constant = true;
    return ev;
}

double gauss_std_posterior_mu(int n, double mu, double sigma) {
    require(n >= 2, "gauss_std_posterior_mu: n must be at least 2");
    require(sigma > 0.0, "gauss_std_posterior_mu: sigma must be positive");
    const double dn = n;
    const double log_c = 0.5 * dn * std::log(dn) - 0.5 * ((dn - 2.0) * std::log(2.0) + kLogPi) -
                         specfun::log_gamma(0.5 * dn - 0.5);
    return std::exp(log_c - (dn + 1.0) * std::log(sigma) - dn * (1.0 + mu * mu) / (2.0 * sigma * sigma));
}

double gauss_std_posterior_lambda(int n, double lambda, double sigma) {
    require(n >= 2, "gauss_std_posterior_lambda: n must be at least 2");
    require(sigma > 0.0, "gauss_std_posterior_lambda: sigma must be positive");
    const double dn = n;
    // Standardized data: sum (x_i - lambda sigma)^2 = n (1 + lambda^2 sigma^2).
    const double log_lik = -0.5 * dn * std::log(2.0 * kPi) - dn * std::log(sigma) -
                           dn * (1.0 + lambda * lambda * sigma * sigma) / (2.0 * sigma * sigma);
    const double log_prior = -0.5 * std::log(2.0 + lambda * lambda) - std::log(sigma);
    return std::exp(log_lik + log_prior - gauss_std_evidence_lambda(n).log_value);
}

double gauss_std_posterior_mu_in_lambda(int n, double lambda, double sigma) {
    return gauss_std_posterior_mu(n, lambda * sigma, sigma) * sigma;
}

CaseStudyReport gauss_std_report(int n_min, int n_max) {
    if (n_min < 2 || n_max < n_min) throw DomainError("gauss_std_report: need 2 <= n_min <= n_max");
    CaseStudyReport r;
    r.scenario = "gauss-stdmean";
    Table t{"evidence", {"n", "Z_mu", "Z_lambda", "ratio"}, {}};
    for (int n = n_min; n <= n_max; ++n) {
        const auto a = gauss_std_evidence_mu(n), b = gauss_std_evidence_lambda(n);
        t.rows.push_back({static_cast<double>(n), a.value(), b.value(), std::exp(b.log_value - a.log_value)});
    }
    r.tables.push_back(std::move(t));
    r.provenance["Z_mu"] = "1/sigma reference prior on (mu, sigma); defined up to a constant factor";
    r.provenance["Z_lambda"] = "1/(sqrt(2+lambda^2) sigma) reference prior on (lambda, sigma); defined up to a constant factor";
    r.provenance["data"] = "standardized sample: mean 0, biased standard deviation 1";
    return r;
}

// ---------------------------------------------------------------------------

double credible_ball_probability(int q, int mn) {
    if (q < 1) throw DomainError("credible_ball_probability: q must be at least 1");
    if (mn < 3) throw DomainError("credible_ball_probability: mn must be at least 3");
    const double dq = q, nu = mn;
    const double log_pref = specfun::log_gamma(0.5 * (nu + dq)) - 0.5 * dq * std::log(nu - 2.0) -
                            specfun::log_gamma(0.5 * nu) - specfun::log_gamma(0.5 * dq + 1.0);
    const double f = specfun::hyp2f1(0.5 * dq, 0.5 * (nu + dq), 0.5 * dq + 1.0, 1.0 / (2.0 - nu));
    return std::exp(log_pref) * f;
}

namespace {

double multinormal_log_evidence(const MultinormalInput& in) {
    const double m = in.m, mn = static_cast<double>(in.m) * in.n;
    return 0.5 * m * std::log(2.0 * m) + specfun::log_gamma(0.5 * mn) - std::log(2.0) -
           0.5 * (m * (in.n + 1.0) * std::log(mn) + m * (in.n - 1.0) * kLogPi) - 0.5 * mn * std::log(in.pooled_s2);
}

}  // namespace

namespace {

void check_multinormal(const MultinormalInput& in) {
    require(in.m >= 1 && in.n >= 1, "multinormal: m and n must be positive");
    require(std::isfinite(in.pooled_s2) && in.pooled_s2 > 0.0, "multinormal: pooled variance must be positive");
    require(in.sigma0 > 0.0 && in.v_mu > 0.0, "multinormal: sigma0 and V_mu must be positive");
    require(in.q >= 1 && in.q <= in.m, "multinormal: q must lie in [1, m]");
    if (!in.xbar.empty() && in.xbar.size() != static_cast<std::size_t>(in.m))
        throw ShapeError("multinormal: xbar must have m entries");
}

double multinormal_log_prior_factor(const MultinormalInput& in) {
    return std::log(static_cast<double>(in.m)) + in.m * std::log(in.sigma0) - std::log(in.v_mu);
}

}  // namespace

inference::Evidence multinormal_evidence(const MultinormalInput& in) {
    check_multinormal(in);
    return {multinormal_log_evidence(in) + multinormal_log_prior_factor(in), 0.0, false};
}

CaseStudyReport multinormal_summary(const MultinormalInput& in) {
    check_multinormal(in);
    const int mn = in.m * in.n;

    CaseStudyReport r;
    r.scenario = "multinormal";
    const double log_core = multinormal_log_evidence(in);
    const double log_factor = multinormal_log_prior_factor(in);
    r.scalars.emplace_back("m", in.m);
    r.scalars.emplace_back("n", in.n);
    r.scalars.emplace_back("q", in.q);
    r.scalars.emplace_back("log_evidence", log_core + log_factor);
    r.scalars.emplace_back("evidence", std::exp(log_core + log_factor));
    r.scalars.emplace_back("prior_factor", std::exp(log_factor));
    r.provenance["evidence"] = "integration domain extended to R^m x R+ (approximation); prior factor m sigma0^m / V_mu";
    if (mn <= 2) throw MomentUndefinedError("multinormal: posterior moments need mn > 2");

    const double var = in.m * in.pooled_s2 / (mn - 2.0);
    r.scalars.emplace_back("dof", mn);
    r.scalars.emplace_back("student_scale", in.pooled_s2 / in.n);
    r.scalars.emplace_back("variance", var);
    r.scalars.emplace_back("sigma_mu", std::sqrt(var));
    r.scalars.emplace_back("ball_probability", credible_ball_probability(in.q, mn));
    Table loc{"location", {"index", "mean", "variance"}, {}};
    for (int i = 0; i < in.q; ++i)
        loc.rows.push_back({static_cast<double>(i + 1), in.xbar.empty() ? 0.0 : in.xbar[static_cast<std::size_t>(i)], var});
    r.tables.push_back(std::move(loc));
    r.provenance["posterior"] = "q-variate Student, location xbar', scale pooled_s2/n, mn degrees of freedom";
    return r;
}

// ---------------------------------------------------------------------------

namespace {

struct CountStats {
    int n = 0;
    int m1 = 0;
};

CountStats count_stats(const std::vector<int>& counts) {
    CountStats s;
    for (int c : counts) {
        if (c < 0) throw DomainError("multinomial: counts must be non-negative");
        s.n += c;
        if (c > 0) ++s.m1;
    }
    if (s.n < 1) throw DomainError("multinomial: at least one observation is required");
    return s;
}

}  // namespace

double multinomial_log_evidence(const std::vector<int>& counts, int m) {
    const auto st = count_stats(counts);
    if (m < st.m1) throw InfeasibleModelError("multinomial: m is below the number of non-empty cells");
    const double dm = m;
    double lz = specfun::log_gamma(st.n + 1.0) + specfun::log_gamma(0.5 * dm) - 0.5 * dm * kLogPi -
                specfun::log_gamma(st.n + 0.5 * dm);
    for (int c : counts)
        if (c > 0) lz += specfun::log_gamma(c + 0.5) - specfun::log_gamma(c + 1.0);
    // Each void cell contributes Γ(1/2) / 0! = sqrt(pi).
    lz += 0.5 * (dm - st.m1) * kLogPi;
    return lz;
}

double multinomial_posterior_mean(const std::vector<int>& counts, std::size_t cell, int m) {
    const auto st = count_stats(counts);
    if (m < st.m1) throw InfeasibleModelError("multinomial: m is below the number of non-empty cells");
    const double x = cell < counts.size() ? counts[cell] : 0.0;
    return (x + 0.5) / (st.n + 0.5 * m);
}

double loglog_slope(const std::vector<double>& m, const std::vector<double>& prob, double m_lo, double m_hi) {
    if (m.size() != prob.size()) throw ShapeError("loglog_slope: length mismatch");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int k = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] < m_lo || m[i] > m_hi || !(prob[i] > 0.0)) continue;
        const double x = std::log(m[i]), y = std::log(prob[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++k;
    }
    if (k < 2) throw DomainError("loglog_slope: fewer than two points in range");
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

double asymptotic_exponent(const std::vector<double>& m, const std::vector<double>& prob, double m_lo, double m_hi) {
    if (m.size() != prob.size()) throw ShapeError("asymptotic_exponent: length mismatch");
    std::vector<std::size_t> use;
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i] >= m_lo && m[i] <= m_hi && prob[i] > 0.0) use.push_back(i);
    if (use.size() < 3) throw DomainError("asymptotic_exponent: fewer than three points in range");
    Eigen::MatrixXd A(static_cast<Eigen::Index>(use.size()), 3);
    Eigen::VectorXd y(static_cast<Eigen::Index>(use.size()));
    for (std::size_t r = 0; r < use.size(); ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        A(i, 0) = 1.0;
        A(i, 1) = std::log(m[use[r]]);
        A(i, 2) = 1.0 / m[use[r]];
        y(i) = std::log(prob[use[r]]);
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
    return c(1);
}

CaseStudyReport multinomial_report(const MultinomialInput& in) {
    const auto st = count_stats(in.counts);
    if (in.m_max < st.m1) throw InfeasibleModelError("multinomial: m_max is below the number of non-empty cells");
    const int m_lo = std::max(st.m1, 2);
    if (in.m_max < m_lo) throw InfeasibleModelError("multinomial: need at least two cells");

    std::vector<std::size_t> observed;
    for (std::size_t i = 0; i < in.counts.size(); ++i)
        if (in.counts[i] > 0) observed.push_back(i);

    std::vector<double> ms, logz;
    for (int m = m_lo; m <= in.m_max; ++m) {
        ms.push_back(m);
        logz.push_back(multinomial_log_evidence(in.counts, m));
    }
    const double top = *std::max_element(logz.begin(), logz.end());
    double total = 0.0;
    for (double v : logz) total += std::exp(v - top);
    std::vector<double> prob;
    for (double v : logz) prob.push_back(std::exp(v - top) / total);

    CaseStudyReport r;
    r.scenario = "multinomial";
    Table t{"models", {"m", "log_evidence", "evidence", "probability"}, {}};
    for (std::size_t i : observed) t.columns.push_back("mean_cell" + std::to_string(i + 1));
    t.columns.push_back("mean_void_cell");
    std::vector<double> averaged(observed.size(), 0.0);
    double averaged_void = 0.0;
    for (std::size_t k = 0; k < ms.size(); ++k) {
        const int m = static_cast<int>(ms[k]);
        std::vector<double> row{ms[k], logz[k], std::exp(logz[k]), prob[k]};
        for (std::size_t j = 0; j < observed.size(); ++j) {
            const double e = multinomial_posterior_mean(in.counts, observed[j], m);
            row.push_back(e);
            averaged[j] += prob[k] * e;
        }
        const double ev = 0.5 / (st.n + 0.5 * m);
        row.push_back(ev);
        averaged_void += prob[k] * ev;
        t.rows.push_back(std::move(row));
    }
    r.tables.push_back(std::move(t));
    r.scalars.emplace_back("n", st.n);
    r.scalars.emplace_back("m1", st.m1);
    r.scalars.emplace_back("m_max", in.m_max);
    for (std::size_t j = 0; j < observed.size(); ++j)
        r.scalars.emplace_back("averaged_mean_cell" + std::to_string(observed[j] + 1), averaged[j]);
    r.scalars.emplace_back("averaged_mean_void_cell", averaged_void);
    const double decade_lo = std::max<double>(m_lo, in.m_max / 10.0);
    if (in.m_max - decade_lo >= 2.0) {
        r.scalars.emplace_back("tail_slope", loglog_slope(ms, prob, decade_lo, in.m_max));
        r.scalars.emplace_back("asymptotic_exponent", asymptotic_exponent(ms, prob, decade_lo, in.m_max));
        r.scalars.emplace_back("expected_exponent", -static_cast<double>(st.n));
    }
    r.provenance["prior"] = "Jeffreys prior, Dirichlet(1/2, ..., 1/2)";
    r.provenance["model_prior"] = "models m1..m_max mutually exclusive and equiprobable";
    r.provenance["tail_slope"] = "least-squares slope of ln Prob(m|x) vs ln m over the last decade of m";
    r.provenance["asymptotic_exponent"] = "fit ln P = c + k ln m + d/m over the last decade of m";
    return r;
}

// ---------------------------------------------------------------------------

double SteinInput::xbar() const {
    if (x.empty()) throw DomainError("stein: no observations");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double SteinInput::s_x2() const {
    const double mu = xbar();
    double s = 0.0;
    for (double v : x) s += (v - mu) * (v - mu);
    return s / static_cast<double>(x.size());
}

double SteinInput::mean_sq() const {
    if (x.empty()) throw DomainError("stein: no observations");
    double s = 0.0;
    for (double v : x) s += v * v;
    return s / static_cast<double>(x.size());
}

FlatMoments stein_flat_model_moments(const SteinInput& in) {
    const double x2 = in.mean_sq();
    return {1.0 + x2, 2.0 * (1.0 + 2.0 * x2) / static_cast<double>(in.m())};
}

double stein_frequentist_mean(double theta2) {
    require(theta2 >= 0.0, "stein: theta^2 must be non-negative");
    return 2.0 + theta2;
}

double stein_log_hyper_posterior(double b, double a, double xbar, double s_x2, int m) {
    check_stein(s_x2, m);
    if (!(a > 0.0)) throw DomainError("stein_hyper_posterior: a must be positive");
    if (m >= 2 && !(s_x2 > 0.0)) throw DomainError("stein_hyper_posterior: s_x2 must be positive for m >= 2");
    const double dm = m, a2 = a * a, y = 0.5 * dm * s_x2;
    return 0.5 * std::log(2.0 * dm) - lgs(0.5 * dm, y) + std::log(a) - 0.5 * kLogPi -
           0.5 * (dm + 3.0) * std::log1p(a2) - dm * (s_x2 + (b - xbar) * (b - xbar)) / (2.0 * (1.0 + a2));
}

double stein_hyper_posterior(double b, double a, double xbar, double s_x2, int m) {
    return std::exp(stein_log_hyper_posterior(b, a, xbar, s_x2, m));
}

double stein_marginal_likelihood(double x, double b, double a) {
    require(a > 0.0, "stein: a must be positive");
    return normal_pdf(x, b, std::sqrt(1.0 + a * a));
}

ConditionalMoments stein_conditional(double x_i, double b, double a) {
    require(a > 0.0, "stein: a must be positive");
    const double a2 = a * a, d = 1.0 + a2;
    ConditionalMoments c;
    c.mean = (a2 * x_i + b) / d;
    c.variance = a2 / d;
    c.second_moment = (b * b + a2 * (1.0 + 2.0 * b * x_i) + a2 * a2 * (1.0 + x_i * x_i)) / (d * d);
    return c;
}

double stein_gate_prior(double mu, double b, double a) {
    require(a > 0.0, "stein: a must be positive");
    const double half = std::sqrt(3.0) * a;
    return (mu >= b - half && mu <= b + half) ? 1.0 / (2.0 * half) : 0.0;
}

double stein_averaged_mu(double x_i, double xbar, double s_x2, int m) {
    check_stein(s_x2, m);
    return x_i - (x_i - xbar) * shrink_weights(s_x2, m).w1;
}

double stein_averaged_mu2(double x_i, double xbar, double s_x2, int m) {
    check_stein(s_x2, m);
    const auto w = shrink_weights(s_x2, m);
    const double d = x_i - xbar;
    return x_i * x_i + 1.0 - (1.0 + 2.0 * x_i * d - 1.0 / m) * w.w1 + d * d * w.w2;
}

double stein_averaged_theta2(double mean_sq, double s_x2, int m) {
    check_stein(s_x2, m);
    // Equal to 1 + mean_sq + 2A/B; this arrangement avoids the cancellation
    // between A and B as s_x2 -> 0.
    const auto w = shrink_weights(s_x2, m);
    return 1.0 + mean_sq - (1.0 - 1.0 / m + 2.0 * s_x2) * w.w1 + s_x2 * w.w2;
}

oracle::OracleEstimate stein_average_numeric(const std::function<double(double, double)>& g, double xbar,
                                             double s_x2, int m, const oracle::IntegrationSpec& spec) {
    check_stein(s_x2, m);
    auto f = [&](std::span<const double> t) {
        const double p = stein_hyper_posterior(t[0], t[1], xbar, s_x2, m);
        return p == 0.0 ? 0.0 : g(t[0], t[1]) * p;
    };
    oracle::Box box{{{-kInf, kInf}, {0.0, kInf}}, {{xbar}, {1.0 / std::sqrt(3.0), std::sqrt(1.0 + s_x2)}}};
    return oracle::integrate_nd(f, box, spec);
}

double stein_averaged_density_m1(double mu, double x, const oracle::IntegrationSpec& spec) {
    auto g = [&](double b, double a) {
        const auto c = stein_conditional(x, b, a);
        return normal_pdf(mu, c.mean, std::sqrt(c.variance));
    };
    auto f = [&](std::span<const double> t) {
        const double p = stein_hyper_posterior(t[0], t[1], x, 0.0, 1);
        return p == 0.0 ? 0.0 : g(t[0], t[1]) * p;
    };
    oracle::Box box{{{-kInf, kInf}, {0.0, kInf}}, {{std::min(x, mu), std::max(x, mu)}, {1.0 / std::sqrt(3.0)}}};
    if (box.breakpoints[0][0] == box.breakpoints[0][1]) box.breakpoints[0].pop_back();
    return oracle::integrate_nd(f, box, spec).value;
}

CaseStudyReport stein_report(const SteinInput& in) {
    const int m = static_cast<int>(in.m());
    const double xbar = in.xbar(), s2 = in.s_x2(), x2 = in.mean_sq();
    const auto flat = stein_flat_model_moments(in);
    CaseStudyReport r;
    r.scenario = "stein";
    r.scalars.emplace_back("m", m);
    r.scalars.emplace_back("xbar", xbar);
    r.scalars.emplace_back("s_x2", s2);
    r.scalars.emplace_back("mean_sq", x2);
    r.scalars.emplace_back("flat_theta2_mean", flat.mean);
    r.scalars.emplace_back("flat_theta2_variance", flat.variance);
    r.scalars.emplace_back("averaged_theta2", stein_averaged_theta2(x2, s2, m));
    Table t{"measurands", {"i", "x", "averaged_mu", "averaged_mu2", "flat_mu2"}, {}};
    for (int i = 0; i < m; ++i) {
        const double xi = in.x[static_cast<std::size_t>(i)];
        t.rows.push_back({static_cast<double>(i + 1), xi, stein_averaged_mu(xi, xbar, s2, m),
                          stein_averaged_mu2(xi, xbar, s2, m), 1.0 + xi * xi});
    }
    r.tables.push_back(std::move(t));
    r.provenance["prior"] = "Gaussian surrogate N(b, a) for the uniform prior on [b - sqrt(3) a, b + sqrt(3) a]";
    r.provenance["hyper_prior"] = "Jeffreys prior of (b, a), proportional to a / (1 + a^2)^(3/2)";
    r.provenance["units"] = "sigma = 1";
    return r;
}

// ---------------------------------------------------------------------------

double neyman_scott_log_evidence(double zeta0, int m, double s2) {
    check_ns(m, s2);
    require(zeta0 > 0.0, "neyman-scott: zeta0 must be positive");
    const double dm = m;
    return 2.0 * std::log(dm) + 0.5 * dm * std::log(zeta0) +
           specfun::log_lower_incomplete_gamma(dm, dm * s2 / zeta0) - std::log(4.0) - 0.5 * dm * std::log(dm) -
           0.5 * (dm + 2.0) * std::log(s2) - specfun::log_gamma(0.5 * dm + 1.0);
}

double neyman_scott_conditional_mean(double zeta0, int m, double s2) {
    check_ns(m, s2);
    require(zeta0 > 0.0, "neyman-scott: zeta0 must be positive");
    if (m < 2) throw MomentUndefinedError("neyman-scott: E(zeta | zeta0) needs m >= 2");
    const double dm = m, y = dm * s2 / zeta0;
    // γ(m-1, y) / γ(m, y) = (scaled ratio) / y.
    return dm * s2 * std::exp(lgs(dm - 1.0, y) - lgs(dm, y)) / y;
}

double neyman_scott_zeta0_density(double zeta0, int m, double s2) {
    return std::exp(std::log(s2) + neyman_scott_log_evidence(zeta0, m, s2) - std::log(zeta0));
}

double neyman_scott_flat_density(double zeta, int m, double s2) {
    check_ns(m, s2);
    require(zeta > 0.0, "neyman-scott: zeta must be positive");
    const double dm = m, c = dm * s2;
    return std::exp(dm * std::log(c) - c / zeta - (dm + 1.0) * std::log(zeta) - specfun::log_gamma(dm));
}

double neyman_scott_averaged_mean(int m, double s2) {
    check_ns(m, s2);
    if (m < 3) throw MomentUndefinedError("neyman-scott: averaged E(zeta) needs m >= 3");
    return 2.0 * m * s2 / (m - 2.0);
}

oracle::OracleEstimate neyman_scott_averaged_mean_numeric(int m, double s2, const oracle::IntegrationSpec& spec) {
    check_ns(m, s2);
    if (m < 3) throw MomentUndefinedError("neyman-scott: averaged E(zeta) needs m >= 3");
    // Hyper-parameter t = ln zeta0: the 1/zeta0 hyper-prior becomes flat and
    // the zeta0^(-m/2) tail becomes exponential.
    inference::HyperPosterior1D post(
        [m, s2](double t) {
            const double z0 = std::exp(t);
            // Both tails vanish like exp(-m|t|/2); outside the double range the density is zero.
            const double lz = z0 > 0.0 && std::isfinite(z0) ? neyman_scott_log_evidence(z0, m, s2) : -kInf;
            return inference::Evidence{lz, 0.0, false};
        },
        [](double) { return 0.0; }, {-kInf, kInf}, spec, {std::log(s2), std::log(2.0 * s2)});
    return post.expectation([m, s2](double t) {
        const double z0 = std::exp(t);
        return z0 > 0.0 && std::isfinite(z0) ? neyman_scott_conditional_mean(z0, m, s2) : 0.0;
    });
}

double neyman_scott_zeta0_mode(int m, double s2) {
    check_ns(m, s2);
    auto f = [&](double log_z) { return neyman_scott_log_evidence(std::exp(log_z), m, s2) - log_z; };
    const double lo = std::log(1e-3 * s2), hi = std::log(1e3 * s2);
    const int steps = 4000;
    int best = 0;
    double best_v = -kInf;
    for (int i = 0; i <= steps; ++i) {
        const double v = f(lo + (hi - lo) * i / steps);
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    double a = lo + (hi - lo) * std::max(best - 1, 0) / steps;
    double b = lo + (hi - lo) * std::min(best + 1, steps) / steps;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return std::exp(0.5 * (a + b));
}

CaseStudyReport neyman_scott_report(const NeymanScottInput& in, const std::vector<double>& zeta0_grid) {
    check_ns(in.m, in.s2);
    if (in.m < 3) throw MomentUndefinedError("neyman-scott: the report needs m >= 3");
    if (!in.xbar.empty() && in.xbar.size() != static_cast<std::size_t>(in.m))
        throw ShapeError("neyman-scott: xbar must have m entries");
    for (double z : zeta0_grid) require(z > 0.0, "neyman-scott: zeta0 grid must be positive");
    const double m = in.m, s2 = in.s2;
    const double flat_mean = m * s2 / (m - 1.0);

    CaseStudyReport r;
    r.scenario = "neyman-scott";
    r.scalars.emplace_back("m", m);
    r.scalars.emplace_back("s2", s2);
    r.scalars.emplace_back("flat_mean", flat_mean);
    r.scalars.emplace_back("flat_variance", flat_mean * flat_mean / (m - 2.0));
    r.scalars.emplace_back("frequentist_unbiased_zeta", 2.0 * s2);
    r.scalars.emplace_back("frequentist_var_s2", (2.0 * s2) * (2.0 * s2) / m);
    r.scalars.emplace_back("averaged_mean", neyman_scott_averaged_mean(in.m, s2));
    r.scalars.emplace_back("zeta0_mode", neyman_scott_zeta0_mode(in.m, s2));
    Table t{"zeta0", {"zeta0", "log_evidence", "density", "conditional_mean"}, {}};
    for (double z : zeta0_grid)
        t.rows.push_back({z, neyman_scott_log_evidence(z, in.m, s2), neyman_scott_zeta0_density(z, in.m, s2),
                          neyman_scott_conditional_mean(z, in.m, s2)});
    r.tables.push_back(std::move(t));
    r.provenance["flat"] = "zeta0 = 0 model with prior zeta^-(m+2)/2";
    r.provenance["zeta0_prior"] = "Jeffreys hyper-prior 1/zeta0; density normalized over (0, inf)";
    r.provenance["frequentist"] = "E(s2 | zeta) = zeta/2, Var(s2 | zeta) = zeta^2/m, evaluated at zeta = 2 s2";
    return r;
}

// ---------------------------------------------------------------------------

double marginalization_posterior(double zeta, int m, double s2) {
    check_ns(m, s2);
    require(zeta > 0.0, "marginalization: zeta must be positive");
    const double dm = m, c = dm * s2;
    return std::exp(0.5 * dm * std::log(c) - c / zeta - 0.5 * (dm + 2.0) * std::log(zeta) -
                    specfun::log_gamma(0.5 * dm));
}

double marginalization_mean(int m, double s2) {
    check_ns(m, s2);
    if (m < 3) throw MomentUndefinedError("marginalization: the mean needs m >= 3");
    return 2.0 * m * s2 / (m - 2.0);
}

double marginalization_variance(int m, double s2) {
    check_ns(m, s2);
    if (m < 5) throw MomentUndefinedError("marginalization: the variance needs m >= 5");
    const double mean = marginalization_mean(m, s2);
    return 2.0 * mean * mean / (m - 4.0);
}

CaseStudyReport marginalization_report(int m, double s2) {
    CaseStudyReport r;
    r.scenario = "marginalization";
    r.scalars.emplace_back("m", m);
    r.scalars.emplace_back("s2", s2);
    r.scalars.emplace_back("mean", marginalization_mean(m, s2));
    if (m >= 5) r.scalars.emplace_back("variance", marginalization_variance(m, s2));
    const double flat_mean = m * s2 / (m - 1.0);
    r.scalars.emplace_back("flat_mean", flat_mean);
    r.scalars.emplace_back("flat_variance", flat_mean * flat_mean / (m - 2.0));
    r.scalars.emplace_back("averaged_mean", neyman_scott_averaged_mean(m, s2));
    r.provenance["prior"] = "Jeffreys prior 1/zeta of the s2-only model";
    r.provenance["comparison"] = "flat_* are the zeta0 = 0 model moments; averaged_mean is the zeta0-averaged expectation";
    if (m < 5) r.provenance["variance"] = "undefined for m < 5";
    return r;
}

}  // namespace covprior::casestudies
