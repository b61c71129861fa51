#include "covprior/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "covprior/casestudies.hpp"
#include "covprior/geometry.hpp"
#include "covprior/inference.hpp"
#include "covprior/models.hpp"
#include "covprior/montecarlo.hpp"
#include "covprior/rng.hpp"
#include "covprior/specfun.hpp"

namespace covprior::cli {
namespace {

namespace cs = casestudies;
using geometry::Vector;

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Parameter access

double to_double(const std::string& key, const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v))
        throw UsageError("--" + key + ": '" + text + "' is not a finite number");
    return v;
}

class Params {
public:
    explicit Params(const std::map<std::string, std::string>& p) : p_(p) {}

    bool has(const std::string& k) const { return p_.count(k) != 0; }
    const std::string& str(const std::string& k) const {
        const auto it = p_.find(k);
        if (it == p_.end()) throw UsageError("missing required parameter --" + k);
        return it->second;
    }
    double real(const std::string& k) const { return to_double(k, str(k)); }
    double real(const std::string& k, double dflt) const { return has(k) ? real(k) : dflt; }
    int integer(const std::string& k) const {
        const double v = real(k);
        if (v != std::floor(v) || std::fabs(v) > 1e9) throw UsageError("--" + k + " must be an integer");
        return static_cast<int>(v);
    }
    int integer(const std::string& k, int dflt) const { return has(k) ? integer(k) : dflt; }
    std::vector<double> list(const std::string& k) const {
        try {
            return parse_list(str(k));
        } catch (const UsageError& e) {
            throw UsageError("--" + k + ": " + e.what());
        }
    }
    std::vector<double> grid(const std::string& k, const std::string& dflt) const {
        try {
            return parse_grid(has(k) ? str(k) : dflt);
        } catch (const UsageError& e) {
            throw UsageError("--" + k + ": " + e.what());
        }
    }

private:
    const std::map<std::string, std::string>& p_;
};

std::vector<int> to_ints(const std::vector<double>& v, const std::string& key) {
    std::vector<int> out;
    for (double x : v) {
        if (x != std::floor(x) || std::fabs(x) > 1e9) throw UsageError("--" + key + " must hold integers");
        out.push_back(static_cast<int>(x));
    }
    return out;
}

std::string fmt(double v) { return oracle::format_double(v); }

Sheet sheet_of(const cs::Table& t) {
    Sheet s{t.name, t.columns, {}};
    for (const auto& row : t.rows) s.rows.emplace_back(row.begin(), row.end());
    return s;
}

void add_report(Document& doc, const cs::CaseStudyReport& r) {
    doc.metadata.emplace_back("scenario", r.scenario);
    if (!r.scalars.empty()) {
        Sheet s{"summary", {"name", "value"}, {}};
        for (const auto& [k, v] : r.scalars) s.rows.push_back({k, v});
        doc.sheets.push_back(std::move(s));
    }
    for (const auto& t : r.tables) doc.sheets.push_back(sheet_of(t));
    for (const auto& [k, v] : r.provenance) doc.metadata.emplace_back("note." + k, v);
}

// ---------------------------------------------------------------------------
// Subcommands

geometry::LogDensityModel model_by_name(const Params& p) {
    const std::string& name = p.str("model");
    if (name == "gaussian-location") return models::gaussian_location(p.real("sigma", 1.0));
    if (name == "gaussian") return models::gaussian();
    if (name == "gaussian-standardized") return models::gaussian_standardized();
    if (name == "exponential") return models::exponential_rate();
    if (name == "bernoulli") return models::bernoulli();
    if (name == "multinomial") {
        const int cells = p.integer("cells", 3), trials = p.integer("trials", 1);
        if (cells < 2 || trials < 1) throw UsageError("multinomial needs --cells >= 2 and --trials >= 1");
        return models::multinomial(static_cast<std::size_t>(cells), static_cast<std::size_t>(trials));
    }
    throw UsageError("unknown --model '" + name +
                     "' (gaussian-location, gaussian, gaussian-standardized, exponential, bernoulli, multinomial)");
}

Document cmd_fisher(const Params& p) {
    const auto model = model_by_name(p);
    const bool rich = p.has("richardson");
    const bool score = p.has("score");
    std::vector<Vector> points;
    if (p.has("grid")) {
        if (model.param_dim != 1) throw UsageError("--grid needs a one-parameter model; use --at");
        for (double a : p.grid("grid", "")) {
            Vector v(1);
            v << a;
            points.push_back(v);
        }
    } else {
        const auto at = p.list("at");
        if (at.size() != model.param_dim)
            throw UsageError("--at needs " + std::to_string(model.param_dim) + " values for " + model.name);
        points.push_back(Eigen::Map<const Vector>(at.data(), static_cast<Eigen::Index>(at.size())));
    }
    const auto spec = geometry::default_fisher_spec();
    Sheet s{"fisher", {}, {}};
    const auto d = model.param_dim;
    for (std::size_t i = 0; i < d; ++i) s.columns.push_back("alpha" + std::to_string(i + 1));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) s.columns.push_back("J" + std::to_string(i + 1) + std::to_string(j + 1));
    s.columns.push_back("log_jeffreys");
    s.columns.push_back("error");
    if (score)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i; j < d; ++j)
                s.columns.push_back("score_J" + std::to_string(i + 1) + std::to_string(j + 1));
    for (const auto& a : points) {
        model.check_param(a);
        const auto J = geometry::fisher_information(model, a, spec, rich);
        std::vector<Cell> row;
        for (Eigen::Index i = 0; i < a.size(); ++i) row.emplace_back(a(i));
        for (Eigen::Index i = 0; i < a.size(); ++i)
            for (Eigen::Index j = i; j < a.size(); ++j) row.emplace_back(J.matrix(i, j));
        row.emplace_back(0.5 * geometry::log_det_checked(J.matrix));
        row.emplace_back(J.error);
        if (score) {
            const auto S = geometry::fisher_information_score(model, a, spec, rich);
            for (Eigen::Index i = 0; i < a.size(); ++i)
                for (Eigen::Index j = i; j < a.size(); ++j) row.emplace_back(S.matrix(i, j));
        }
        s.rows.push_back(std::move(row));
    }
    Document doc;
    doc.metadata.emplace_back("scenario", "fisher");
    doc.metadata.emplace_back("model", model.name);
    doc.metadata.emplace_back("fisher_rel_tol", fmt(spec.rel_tol));
    doc.metadata.emplace_back("fisher_abs_tol", fmt(spec.abs_tol));
    doc.metadata.emplace_back("richardson", rich ? "true" : "false");
    doc.sheets.push_back(std::move(s));
    return doc;
}

Document cmd_gauss(const Params& p) {
    Document doc;
    add_report(doc, cs::gauss_std_report(p.integer("n-min", 2), p.integer("n-max", 25)));
    return doc;
}

Document cmd_multinormal(const Params& p) {
    cs::MultinormalInput in;
    in.m = p.integer("m", 1);
    in.n = p.integer("n", 2);
    in.pooled_s2 = p.real("s2", 1.0);
    if (p.has("xbar")) in.xbar = p.list("xbar");
    in.q = p.integer("q", 1);
    in.sigma0 = p.real("sigma0", 1.0);
    in.v_mu = p.real("v-mu", 1.0);
    const int q_max = p.integer("q-max", 12);
    if (q_max < 1) throw UsageError("--q-max must be positive");

    Document doc;
    const auto ev = cs::multinormal_evidence(in);
    const int mn = in.m * in.n;
    if (mn > 2) {
        add_report(doc, cs::multinormal_summary(in));
        Sheet ball{"ball_probability", {"q", "probability"}, {}};
        for (int q = 1; q <= q_max; ++q)
            ball.rows.push_back({static_cast<double>(q), cs::credible_ball_probability(q, mn)});
        doc.sheets.push_back(std::move(ball));
    } else {
        doc.metadata.emplace_back("scenario", "multinormal");
        doc.metadata.emplace_back("warning", "mn <= 2: posterior moments and credible-ball probabilities are undefined");
        doc.sheets.push_back({"summary",
                              {"name", "value"},
                              {{std::string("log_evidence"), ev.log_value}, {std::string("evidence"), ev.value()}}});
    }
    return doc;
}

Document cmd_multinomial(const Params& p) {
    cs::MultinomialInput in;
    in.counts = to_ints(p.list("counts"), "counts");
    in.m_max = p.integer("m-max");
    Document doc;
    add_report(doc, cs::multinomial_report(in));
    return doc;
}

Document cmd_stein(const Params& p) {
    if (!p.has("x") && !p.has("sx-grid")) throw UsageError("stein needs --x and/or --sx-grid");
    Document doc;
    if (p.has("x")) {
        const cs::SteinInput in{p.list("x")};
        add_report(doc, cs::stein_report(in));
        if (in.m() == 1 && p.has("mu-grid")) {
            const double x = in.x[0];
            Sheet s{"averaged_density", {"mu", "averaged", "normal"}, {}};
            oracle::IntegrationSpec spec;
            spec.rel_tol = 1e-8;
            spec.abs_tol = 1e-12;
            for (double mu : p.grid("mu-grid", "")) {
                const double z = mu - x;
                s.rows.push_back(
                    {mu, cs::stein_averaged_density_m1(mu, x, spec), std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi)});
            }
            doc.sheets.push_back(std::move(s));
        }
    } else {
        doc.metadata.emplace_back("scenario", "stein");
    }
    if (p.has("sx-grid")) {
        const auto sx = p.grid("sx-grid", "");
        const auto ms = to_ints(p.has("m-list") ? p.list("m-list") : std::vector<double>{2, 4, 6, 8, 10, 12, 14, 16, 18, 20},
                                "m-list");
        for (int m : ms)
            if (m < 1) throw UsageError("--m-list entries must be positive");
        Sheet mu{"shrinkage", {"s_x"}, {}}, mu2{"mu2_excess", {"s_x"}, {}}, th{"theta2_excess", {"s_x"}, {}};
        for (int m : ms) {
            const std::string c = "m" + std::to_string(m);
            mu.columns.push_back(c);
            mu2.columns.push_back(c);
            th.columns.push_back(c);
        }
        for (double s : sx) {
            if (s < 0.0) throw UsageError("--sx-grid must be non-negative");
            std::vector<Cell> r1{s}, r2{s}, r3{s};
            for (int m : ms) {
                // x_i - xbar = 1 and xbar = 0: (E(mu_i) - xbar) / (x_i - xbar).
                r1.emplace_back(cs::stein_averaged_mu(1.0, 0.0, s * s, m));
                r2.emplace_back(cs::stein_averaged_mu2(0.0, 0.0, s * s, m));
                r3.emplace_back(cs::stein_averaged_theta2(0.0, s * s, m));
            }
            mu.rows.push_back(std::move(r1));
            mu2.rows.push_back(std::move(r2));
            th.rows.push_back(std::move(r3));
        }
        doc.sheets.push_back(std::move(mu));
        doc.sheets.push_back(std::move(mu2));
        doc.sheets.push_back(std::move(th));
        doc.metadata.emplace_back("note.sweeps",
                                  "shrinkage = (E(mu_i) - xbar)/(x_i - xbar); mu2_excess = E(mu_i^2) - xbar^2 at x_i = xbar; "
                                  "theta2_excess = E(theta^2) - mean of x_i^2");
    }
    return doc;
}

Document cmd_neyman_scott(const Params& p) {
    cs::NeymanScottInput in;
    in.m = p.integer("m");
    in.s2 = p.real("s2", 1.0);
    const auto grid = p.grid("zeta0-grid", "log:0.01:100:201");
    Document doc;
    add_report(doc, cs::neyman_scott_report(in, grid));
    return doc;
}

Document cmd_marginalization(const Params& p) {
    Document doc;
    add_report(doc, cs::marginalization_report(p.integer("m"), p.real("s2", 1.0)));
    return doc;
}

// ---------------------------------------------------------------------------
// Fixture oracles

double normal_pdf(double x, double m, double s) {
    const double z = (x - m) / s;
    return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * kPi));
}

oracle::IntegrationSpec quad_spec(double rel, double abs = 1e-14) {
    oracle::IntegrationSpec s;
    s.rel_tol = rel;
    s.abs_tol = abs;
    return s;
}

std::vector<double> standardized_sample(int n) {
    std::vector<double> x(static_cast<std::size_t>(n));
    double ss = 0.0;
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = i - 0.5 * (n - 1);
    for (double v : x) ss += v * v;
    const double k = std::sqrt(n / ss);
    for (double& v : x) v *= k;
    return x;
}

oracle::OracleEstimate from_evidence(const inference::Evidence& e) {
    oracle::OracleEstimate o;
    o.value = e.value();
    o.error = e.rel_error * o.value;
    return o;
}

oracle::OracleEstimate oracle_gauss(const oracle::Fixture& fx, bool lambda) {
    const int n = static_cast<int>(fx.input_int("n"));
    if (n < 2) throw DomainError("fixture n must be at least 2");
    inference::Dataset data;
    for (double v : standardized_sample(n)) data.push_back({v});
    inference::Prior prior;
    prior.proper = false;
    prior.name = lambda ? "reference-lambda" : "reference-mu";
    prior.log_density = lambda ? std::function<double(const Vector&)>([](const Vector& a) {
        return -0.5 * std::log(2.0 + a(0) * a(0)) - std::log(a(1));
    })
                               : std::function<double(const Vector&)>([](const Vector& a) { return -std::log(a(1)); });
    const auto model = lambda ? models::gaussian_standardized() : models::gaussian();
    return from_evidence(inference::marginal_likelihood(model, prior, data, quad_spec(1e-9)));
}

oracle::OracleEstimate oracle_ball(const oracle::Fixture& fx) {
    const double q = static_cast<double>(fx.input_int("q")), nu = static_cast<double>(fx.input_int("mn"));
    if (q < 1 || nu < 3) throw DomainError("fixture needs q >= 1 and mn >= 3");
    // Radial integral of the q-variate Student density (unit scale) over the ball of radius sqrt(nu/(nu-2)).
    const double log_c = std::log(2.0) + 0.5 * q * std::log(kPi) - std::lgamma(0.5 * q) +
                         std::lgamma(0.5 * (nu + q)) - std::lgamma(0.5 * nu) - 0.5 * q * std::log(nu * kPi);
    auto f = [&](double r) {
        if (r == 0.0) return q == 1.0 ? std::exp(log_c) : 0.0;
        return std::exp(log_c + (q - 1.0) * std::log(r) - 0.5 * (nu + q) * std::log1p(r * r / nu));
    };
    return oracle::integrate_1d(f, {0.0, std::sqrt(nu / (nu - 2.0))}, quad_spec(1e-12));
}

oracle::OracleEstimate oracle_multinomial(const oracle::Fixture& fx, std::uint64_t seed) {
    const auto counts = fx.input_list("counts");
    const auto draws = static_cast<std::size_t>(fx.input_int("draws"));
    const long long m = fx.input_int("m");
    if (m < static_cast<long long>(counts.size()) || m < 2) throw DomainError("fixture m below the count length");
    double n = 0.0, log_coef = 0.0;
    for (double c : counts) {
        if (c < 0 || c != std::floor(c)) throw DomainError("fixture counts must be non-negative integers");
        n += c;
        log_coef -= std::lgamma(c + 1.0);
    }
    log_coef += std::lgamma(n + 1.0);
    const std::vector<double> alpha(static_cast<std::size_t>(m), 0.5);
    auto sampler = [&](oracle::CounterRng& rng) {
        std::vector<double> th(alpha.size());
        rng.dirichlet(alpha, th);
        return th;
    };
    auto pmf = [&](const std::vector<double>& th) {
        double l = log_coef;
        for (std::size_t i = 0; i < counts.size(); ++i)
            if (counts[i] > 0) l += counts[i] * std::log(th[i]);
        return std::exp(l);
    };
    return oracle::mc_expectation(sampler, pmf, draws, seed);
}

oracle::OracleEstimate oracle_stein_theta2(const oracle::Fixture& fx) {
    const cs::SteinInput in{fx.input_list("x")};
    const double m = static_cast<double>(in.m());
    auto g = [&](double b, double a) {
        double s = 0.0;
        for (double xi : in.x) s += cs::stein_conditional(xi, b, a).second_moment;
        return s / m;
    };
    return cs::stein_average_numeric(g, in.xbar(), in.s_x2(), static_cast<int>(in.m()), quad_spec(1e-9, 1e-13));
}

oracle::OracleEstimate oracle_stein_m1(const oracle::Fixture& fx) {
    const double x = fx.input_double("x"), mu = fx.input_double("mu");
    oracle::OracleEstimate o;
    o.value = cs::stein_averaged_density_m1(mu, x, quad_spec(1e-9, 1e-13));
    o.error = 1e-9 * std::fabs(o.value);
    return o;
}

oracle::OracleEstimate oracle_ns_mean(const oracle::Fixture& fx) {
    return cs::neyman_scott_averaged_mean_numeric(static_cast<int>(fx.input_int("m")), fx.input_double("s2"));
}

oracle::OracleEstimate oracle_marginalization(const oracle::Fixture& fx, int power) {
    const int m = static_cast<int>(fx.input_int("m"));
    const double s2 = fx.input_double("s2");
    // Raw moment in log coordinates zeta = s2 e^t.
    auto f = [&](double t) {
        const double z = s2 * std::exp(t);
        return std::pow(z, power) * cs::marginalization_posterior(z, m, s2) * z;
    };
    const auto raw = oracle::integrate_1d(f, {-200.0, 200.0}, quad_spec(1e-11), std::vector<double>{0.0});
    if (power == 1) return raw;
    auto f1 = [&](double t) {
        const double z = s2 * std::exp(t);
        return z * cs::marginalization_posterior(z, m, s2) * z;
    };
    const auto mean = oracle::integrate_1d(f1, {-200.0, 200.0}, quad_spec(1e-11), std::vector<double>{0.0});
    oracle::OracleEstimate o = raw;
    o.value = raw.value - mean.value * mean.value;
    o.error = raw.error + 2.0 * std::fabs(mean.value) * mean.error;
    return o;
}

oracle::OracleEstimate oracle_fisher_sigma(const oracle::Fixture& fx, std::uint64_t seed) {
    const double sigma = fx.input_double("sigma");
    const auto draws = static_cast<std::size_t>(fx.input_int("draws"));
    if (!(sigma > 0.0)) throw DomainError("fixture sigma must be positive");
    // Score of N(x | 0, sigma) in sigma: (x^2 / sigma^3 - 1 / sigma).
    auto sampler = [sigma](oracle::CounterRng& rng) { return sigma * rng.normal(); };
    auto g = [sigma](double x) {
        const double s = x * x / (sigma * sigma * sigma) - 1.0 / sigma;
        return s * s;
    };
    return oracle::mc_expectation(sampler, g, draws, seed);
}

oracle::Fixture make(const std::string& name, std::map<std::string, std::string> inputs, std::uint64_t seed = 0) {
    oracle::Fixture fx;
    fx.name = name;
    fx.inputs = std::move(inputs);
    fx.seed = seed;
    return fx;
}

// ---------------------------------------------------------------------------
// Output

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

std::string cell_text(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return fmt(*d);
    return std::get<std::string>(c);
}

std::string timestamp_utc() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string ext(Format f) { return f == Format::Json ? ".json" : ".csv"; }

void emit_error(std::ostream& err, const std::string& kind, const std::string& type, const std::string& message,
                int code) {
    nlohmann::json j;
    j["error"] = {{"kind", kind}, {"type", type}, {"message", message}, {"exit_code", code}};
    err << j.dump() << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part.erase(0, part.find_first_not_of(" \t"));
        part.erase(part.find_last_not_of(" \t") + 1);
        out.push_back(to_double("list", part));
    }
    if (out.empty()) throw UsageError("empty list");
    return out;
}

std::vector<double> parse_grid(const std::string& text) {
    std::string body = text;
    bool log = false;
    if (body.rfind("log:", 0) == 0) {
        log = true;
        body = body.substr(4);
    }
    std::vector<std::string> parts;
    std::stringstream ss(body);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw UsageError("grid '" + text + "' is not min:max:count or log:min:max:count");
    const double lo = to_double("grid", parts[0]), hi = to_double("grid", parts[1]);
    const double cnt = to_double("grid", parts[2]);
    if (cnt < 1 || cnt != std::floor(cnt) || cnt > 1e7) throw UsageError("grid count must be a positive integer");
    if (hi < lo) throw UsageError("grid max is below min");
    if (log && !(lo > 0.0)) throw UsageError("log grid needs a positive min");
    const auto n = static_cast<std::size_t>(cnt);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
        g[i] = log ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))) : lo + t * (hi - lo);
    }
    if (n > 1) g.back() = hi;
    return g;
}

void write_csv(std::ostream& out, const Document& doc) {
    for (const auto& [k, v] : doc.metadata) out << "# " << k << ": " << v << '\n';
    bool first = true;
    for (const auto& s : doc.sheets) {
        if (!first) out << '\n';
        first = false;
        out << "# table: " << s.name << '\n';
        for (std::size_t i = 0; i < s.columns.size(); ++i) out << (i ? "," : "") << csv_field(s.columns[i]);
        out << "\r\n";
        for (const auto& row : s.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_field(cell_text(row[i]));
            out << "\r\n";
        }
    }
}

void write_json(std::ostream& out, const Document& doc) {
    nlohmann::ordered_json j;
    j["metadata"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : doc.metadata) j["metadata"][k] = v;
    j["tables"] = nlohmann::ordered_json::object();
    for (const auto& s : doc.sheets) {
        nlohmann::ordered_json t;
        t["columns"] = s.columns;
        nlohmann::ordered_json data = nlohmann::ordered_json::object();
        for (std::size_t c = 0; c < s.columns.size(); ++c) {
            nlohmann::ordered_json col = nlohmann::ordered_json::array();
            for (const auto& row : s.rows) {
                if (c >= row.size()) {
                    col.push_back(nullptr);
                } else if (const auto* d = std::get_if<double>(&row[c])) {
                    if (std::isfinite(*d))
                        col.push_back(*d);
                    else
                        col.push_back(nullptr);
                } else {
                    col.push_back(std::get<std::string>(row[c]));
                }
            }
            data[s.columns[c]] = std::move(col);
        }
        t["data"] = std::move(data);
        j["tables"][s.name] = std::move(t);
    }
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

oracle::OracleEstimate run_fixture(const oracle::Fixture& fx, std::optional<std::uint64_t> seed_override) {
    const std::uint64_t seed = seed_override.value_or(fx.seed);
    if (fx.name == "gauss_std_z1") return oracle_gauss(fx, false);
    if (fx.name == "gauss_std_z2") return oracle_gauss(fx, true);
    if (fx.name == "credible_ball") return oracle_ball(fx);
    if (fx.name == "multinomial_evidence") return oracle_multinomial(fx, seed);
    if (fx.name == "stein_theta2") return oracle_stein_theta2(fx);
    if (fx.name == "stein_m1_density") return oracle_stein_m1(fx);
    if (fx.name == "neyman_scott_mean") return oracle_ns_mean(fx);
    if (fx.name == "marginalization_mean") return oracle_marginalization(fx, 1);
    if (fx.name == "marginalization_variance") return oracle_marginalization(fx, 2);
    if (fx.name == "fisher_gaussian_sigma") return oracle_fisher_sigma(fx, seed);
    throw ParseError("unknown fixture '" + fx.name + "'", fx.line);
}

double fixture_closed_form(const oracle::Fixture& fx) {
    if (fx.name == "gauss_std_z1") return cs::gauss_std_evidence_mu(static_cast<int>(fx.input_int("n"))).value();
    if (fx.name == "gauss_std_z2") return cs::gauss_std_evidence_lambda(static_cast<int>(fx.input_int("n"))).value();
    if (fx.name == "credible_ball")
        return cs::credible_ball_probability(static_cast<int>(fx.input_int("q")), static_cast<int>(fx.input_int("mn")));
    if (fx.name == "multinomial_evidence") {
        const auto counts = to_ints(fx.input_list("counts"), "counts");
        return std::exp(cs::multinomial_log_evidence(counts, static_cast<int>(fx.input_int("m"))));
    }
    if (fx.name == "stein_theta2") {
        const cs::SteinInput in{fx.input_list("x")};
        return cs::stein_averaged_theta2(in.mean_sq(), in.s_x2(), static_cast<int>(in.m()));
    }
    if (fx.name == "stein_m1_density") return normal_pdf(fx.input_double("mu"), fx.input_double("x"), 1.0);
    if (fx.name == "neyman_scott_mean")
        return cs::neyman_scott_averaged_mean(static_cast<int>(fx.input_int("m")), fx.input_double("s2"));
    if (fx.name == "marginalization_mean")
        return cs::marginalization_mean(static_cast<int>(fx.input_int("m")), fx.input_double("s2"));
    if (fx.name == "marginalization_variance")
        return cs::marginalization_variance(static_cast<int>(fx.input_int("m")), fx.input_double("s2"));
    if (fx.name == "fisher_gaussian_sigma") {
        const double s = fx.input_double("sigma");
        return 2.0 / (s * s);
    }
    throw ParseError("unknown fixture '" + fx.name + "'", fx.line);
}

std::vector<oracle::Fixture> generate_fixtures(std::uint64_t seed) {
    std::vector<oracle::Fixture> out;
    for (int n : {2, 3, 5, 10}) out.push_back(make("gauss_std_z1", {{"n", std::to_string(n)}}));
    for (int n : {2, 3, 5, 10}) out.push_back(make("gauss_std_z2", {{"n", std::to_string(n)}}));
    for (int q : {1, 2, 4, 8, 12}) out.push_back(make("credible_ball", {{"q", std::to_string(q)}, {"mn", "12"}}));
    out.push_back(make("multinomial_evidence", {{"counts", "2,1,5"}, {"m", "3"}, {"draws", "1000000"}}, seed));
    out.push_back(make("multinomial_evidence", {{"counts", "2,1,5"}, {"m", "6"}, {"draws", "1000000"}}, seed + 1));
    out.push_back(make("stein_theta2", {{"x", "0.4,-1.2,2.1,0.9,-0.3,1.7"}}));
    out.push_back(make("stein_theta2", {{"x", "0.1,0.3,-0.2,0.25"}}));
    for (double mu : {-2.0, 0.7, 3.0})
        out.push_back(make("stein_m1_density", {{"x", "0.7"}, {"mu", fmt(mu)}}));
    for (int m : {3, 5, 10, 25}) out.push_back(make("neyman_scott_mean", {{"m", std::to_string(m)}, {"s2", "1.3"}}));
    for (int m : {6, 9}) {
        out.push_back(make("marginalization_mean", {{"m", std::to_string(m)}, {"s2", "1"}}));
        out.push_back(make("marginalization_variance", {{"m", std::to_string(m)}, {"s2", "1"}}));
    }
    out.push_back(make("fisher_gaussian_sigma", {{"sigma", "1.5"}, {"draws", "1000000"}}, seed + 2));
    std::size_t line = 0;
    for (auto& fx : out) {
        fx.line = ++line;
        const auto est = run_fixture(fx);
        fx.value = est.value;
        fx.error = est.error;
    }
    return out;
}

std::size_t VerifyReport::failures() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return !e.pass; }));
}

VerifyReport verify(const oracle::FixtureFile& file, std::optional<std::uint64_t> seed_override) {
    VerifyReport rep;
    rep.warnings = file.warnings;
    if (file.entries.empty()) rep.warnings.push_back("fixture file has no entries");
    for (const auto& fx : file.entries) {
        VerifyEntry e;
        e.name = fx.name;
        e.line = fx.line;
        e.expected = fx.value;
        try {
            const auto est = run_fixture(fx, seed_override);
            e.computed = est.value;
            e.deviation = std::fabs(est.value - fx.value);
            e.tolerance = std::max(3.0 * std::max(fx.error, est.error), 1e-9 * std::fabs(fx.value));
            e.pass = e.deviation <= e.tolerance;
        } catch (const ParseError&) {
            throw;
        } catch (const Error& ex) {
            e.computed = std::numeric_limits<double>::quiet_NaN();
            e.deviation = e.computed;
            e.message = ex.what();
            e.pass = false;
        }
        rep.entries.push_back(std::move(e));
    }
    return rep;
}

// ---------------------------------------------------------------------------

Document execute(const RunConfig& config) {
    const Params p(config.parameters);
    Document doc;
    const auto& sub = config.subcommand;
    if (sub == "fisher")
        doc = cmd_fisher(p);
    else if (sub == "gauss-stdmean")
        doc = cmd_gauss(p);
    else if (sub == "multinormal")
        doc = cmd_multinormal(p);
    else if (sub == "multinomial")
        doc = cmd_multinomial(p);
    else if (sub == "stein")
        doc = cmd_stein(p);
    else if (sub == "neyman-scott")
        doc = cmd_neyman_scott(p);
    else if (sub == "marginalization")
        doc = cmd_marginalization(p);
    else
        throw UsageError("unknown subcommand '" + sub + "'");

    std::vector<std::pair<std::string, std::string>> head{
        {"covprior_version", kVersion},
        {"subcommand", sub},
        {"seed", std::to_string(config.seed.value_or(kDefaultSeed))},
        {"rng", std::string(oracle::kRngVersion)},
    };
    const oracle::IntegrationSpec dflt;
    head.emplace_back("rel_tol", fmt(dflt.rel_tol));
    head.emplace_back("abs_tol", fmt(dflt.abs_tol));
    for (const auto& [k, v] : config.parameters) head.emplace_back("param." + k, v);
    if (!config.deterministic) head.emplace_back("timestamp", timestamp_utc());
    doc.metadata.insert(doc.metadata.begin(), head.begin(), head.end());
    return doc;
}

namespace {

struct OptionDef {
    const char* name;
    const char* help;
    bool flag = false;
};

const std::map<std::string, std::pair<const char*, std::vector<OptionDef>>>& subcommand_table() {
    static const std::map<std::string, std::pair<const char*, std::vector<OptionDef>>> table{
        {"fisher",
         {"Fisher information and Jeffreys density of a sampling model",
          {{"model", "gaussian-location | gaussian | gaussian-standardized | exponential | bernoulli | multinomial"},
           {"at", "parameter point, comma-separated"},
           {"grid", "parameter sweep min:max:count (one-parameter models)"},
           {"sigma", "fixed sigma of gaussian-location (default 1)"},
           {"cells", "multinomial cells (default 3)"},
           {"trials", "multinomial trials (default 1)"},
           {"richardson", "Richardson-extrapolated finite differences", true},
           {"score", "also report the score outer-product form", true}}}},
        {"gauss-stdmean",
         {"Evidence of standardized Gaussian data under the two reference priors",
          {{"n-min", "smallest sample size (default 2)"}, {"n-max", "largest sample size (default 25)"}}}},
        {"multinormal",
         {"Multinormal subset posterior, evidence and credible-ball probabilities",
          {{"m", "measurands (default 1)"},
           {"n", "repetitions per measurand (default 2)"},
           {"s2", "pooled biased variance (default 1)"},
           {"xbar", "sample means, comma-separated"},
           {"q", "subset size (default 1)"},
           {"q-max", "largest q in the probability table (default 12)"},
           {"sigma0", "lower bound of sigma in the prior (default 1)"},
           {"v-mu", "volume of the mean subspace (default 1)"}}}},
        {"multinomial",
         {"Model probabilities for a multinomial with an unknown number of cells",
          {{"counts", "observed counts, comma-separated"}, {"m-max", "largest number of cells"}}}},
        {"stein",
         {"Hierarchical model averages for the Stein problem",
          {{"x", "observations, comma-separated"},
           {"mu-grid", "mu grid for the m = 1 averaged density"},
           {"sx-grid", "sample standard deviation sweep"},
           {"m-list", "m values for the sweep (default 2,4,...,20)"}}}},
        {"neyman-scott",
         {"Neyman-Scott zeta0 posterior and averaged variance",
          {{"m", "number of pairs"},
           {"s2", "pooled variance (default 1)"},
           {"zeta0-grid", "zeta0 grid (default log:0.01:100:201)"}}}},
        {"marginalization",
         {"Posterior of the variance from s2 alone",
          {{"m", "degrees of freedom"}, {"s2", "sample variance (default 1)"}}}},
    };
    return table;
}

std::ostream* open_output(const RunConfig& cfg, std::ofstream& file) {
    std::string path = cfg.output_path;
    if (path == "-") return nullptr;
    if (path.empty()) {
        const char* dir = std::getenv(kOutputDirEnv);
        if (dir == nullptr || *dir == '\0') return nullptr;
        path = (std::filesystem::path(dir) / (cfg.subcommand + ext(cfg.format))).string();
    } else if (std::filesystem::path(path).is_relative()) {
        const char* dir = std::getenv(kOutputDirEnv);
        if (dir != nullptr && *dir != '\0') path = (std::filesystem::path(dir) / path).string();
    }
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    file.open(path, std::ios::binary);
    if (!file) throw UsageError("cannot open output '" + path + "'");
    return &file;
}

Document verify_document(const VerifyReport& rep, const RunConfig& cfg, const std::string& path) {
    Document doc;
    doc.metadata = {{"covprior_version", kVersion},
                    {"subcommand", "verify"},
                    {"fixtures", path},
                    {"rng", std::string(oracle::kRngVersion)}};
    if (cfg.seed) doc.metadata.emplace_back("seed", std::to_string(*cfg.seed));
    doc.metadata.emplace_back("entries", std::to_string(rep.entries.size()));
    doc.metadata.emplace_back("failures", std::to_string(rep.failures()));
    for (const auto& w : rep.warnings) doc.metadata.emplace_back("warning", w);
    if (!cfg.deterministic) doc.metadata.emplace_back("timestamp", timestamp_utc());
    Sheet s{"verify", {"name", "line", "expected", "computed", "deviation", "tolerance", "status", "message"}, {}};
    for (const auto& e : rep.entries)
        s.rows.push_back({e.name, static_cast<double>(e.line), e.expected, e.computed, e.deviation, e.tolerance,
                          std::string(e.pass ? "pass" : "fail"), e.message});
    doc.sheets.push_back(std::move(s));
    return doc;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Jeffreys priors, evidence and model averaging for classic prior paradoxes", "covprior"};
    app.require_subcommand(1);
    std::string format = "csv", output;
    std::uint64_t seed = 0;
    bool deterministic = false;
    app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("-o,--output", output, "output file ('-' for standard output)");
    auto* seed_opt = app.add_option("--seed", seed, "random seed");
    app.add_flag("--deterministic", deterministic, "omit the timestamp so identical runs are byte-identical");
    app.set_version_flag("--version", std::string(kVersion));

    std::map<std::string, std::map<std::string, std::string>> values;
    std::map<std::string, std::map<std::string, bool>> flags;
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, entry] : subcommand_table()) {
        auto* sc = app.add_subcommand(name, entry.first);
        subs[name] = sc;
        for (const auto& o : entry.second) {
            if (o.flag)
                sc->add_flag(std::string("--") + o.name, flags[name][o.name], o.help);
            else
                sc->add_option(std::string("--") + o.name, values[name][o.name], o.help);
        }
    }
    std::string fixture_path, generate_path;
    auto* vsub = app.add_subcommand("verify", "Re-run the oracle fixtures and compare with the stored values");
    vsub->add_option("fixtures", fixture_path, "fixture file");
    vsub->add_option("--generate", generate_path, "write a fresh fixture file computed by the oracles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        emit_error(err, "usage", e.get_name(), e.what(), kUsage);
        return kUsage;
    }

    RunConfig cfg;
    cfg.format = format == "json" ? Format::Json : Format::Csv;
    cfg.output_path = output;
    if (seed_opt->count() > 0) cfg.seed = seed;
    cfg.deterministic = deterministic;

    try {
        std::ofstream file;
        if (vsub->parsed()) {
            cfg.subcommand = "verify";
            if (!generate_path.empty()) {
                const auto fixtures = generate_fixtures(cfg.seed.value_or(kDefaultSeed));
                std::ofstream f(generate_path, std::ios::binary);
                if (!f) throw UsageError("cannot open '" + generate_path + "'");
                oracle::write_fixtures(f, fixtures);
                err << "wrote " << fixtures.size() << " fixtures to " << generate_path << '\n';
                if (fixture_path.empty()) return kOk;
            }
            if (fixture_path.empty()) throw UsageError("verify needs a fixture file");
            const auto file_in = oracle::read_fixture_file(fixture_path);
            const auto rep = verify(file_in, cfg.seed);
            for (const auto& w : rep.warnings) err << "warning: " << w << '\n';
            const auto doc = verify_document(rep, cfg, fixture_path);
            std::ostream* target = open_output(cfg, file);
            std::ostream& o = target ? *target : out;
            cfg.format == Format::Json ? write_json(o, doc) : write_csv(o, doc);
            if (rep.failures() > 0) {
                emit_error(err, "computation", "VerifyFailure",
                           std::to_string(rep.failures()) + " of " + std::to_string(rep.entries.size()) +
                               " fixtures failed",
                           kComputationFailure);
                return kComputationFailure;
            }
            return kOk;
        }
        for (const auto& [name, sc] : subs) {
            if (!sc->parsed()) continue;
            cfg.subcommand = name;
            for (const auto& o : subcommand_table().at(name).second) {
                if (o.flag) {
                    if (flags[name][o.name]) cfg.parameters[o.name] = "true";
                } else if (sc->get_option(std::string("--") + o.name)->count() > 0) {
                    cfg.parameters[o.name] = values[name][o.name];
                }
            }
        }
        const auto doc = execute(cfg);
        std::ostream* target = open_output(cfg, file);
        std::ostream& o = target ? *target : out;
        cfg.format == Format::Json ? write_json(o, doc) : write_csv(o, doc);
        return kOk;
    } catch (const UsageError& e) {
        emit_error(err, "usage", "UsageError", e.what(), kUsage);
        return kUsage;
    } catch (const ParseError& e) {
        emit_error(err, "usage", "ParseError", e.what(), kUsage);
        return kUsage;
    } catch (const DomainError& e) {
        emit_error(err, "usage", "DomainError", e.what(), kUsage);
        return kUsage;
    } catch (const ShapeError& e) {
        emit_error(err, "usage", "ShapeError", e.what(), kUsage);
        return kUsage;
    } catch (const Error& e) {
        emit_error(err, "computation", "NumericalError", e.what(), kComputationFailure);
        return kComputationFailure;
    } catch (const std::exception& e) {
        emit_error(err, "computation", "InternalError", e.what(), kComputationFailure);
        return kComputationFailure;
    }
}

}  // namespace covprior::cli
