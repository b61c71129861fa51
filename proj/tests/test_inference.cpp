#include <cmath>
#include <numbers>

#include "covariance_suite.hpp"
#include "covprior/errors.hpp"
#include "covprior/inference.hpp"
#include "covprior/models.hpp"
#include "covprior/quadrature.hpp"
#include "doctest.h"

using namespace covprior;
using namespace covprior::inference;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Prior flat(bool proper = false) { return {"flat", [](const Vector&) { return 0.0; }, proper}; }

Evidence fixed(double z) { return {std::log(z), 0.0, false}; }

// Standardized sample of size 5: mean 0, biased standard deviation 1.
Dataset standardized5() {
    const double a = std::sqrt(2.0), b = std::sqrt(0.5);
    return {{-a}, {-b}, {0.0}, {b}, {a}};
}

double normal_pdf(double x, double m, double s) {
    const double z = (x - m) / s;
    return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

TEST_CASE("flat-prior Gaussian posterior on a grid") {
    const auto post = posterior_on_grid(models::gaussian_location(), flat(), {{0.0}}, {{-8.0, 8.0, 257}});
    CHECK(post.up_to_constant);
    CHECK(std::fabs(post.total_mass() - 1.0) < 1e-4);
    CHECK(std::fabs(post.mean()(0)) < 1e-4);
    CHECK(std::fabs(post.covariance()(0, 0) - 1.0) < 1e-4);
    CHECK(post.warnings.empty());
    // Evidence with a flat prior over the line is the datum's density integrated over mu: 1.
    CHECK(std::fabs(std::exp(post.log_evidence) - 1.0) < 1e-4);
}

TEST_CASE("grid diagnostics") {
    const auto leak = posterior_on_grid(models::gaussian_location(), flat(), {{0.0}}, {{-1.0, 1.0, 65}});
    CHECK(leak.warnings.size() == 1);
    CHECK_THROWS_AS(posterior_on_grid(models::exponential_rate(), flat(), {{1.0}}, {{-2.0, -1.0, 33}}),
                    EmptySupportError);
    CHECK_THROWS_AS(posterior_on_grid(models::gaussian_location(), flat(), {{0.0}}, {{-1.0, 1.0, 64}}), DomainError);
    CHECK_THROWS_AS(posterior_on_grid(models::gaussian_location(), flat(), {{0.0}}, {{1.0, 1.0, 65}}),
                    EmptySupportError);
    CHECK_THROWS_AS(posterior_on_grid(models::gaussian(), flat(), {{0.0}}, {{-1.0, 1.0, 65}}), ShapeError);
}

TEST_CASE("multinomial posterior mean under the Jeffreys prior") {
    const auto model = models::multinomial(3, 8);
    const Dataset counts{{2.0, 1.0, 5.0}};
    const auto prior = jeffreys_prior(model);
    const auto post = posterior_on_grid(model, prior, counts, {{0.0, 1.0, 257}, {0.0, 1.0, 257}});
    const Vector m = post.mean();
    CHECK(std::fabs(m(0) - 2.5 / 9.5) < 2e-4);
    CHECK(std::fabs(m(1) - 1.5 / 9.5) < 2e-4);
}

TEST_CASE("single Gaussian datum with a Gaussian prior") {
    const double x = 1.3, b = 0.4, a = 1.5;
    const Prior prior{"normal", [=](const Vector& mu) { return std::log(normal_pdf(mu(0), b, a)); }, true};
    const auto z = marginal_likelihood(models::gaussian_location(), prior, {{x}});
    const double expected =
        std::exp(-(x - b) * (x - b) / (2.0 * (1.0 + a * a))) / std::sqrt(2.0 * std::numbers::pi * (1.0 + a * a));
    CHECK(!z.up_to_constant);
    CHECK(std::fabs(z.value() / expected - 1.0) < 1e-9);
    CHECK(z.rel_error < 1e-8);
}

TEST_CASE("improper prior on the standardized Gaussian mean model") {
    const Prior ref{"1/sigma", [](const Vector& a) { return -std::log(a(1)); }, false};
    oracle::IntegrationSpec spec;
    spec.rel_tol = 1e-8;
    const auto z = marginal_likelihood(models::gaussian(), ref, standardized5(), spec);
    CHECK(z.up_to_constant);
    const double n = 5.0;
    const double closed = std::tgamma(n / 2 - 0.5) / (2.0 * std::sqrt(std::pow(n, n) * std::pow(std::numbers::pi, n - 1)));
    CHECK(std::fabs(z.value() / closed - 1.0) < 1e-6);
}

TEST_CASE("evidence edge cases") {
    CHECK_THROWS_AS(marginal_likelihood(models::gaussian_location(), flat(true), {{0.0}}, {}, {{1.0, 1.0}}),
                    EmptySupportError);
    try {
        marginal_likelihood(models::gaussian_location(), flat(true), {{0.0}}, {}, {{2.0, 2.0}});
    } catch (const EmptySupportError& e) {
        CHECK(e.evidence() == 0.0);
    }
    oracle::IntegrationSpec spec;
    spec.max_evals = 20000;
    CHECK_THROWS_AS(marginal_likelihood(models::exponential_rate(), flat(), {}, spec), DivergenceError);
    CHECK_THROWS_AS(marginal_likelihood(models::gaussian_location(), flat(), {{0.0}}, {}, {{-1.0, 1.0}, {0.0, 1.0}}),
                    ShapeError);
}

TEST_CASE("model posterior") {
    auto same = ModelEnsemble::uniform({"a", "b"}, {[] { return fixed(0.3); }, [] { return fixed(0.3); }});
    const auto w = model_posterior(same);
    CHECK(w.weight("a") == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(w.weight("b") == doctest::Approx(0.5).epsilon(1e-14));

    // Common scale factor leaves the weights unchanged, even at extreme magnitudes.
    std::vector<double> z{1e-3, 4e-3, 5e-3};
    for (double scale : {1.0, 1e-250, 1e250}) {
        ModelEnsemble e;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double lz = std::log(z[i]) + std::log(scale);
            e.members.push_back({std::to_string(i), [lz] { return Evidence{lz, 0.0, false}; }, 1.0 / 3.0});
        }
        const auto p = model_posterior(e);
        CHECK(p.weights[0] == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(p.weights[1] == doctest::Approx(0.4).epsilon(1e-12));
        CHECK(p.weights[2] == doctest::Approx(0.5).epsilon(1e-12));
        double sum = 0.0;
        for (double v : p.weights) sum += v;
        CHECK(std::fabs(sum - 1.0) < 1e-10);
    }

    auto mixed = ModelEnsemble::uniform({"proper", "improper"},
                                        {[] { return fixed(0.3); }, [] { return Evidence{0.0, 0.0, true}; }});
    CHECK_THROWS_AS(model_posterior(mixed), IncomparableEvidenceError);

    ModelEnsemble dup = ModelEnsemble::uniform({"a", "a"}, {[] { return fixed(1.0); }, [] { return fixed(1.0); }});
    CHECK_THROWS_AS(model_posterior(dup), DomainError);
    ModelEnsemble unbalanced{{{"a", [] { return fixed(1.0); }, 0.7}}};
    CHECK_THROWS_AS(model_posterior(unbalanced), DomainError);
    auto empty = ModelEnsemble::uniform({"a"}, {[]() -> Evidence { throw EmptySupportError("none"); }});
    CHECK_THROWS_AS(model_posterior(empty), EmptySupportError);
}

TEST_CASE("improper prior makes model comparison fail") {
    const auto model = models::gaussian();
    const Dataset data = standardized5();
    const Prior ref{"1/sigma", [](const Vector& a) { return -std::log(a(1)); }, false};
    oracle::IntegrationSpec spec;
    spec.rel_tol = 1e-6;
    auto e = ModelEnsemble::uniform({"m1", "m2"}, {[&] { return marginal_likelihood(model, ref, data, spec); },
                                                   [&] { return marginal_likelihood(model, ref, data, spec); }});
    CHECK_THROWS_AS(model_posterior(e), IncomparableEvidenceError);
}

TEST_CASE("continuous model index") {
    // Evidence exp(-(k-1)^2/2) with a flat hyper-prior on the line: standard normal in k.
    HyperPosterior1D h([](double k) { return Evidence{-0.5 * (k - 1.0) * (k - 1.0), 0.0, false}; },
                       [](double) { return 0.0; }, {-kInf, kInf});
    CHECK(h.density(1.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-9));
    CHECK(h.expectation([](double k) { return k; }).value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(h.expectation([](double k) { return k * k; }).value == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(h.density(-1e6) == 0.0);
    CHECK_THROWS_AS(HyperPosterior1D([](double) { return Evidence{0.0, 0.0, true}; }, [](double) { return 0.0; },
                                     {0.0, 1.0}),
                    IncomparableEvidenceError);
}

TEST_CASE("model averaging") {
    const MomentSummary s1{Vector::Constant(2, 1.0), Matrix::Identity(2, 2)};
    const MomentSummary s2{Vector::Constant(2, 3.0), 2.0 * Matrix::Identity(2, 2)};
    ModelPosterior delta{{"a", "b"}, {1.0, 0.0}, {0.0, 0.0}};
    const auto only = model_average({s1, s2}, delta);
    CHECK(only.mean.isApprox(s1.mean));
    CHECK(only.covariance.isApprox(s1.covariance));

    ModelPosterior half{{"a", "b"}, {0.5, 0.5}, {0.0, 0.0}};
    const auto same = model_average({s2, s2}, half);
    CHECK(same.mean.isApprox(s2.mean));
    CHECK(same.covariance.isApprox(s2.covariance));

    const auto mix = model_average({s1, s2}, half);
    CHECK(mix.mean(0) == doctest::Approx(2.0));
    // Law of total variance: 0.5*1 + 0.5*2 + spread of the means (1).
    CHECK(mix.covariance(0, 0) == doctest::Approx(2.5));

    const MomentSummary bad{Vector::Constant(3, 0.0), Matrix::Identity(3, 3)};
    CHECK_THROWS_AS(model_average({s1, bad}, half), ShapeError);
    CHECK_THROWS_AS(model_average({s1}, half), ShapeError);

    const DensitySummary d1{{0.0, 1.0, 2.0}, {0.2, 0.6, 0.2}};
    const DensitySummary d2{{0.0, 1.0, 2.0}, {0.6, 0.2, 0.2}};
    const auto dm = model_average({d1, d2}, half);
    CHECK(dm.density[0] == doctest::Approx(0.4));
    const DensitySummary d3{{0.0, 1.5, 2.0}, {0.6, 0.2, 0.2}};
    CHECK_THROWS_AS(model_average({d1, d3}, half), ShapeError);
}

TEST_CASE("averaging Gaussian-prior posteriors over the hyper-posterior recovers N(x, 1)") {
    // One datum x; prior N(b, a); hyper-posterior a/(sqrt(2 pi)(1+a^2)^2) exp(-(b-x)^2/(2(1+a^2))).
    const double x = 0.8;
    oracle::IntegrationSpec spec;
    spec.rel_tol = 1e-8;
    for (double mu : {-1.0, 0.3, 0.8, 2.5}) {
        auto f = [&](std::span<const double> t) {
            const double b = t[0], a = t[1], a2 = a * a;
            const double hyper = a / (std::sqrt(2.0 * std::numbers::pi) * (1.0 + a2) * (1.0 + a2)) *
                                 std::exp(-(b - x) * (b - x) / (2.0 * (1.0 + a2)));
            const double post = normal_pdf(mu, (x * a2 + b) / (1.0 + a2), a / std::sqrt(1.0 + a2));
            return hyper * post;
        };
        const auto r = oracle::integrate_nd(f, oracle::Box{{{-kInf, kInf}, {0.0, kInf}}, {{x}, {}}}, spec);
        CHECK(std::fabs(r.value - normal_pdf(mu, x, 1.0)) < 1e-7);
    }
}

TEST_CASE("posterior and evidence are invariant under reparameterization") {
    for (const auto& c : covsuite::cases()) {
        CAPTURE(c.label);
        const auto r = covsuite::run(c);
        CHECK(r.tv < 1e-4);
        CHECK(r.evidence_rel_diff < 1e-6);
    }
}

TEST_CASE("total variation") {
    const std::vector<double> g{0.0, 1.0, 2.0};
    CHECK(total_variation(g, {0.0, 1.0, 0.0}, {0.0, 1.0, 0.0}) == 0.0);
    CHECK(total_variation(g, {1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(total_variation(g, {1.0}, {1.0, 2.0, 3.0}), ShapeError);
}
