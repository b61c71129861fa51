#include <cmath>
#include <numbers>
#include <vector>

#include "covprior/errors.hpp"
#include "covprior/quadrature.hpp"
#include "covprior/rng.hpp"
#include "covprior/specfun.hpp"
#include "doctest.h"

using namespace covprior;
using namespace covprior::specfun;
using covprior::oracle::integrate_1d;
using covprior::oracle::IntegrationSpec;

namespace {

bool rel_close(double a, double b, double tol) { return std::fabs(a - b) <= tol * std::fabs(b); }

// Direct Gauss series in extended precision.
long double hyp2f1_series(long double a, long double b, long double c, long double z, int terms) {
    long double term = 1.0L;
    long double sum = 1.0L;
    for (int k = 0; k < terms; ++k) {
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * z;
        sum += term;
    }
    return sum;
}

IntegrationSpec tight() {
    IntegrationSpec s;
    s.abs_tol = 1e-15;
    s.rel_tol = 1e-13;
    return s;
}

}  // namespace

TEST_CASE("log_gamma fixed points") {
    CHECK(log_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(rel_close(log_gamma(0.5), 0.5 * std::log(std::numbers::pi), 1e-13));
    CHECK(rel_close(log_gamma(10.0), std::log(362880.0), 1e-13));
    CHECK_THROWS_AS(log_gamma(0.0), DomainError);
    CHECK_THROWS_AS(log_gamma(-1.5), DomainError);
}

TEST_CASE("log_gamma against std::lgamma over its documented range") {
    for (double x = 1e-3; x <= 1e6; x *= 1.37) {
        const double ref = std::lgamma(x);
        const double got = log_gamma(x);
        // Near the zeros of ln Γ (x = 1, 2) compare absolutely.
        CHECK(std::fabs(got - ref) <= 1e-12 * std::max(1.0, std::fabs(ref)));
    }
}

TEST_CASE("gamma recurrence") {
    for (double x = 0.5; x <= 100.0; x += 0.37) {
        const double lhs = log_gamma(x + 1.0);
        const double rhs = std::log(x) + log_gamma(x);
        CHECK(std::fabs(std::exp(lhs - rhs) - 1.0) <= 1e-12);
    }
}

TEST_CASE("gen_incomplete_gamma fixed points") {
    CHECK(rel_close(gen_incomplete_gamma(3.0, 0.0, kInf), 2.0, 1e-12));
    CHECK(rel_close(gen_incomplete_gamma(1.0, 0.0, 1.0), 1.0 - std::exp(-1.0), 1e-12));
    CHECK(gen_incomplete_gamma(2.0, 1.5, 1.5) == 0.0);
    CHECK_THROWS_AS(gen_incomplete_gamma(0.0, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS(gen_incomplete_gamma(1.0, 2.0, 1.0), DomainError);
}

TEST_CASE("gen_incomplete_gamma matches quadrature oracle") {
    // Oracle value frozen from adaptive quadrature at 1e-13 relative.
    constexpr double kFrozen = 1.1057022844865663;
    const auto q = integrate_1d([](double t) { return std::pow(t, 1.5) * std::exp(-t); }, {0.3, 4.0}, tight());
    CHECK(rel_close(q.value, kFrozen, 1e-12));
    CHECK(rel_close(gen_incomplete_gamma(2.5, 0.3, 4.0), kFrozen, 1e-10));

    struct Case {
        double a, z1, z2;
    };
    for (const Case c : {Case{0.5, 0.0, 0.1}, Case{0.5, 0.2, 30.0}, Case{5.0, 4.9, 5.1}, Case{12.0, 0.0, 11.0},
                         Case{12.0, 13.0, 40.0}, Case{1.5, 2.0, 2.0001}, Case{40.0, 10.0, 50.0}}) {
        const double ref = integrate_1d([&](double t) { return std::pow(t, c.a - 1.0) * std::exp(-t); },
                                        {c.z1, c.z2}, tight())
                               .value;
        CHECK(rel_close(gen_incomplete_gamma(c.a, c.z1, c.z2), ref, 1e-10));
    }
}

TEST_CASE("lower + upper incomplete gamma = Γ(a)") {
    for (double a : {0.1, 0.5, 1.0, 2.5, 7.0, 30.0, 80.0}) {
        for (double z : {1e-4, 0.3, 1.0, 3.0, 10.0, 60.0}) {
            const double sum = gen_incomplete_gamma(a, 0.0, z) + gen_incomplete_gamma(a, z, kInf);
            CHECK(rel_close(sum, gamma_fn(a), 1e-10));
        }
    }
}

TEST_CASE("scaled lower incomplete gamma at zero") {
    CHECK(rel_close(log_lower_incomplete_gamma_scaled(2.5, 0.0), -std::log(2.5), 1e-14));
    const double x = 1e-9;
    CHECK(std::fabs(log_lower_incomplete_gamma_scaled(2.5, x) + std::log(2.5)) < 1e-8);
}

TEST_CASE("bessel_k0 against the integral representation") {
    // K0(x) = ∫_0^∞ exp(-x cosh t) dt; frozen from that oracle.
    constexpr double kK0At1 = 0.42102443824070834;
    constexpr double kK0AtHalf = 0.92441907122766587;
    auto oracle = [](double x) {
        IntegrationSpec spec = tight();
        spec.abs_tol = 1e-300;
        return integrate_1d([x](double t) { return std::exp(-x * std::cosh(t)); }, {0.0, kInf}, spec).value;
    };
    CHECK(rel_close(oracle(1.0), kK0At1, 1e-12));
    CHECK(rel_close(oracle(0.5), kK0AtHalf, 1e-12));
    CHECK(rel_close(bessel_k0(1.0), kK0At1, 1e-10));
    CHECK(rel_close(bessel_k0(0.5), kK0AtHalf, 1e-10));
    for (double x : {1e-3, 0.01, 0.3, 1.9, 2.0, 2.1, 5.0, 17.0, 50.0}) CHECK(rel_close(bessel_k0(x), oracle(x), 1e-10));
    CHECK(bessel_k0(30.0) < 1e-12);
    CHECK(bessel_k0(30.0) < std::exp(-30.0) * std::sqrt(std::numbers::pi / 60.0));
    CHECK_THROWS_AS(bessel_k0(0.0), DomainError);
}

TEST_CASE("hyp2f1 fixed points and series oracle") {
    CHECK(hyp2f1(0.3, 2.0, 1.7, 0.0) == 1.0);
    CHECK(rel_close(hyp2f1(1.0, 1.0, 2.0, -0.5), std::log(1.5) / 0.5, 1e-12));
    // Frozen from a 200-term long-double series.
    constexpr double kFrozen = 0.82377055597086357;
    CHECK(rel_close(static_cast<double>(hyp2f1_series(0.5L, 6.5L, 1.5L, -0.1L, 200)), kFrozen, 1e-14));
    CHECK(rel_close(hyp2f1(0.5, 6.5, 1.5, -0.1), kFrozen, 1e-9));
    // Arguments used by the credible-ball probability, z = 1/(2 - mn).
    for (int mn = 3; mn <= 40; ++mn)
        for (int q = 1; q <= 12; ++q) {
            const double a = q / 2.0, b = (mn + q) / 2.0, c = (q + 2) / 2.0, z = 1.0 / (2.0 - mn);
            const double got = hyp2f1(a, b, c, z);
            CHECK(std::isfinite(got));
            if (mn >= 12) CHECK(rel_close(got, static_cast<double>(hyp2f1_series(a, b, c, z, 4000)), 1e-9));
        }
    CHECK_THROWS_AS(hyp2f1(1.0, 1.0, 2.0, 0.5), DomainError);
    CHECK_THROWS_AS(hyp2f1(1.0, 1.0, 2.0, -1.5), DomainError);
    CHECK(rel_close(hyp2f1(1.0, 1.0, 2.0, -1.0), std::log(2.0), 1e-12));
    CHECK_THROWS_AS(hyp2f1(1.0, 1.0, -2.0, -0.5), DomainError);
}

TEST_CASE("noncentral chi-square density") {
    CHECK(rel_close(noncentral_chi2_pdf(1, 0.0, 1.0), std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi), 1e-13));
    // dof = 1 has the closed form cosh(√(λx)) e^{-(x+λ)/2} / √(2πx).
    auto closed = [](double lam, double x) {
        return std::cosh(std::sqrt(lam * x)) * std::exp(-0.5 * (x + lam)) / std::sqrt(2.0 * std::numbers::pi * x);
    };
    constexpr double kFrozen = 0.11922476592785651;
    CHECK(rel_close(closed(4.0, 2.0), kFrozen, 1e-13));
    CHECK(rel_close(noncentral_chi2_pdf(1, 4.0, 2.0), kFrozen, 1e-12));
    for (double lam : {0.3, 1.0, 9.0, 25.0})
        for (double x : {0.01, 0.5, 3.0, 20.0}) CHECK(rel_close(noncentral_chi2_pdf(1, lam, x), closed(lam, x), 1e-11));
    CHECK_THROWS_AS(noncentral_chi2_pdf(1, 1.0, 0.0), DomainError);
}

TEST_CASE("noncentral chi-square: Monte-Carlo histogram of (Z+2)^2") {
    oracle::CounterRng rng(20240501, 0);
    const int n = 10'000'000;
    const double half = 0.01;
    long hits = 0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal() + 2.0;
        const double y = v * v;
        if (std::fabs(y - 2.0) < half) ++hits;
    }
    const double p = static_cast<double>(hits) / n;
    const double est = p / (2.0 * half);
    const double se = std::sqrt(p * (1.0 - p) / n) / (2.0 * half);
    CHECK(std::fabs(est - noncentral_chi2_pdf(1, 4.0, 2.0)) < 3.0 * se);
}

TEST_CASE("noncentral chi-square normalization and mean") {
    IntegrationSpec spec;
    spec.abs_tol = 1e-12;
    spec.rel_tol = 1e-10;
    for (int dof = 1; dof <= 30; ++dof)
        for (double lam : {0.0, 1.0, 10.0}) {
            const double mode = std::max(0.0, dof - 2.0 + lam);
            const double bp[] = {1.0, mode};
            const auto r = integrate_1d([&](double x) { return x <= 0.0 ? 0.0 : noncentral_chi2_pdf(dof, lam, x); },
                                        {0.0, kInf}, spec, bp);
            CHECK(std::fabs(r.value - 1.0) < 1e-8);
        }
    for (double x0 : {0.0, 0.7, 2.0, 4.0}) {
        const auto r = integrate_1d([&](double x) { return x <= 0.0 ? 0.0 : x * noncentral_chi2_pdf(1, x0 * x0, x); },
                                    {0.0, kInf}, spec);
        CHECK(rel_close(r.value, 1.0 + x0 * x0, 1e-8));
    }
}

TEST_CASE("fuzz: in-domain outputs are finite") {
    oracle::CounterRng rng(7, 3);
    for (int i = 0; i < 10000; ++i) {
        const double a = 1e-3 + 100.0 * rng.uniform();
        const double z1 = 50.0 * rng.uniform();
        const double z2 = z1 + 50.0 * rng.uniform();
        const double x = 1e-3 + 49.999 * rng.uniform();
        const double z = -0.999 * rng.uniform();
        CHECK(std::isfinite(log_gamma(a)));
        CHECK(std::isfinite(gen_incomplete_gamma(a, z1, z2)));
        CHECK(std::isfinite(bessel_k0(x)));
        CHECK(std::isfinite(hyp2f1(0.5 + 6 * rng.uniform(), 0.5 + 30 * rng.uniform(), 1.5 + 6 * rng.uniform(), z)));
        CHECK(std::isfinite(noncentral_chi2_pdf(1 + static_cast<int>(30 * rng.uniform()), 30 * rng.uniform(), x)));
    }
}
