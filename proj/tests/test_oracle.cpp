#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>
#include <vector>

#include "covprior/errors.hpp"
#include "covprior/finite_diff.hpp"
#include "covprior/fixtures.hpp"
#include "covprior/montecarlo.hpp"
#include "covprior/quadrature.hpp"
#include "covprior/rng.hpp"
#include "doctest.h"

using namespace covprior;
using namespace covprior::oracle;

namespace {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("philox4x32-10 known-answer vectors") {
    // Reference vectors published with the Random123 library.
    const auto zero = philox4x32_10({0, 0, 0, 0}, {0, 0});
    CHECK(zero == PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    const auto ones = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    CHECK(ones == PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    const auto pi = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    CHECK(pi == PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("counter rng streams are reproducible and distinct") {
    CounterRng a(42, 0), b(42, 0), c(42, 1);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        CHECK(x == b());
        differs |= x != c();
    }
    CHECK(differs);
    CounterRng u(1, 0);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("variate moments") {
    auto mean_of = [](auto draw) {
        return mc_expectation([&](CounterRng& r) { return draw(r); }, [](double v) { return v; }, 400000, 9);
    };
    const auto g = mean_of([](CounterRng& r) { return r.gamma(0.5); });
    CHECK(std::fabs(g.value - 0.5) < 4 * g.error);
    const auto g3 = mean_of([](CounterRng& r) { return r.gamma(3.7); });
    CHECK(std::fabs(g3.value - 3.7) < 4 * g3.error);
    const auto e = mean_of([](CounterRng& r) { return r.exponential(); });
    CHECK(std::fabs(e.value - 1.0) < 4 * e.error);
}

TEST_CASE("integrate_nd basic integrals") {
    IntegrationSpec spec;
    Box unit{{{0.0, 1.0}}, {}};
    const auto r = integrate_nd([](std::span<const double> x) { return x[0]; }, unit, spec);
    CHECK(std::fabs(r.value - 0.5) < 1e-12);
    CHECK(r.error <= 1e-12);

    const auto n = integrate_1d(normal_pdf, {-kInf, kInf}, spec);
    CHECK(std::fabs(n.value - 1.0) < 1e-10);
    const auto h = integrate_1d(normal_pdf, {0.0, kInf}, spec);
    CHECK(std::fabs(h.value - 0.5) < 1e-10);
    const auto l = integrate_1d(normal_pdf, {-kInf, 1.0}, spec);
    CHECK(std::fabs(l.value - 0.5 * std::erfc(-1.0 / std::sqrt(2.0))) < 1e-10);
    const double bp[] = {3.0};
    const auto shifted = integrate_1d([](double x) { return normal_pdf(x - 3.0); }, {-kInf, kInf}, spec, bp);
    CHECK(std::fabs(shifted.value - 1.0) < 1e-10);
}

TEST_CASE("two-dimensional box with an unbounded axis") {
    IntegrationSpec spec;
    spec.rel_tol = 1e-9;
    Box box{{{-kInf, kInf}, {0.0, kInf}}, {}};
    const auto r = integrate_nd(
        [](std::span<const double> x) { return normal_pdf(x[0]) * std::exp(-x[1]); }, box, spec);
    CHECK(std::fabs(r.value - 1.0) < 1e-9);
}

TEST_CASE("Dirichlet(1/2,1/2,1/2) normalization on the simplex") {
    const double expected = std::pow(std::tgamma(0.5), 3) / std::tgamma(1.5);
    auto f = [](std::span<const double> t) { return 1.0 / std::sqrt(t[0] * t[1] * t[2]); };
    IntegrationSpec q;
    q.rel_tol = 1e-7;
    q.abs_tol = 1e-10;
    const auto quad = integrate_nd(f, Simplex{3}, q);
    CHECK(std::fabs(quad.value - expected) < 1e-6 * expected);

    // Monte-Carlo with a smooth integrand on the same simplex: ∫ t0 t1 t2 = 1/5! * 1 (Dirichlet(2,2,2) constant).
    IntegrationSpec mc;
    mc.scheme = Scheme::MonteCarlo;
    mc.max_evals = 1'000'000;
    mc.seed = 11;
    auto g = [](std::span<const double> t) { return t[0] * t[1] * t[2]; };
    const auto est = integrate_nd(g, Simplex{3}, mc);
    const double exact = 1.0 / 120.0;
    CHECK(std::fabs(est.value - exact) < 3.0 * est.error);
    const auto quad_g = integrate_nd(g, Simplex{3}, q);
    CHECK(std::fabs(quad_g.value - exact) < 1e-10);
    // MC and quadrature agree within combined error bars.
    CHECK(std::fabs(est.value - quad_g.value) < 3.0 * (est.error + quad_g.error));
}

TEST_CASE("mc_expectation contracts") {
    const auto one = mc_expectation([](CounterRng& r) { return r.normal(); }, [](double) { return 1.0; }, 1000, 3);
    CHECK(one.value == 1.0);
    CHECK(one.error == 0.0);
    const auto score = mc_expectation([](CounterRng& r) { return r.normal(); }, [](double x) { return x * x; },
                                      1'000'000, 5);
    CHECK(std::fabs(score.value - 1.0) < 3.0 * score.error);
    const auto s1 = mc_expectation([](CounterRng& r) { return r.normal(); }, [](double x) { return x * x; },
                                   100'000, 5, 1);
    const auto s4 = mc_expectation([](CounterRng& r) { return r.normal(); }, [](double x) { return x * x; },
                                   100'000, 5, 4);
    CHECK(std::memcmp(&s1.value, &s4.value, sizeof(double)) == 0);
    CHECK(std::memcmp(&s1.error, &s4.error, sizeof(double)) == 0);
    CHECK_THROWS_AS(mc_expectation([](CounterRng& r) { return r.uniform(); }, [](double x) { return x; }, 1, 0),
                    DomainError);
}

TEST_CASE("quadrature refinement stays within the previous error bound") {
    auto f = [](double x) { return std::exp(-x) * std::cos(5.0 * x) / (1.0 + x * x); };
    IntegrationSpec spec;
    spec.abs_tol = 1e-6;
    spec.rel_tol = 1e-6;
    double prev_val = 0.0, prev_err = 0.0;
    for (int i = 0; i < 6; ++i) {
        const auto r = integrate_1d(f, {0.0, 20.0}, spec);
        if (i > 0) CHECK(std::fabs(r.value - prev_val) <= prev_err);
        prev_val = r.value;
        prev_err = r.error;
        spec.rel_tol *= 0.5;
        spec.abs_tol *= 0.5;
    }
}

TEST_CASE("integration failure carries the best estimate") {
    IntegrationSpec spec;
    spec.max_evals = 50;
    try {
        integrate_1d([](double x) { return std::sin(200.0 * x); }, {0.0, 10.0}, spec);
        FAIL("expected IntegrationError");
    } catch (const IntegrationError& e) {
        CHECK(e.evals_used() <= 50);
        CHECK(std::isfinite(e.best_estimate()));
    }
    IntegrationSpec bad;
    bad.rel_tol = 0.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("finite_diff_hessian") {
    const double zero[] = {0.0};
    const auto h = finite_diff_hessian([](std::span<const double> x) { return x[0] * x[0]; }, zero);
    CHECK(std::fabs(h(0, 0) - 2.0) < 1e-8);
    const double pt[] = {0.3, -1.2};
    const auto c = finite_diff_hessian([](std::span<const double>) { return 4.2; }, pt);
    CHECK(c.norm() == 0.0);

    // ln N(x|μ,σ): ∂μμ = -1/σ², ∂μσ = -2(x-μ)/σ³, ∂σσ = 1/σ² - 3(x-μ)²/σ⁴.
    const double x = 0.7;
    auto logn = [x](std::span<const double> a) {
        const double z = (x - a[0]) / a[1];
        return -0.5 * z * z - std::log(a[1]) - 0.5 * std::log(2.0 * std::numbers::pi);
    };
    const double at[] = {0.2, 1.3};
    const double mu = at[0], s = at[1], d = x - mu;
    const auto H = finite_diff_hessian(logn, at);
    CHECK(std::fabs(H(0, 0) - (-1.0 / (s * s))) < 1e-5);
    CHECK(std::fabs(H(0, 1) - (-2.0 * d / (s * s * s))) < 1e-5);
    CHECK(std::fabs(H(1, 1) - (1.0 / (s * s) - 3.0 * d * d / (s * s * s * s))) < 1e-5);
    CHECK(H(0, 1) == H(1, 0));

    StepPolicy rich;
    rich.richardson = true;
    const auto Hr = finite_diff_hessian(logn, at, rich);
    CHECK(std::fabs(Hr(1, 1) - (1.0 / (s * s) - 3.0 * d * d / (s * s * s * s))) < 1e-7);

    CHECK_THROWS_AS(finite_diff_hessian([](std::span<const double> a) { return std::log(a[0]); }, zero), DomainError);
}

TEST_CASE("step policy respects bounds") {
    StepPolicy p;
    p.lower = std::vector<double>{0.0};
    p.upper = std::vector<double>{1.0};
    CHECK(p.step(0, 0.5) == doctest::Approx(1e-4));
    CHECK(p.step(0, 1e-6) == doctest::Approx(1e-8));
    CHECK_THROWS_AS(p.step(0, 0.0), DomainError);
}

TEST_CASE("fixture files round-trip") {
    std::vector<Fixture> in(2);
    in[0].name = "k0";
    in[0].inputs = {{"x", "1"}};
    in[0].value = 0.42102443824070834;
    in[0].error = 1e-16;
    in[1].name = "mc";
    in[1].inputs = {{"counts", "2,1,5"}, {"m", "3"}};
    in[1].value = 1.0 / 3.0;
    in[1].error = 1e-4;
    in[1].seed = 18446744073709551615ull;
    std::stringstream ss;
    write_fixtures(ss, in);
    const auto out = parse_fixtures(ss);
    REQUIRE(out.entries.size() == 2);
    CHECK(out.warnings.empty());
    CHECK(out.entries[0].value == in[0].value);
    CHECK(out.entries[1].seed == in[1].seed);
    CHECK(out.entries[1].input_list("counts") == std::vector<double>{2, 1, 5});
    CHECK(out.entries[1].input_int("m") == 3);
}

TEST_CASE("fixture parse errors carry line numbers") {
    std::stringstream bad("#covprior-fixtures v1\nname\tx=1\t0.5\t0\t1\nbroken line\n");
    try {
        parse_fixtures(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    std::stringstream empty("");
    const auto f = parse_fixtures(empty);
    CHECK(f.entries.empty());
    CHECK(f.warnings.size() == 1);
    std::stringstream badval("a\t\tnope\t0\t1\n");
    CHECK_THROWS_AS(parse_fixtures(badval), ParseError);
}
