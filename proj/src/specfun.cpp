#include "covprior/specfun.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "covprior/errors.hpp"

namespace covprior::specfun {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxIter = 200000;

void require(bool ok, const char* what) {
    if (!ok) throw DomainError(what);
}

// Series for ln(γ(a,x)/x^a) = -x + ln Σ x^n / (a (a+1) ... (a+n)).
double log_scaled_lower_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kEps * 0.5) return std::log(sum) - x;
    }
    throw DomainError("incomplete gamma series did not converge");
}

// Continued fraction (modified Lentz) for ln Γ(a,x), valid for x >= a + 1.
double log_upper_cf(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return a * std::log(x) - x + std::log(h);
    }
    throw DomainError("incomplete gamma continued fraction did not converge");
}

// ∫_{z1}^{z2} t^{a-1} e^{-t} dt by composite 16-point Gauss-Legendre, used
// when both endpoints sit close together and differencing would cancel.
double incomplete_gamma_panels(double a, double z1, double z2) {
    static constexpr std::array<double, 8> nodes = {
        0.0950125098376374401853, 0.2816035507792589132305, 0.4580167776572273863424,
        0.6178762444026437484467, 0.7554044083550030338951, 0.8656312023878317438805,
        0.9445750230732325760779, 0.9894009349916499325962};
    static constexpr std::array<double, 8> weights = {
        0.1894506104550684962854, 0.1826034150449235888668, 0.1691565193950025381893,
        0.1495959888165767320815, 0.1246289712555338720525, 0.0951585116824927848099,
        0.0622535239386478928628, 0.0271524594117540948518};
    const double width = z2 - z1;
    const double scale = std::max(0.05, 0.25 * std::sqrt(std::max(a, 1.0)));
    const int panels = std::max(1, static_cast<int>(std::ceil(width / scale)));
    const double h = width / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = z1 + (p + 0.5) * h;
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double dx = 0.5 * h * nodes[i];
            s += weights[i] * (std::exp((a - 1.0) * std::log(mid - dx) - (mid - dx)) +
                               std::exp((a - 1.0) * std::log(mid + dx) - (mid + dx)));
        }
        total += 0.5 * h * s;
    }
    return total;
}

}  // namespace

double log_gamma(double x) {
    require(x > 0.0 && std::isfinite(x), "log_gamma: argument must be positive and finite");
    static constexpr std::array<double, 14> cof = {
        57.1562356658629235,     -59.5979603554754912,    14.1360979747417471,
        -0.491913816097620199,   .339946499848118887e-4,  .465236289270485756e-4,
        -.983744753048795646e-4, .158088703224912494e-3,  -.210264441724104883e-3,
        .217439618115212643e-3,  -.164318106536763890e-3, .844182239838527433e-4,
        -.261908384015814087e-4, .368991826595316234e-5};
    double y = x;
    double tmp = x + 5.24218750000000000;
    tmp = (x + 0.5) * std::log(tmp) - tmp;
    double ser = 0.999999999999997092;
    for (double c : cof) ser += c / ++y;
    return tmp + std::log(2.5066282746310005 * ser / x);
}

double gamma_fn(double x) { return std::exp(log_gamma(x)); }

double log_lower_incomplete_gamma_scaled(double a, double x) {
    require(a > 0.0, "incomplete gamma: a must be positive");
    require(x >= 0.0, "incomplete gamma: x must be non-negative");
    if (x == 0.0) return -std::log(a);
    if (x < a + 1.0) return log_scaled_lower_series(a, x);
    return log_lower_incomplete_gamma(a, x) - a * std::log(x);
}

double log_lower_incomplete_gamma(double a, double x) {
    require(a > 0.0, "incomplete gamma: a must be positive");
    require(x >= 0.0, "incomplete gamma: x must be non-negative");
    if (x == 0.0) return -kInf;
    if (std::isinf(x)) return log_gamma(a);
    if (x < a + 1.0) return a * std::log(x) + log_scaled_lower_series(a, x);
    const double lg = log_gamma(a);
    const double q = std::exp(log_upper_cf(a, x) - lg);
    return lg + std::log1p(-q);
}

double log_upper_incomplete_gamma(double a, double x) {
    require(a > 0.0, "incomplete gamma: a must be positive");
    require(x >= 0.0, "incomplete gamma: x must be non-negative");
    if (std::isinf(x)) return -kInf;
    if (x == 0.0) return log_gamma(a);
    if (x >= a + 1.0) return log_upper_cf(a, x);
    const double lg = log_gamma(a);
    const double p = std::exp(a * std::log(x) + log_scaled_lower_series(a, x) - lg);
    return lg + std::log1p(-p);
}

double regularized_lower_gamma(double a, double x) {
    if (x == 0.0) return 0.0;
    return std::exp(log_lower_incomplete_gamma(a, x) - log_gamma(a));
}

SpecFunResult gen_incomplete_gamma_with_error(double a, double z1, double z2) {
    require(a > 0.0, "gen_incomplete_gamma: a must be positive");
    require(z1 >= 0.0 && !std::isnan(z2), "gen_incomplete_gamma: bounds must be non-negative");
    require(z1 <= z2, "gen_incomplete_gamma: requires z1 <= z2");
    require(std::isfinite(z1), "gen_incomplete_gamma: z1 must be finite");
    if (z1 == z2) return {0.0, 0.0};

    const double split = a + 1.0;
    if (z1 == 0.0) {
        const double v = std::exp(log_lower_incomplete_gamma(a, z2));
        return {v, 16 * kEps * v};
    }
    if (std::isinf(z2)) {
        const double v = std::exp(log_upper_incomplete_gamma(a, z1));
        return {v, 16 * kEps * v};
    }
    if (z1 < split && z2 > split) {
        // Γ(a) - γ(a,z1) - Γ(a,z2): neither piece dominates near the split.
        const double lg = log_gamma(a);
        const double p1 = std::exp(log_lower_incomplete_gamma(a, z1) - lg);
        const double q2 = std::exp(log_upper_incomplete_gamma(a, z2) - lg);
        const double frac = 1.0 - p1 - q2;
        if (frac < 0.1) {
            const double v = incomplete_gamma_panels(a, z1, z2);
            return {v, 64 * kEps * v};
        }
        const double v = std::exp(lg) * frac;
        return {v, 32 * kEps * std::exp(lg)};
    }
    double l_hi = 0.0;
    double l_lo = 0.0;
    if (z2 <= split) {
        l_hi = log_lower_incomplete_gamma(a, z2);
        l_lo = log_lower_incomplete_gamma(a, z1);
    } else {
        l_hi = log_upper_incomplete_gamma(a, z1);
        l_lo = log_upper_incomplete_gamma(a, z2);
    }
    const double gap = l_hi - l_lo;
    if (gap < 0.1) {
        const double v = incomplete_gamma_panels(a, z1, z2);
        return {v, 64 * kEps * v};
    }
    const double v = std::exp(l_hi) * -std::expm1(-gap);
    return {v, 32 * kEps * std::exp(l_hi) * (1.0 + std::fabs(l_hi))};
}

double gen_incomplete_gamma(double a, double z1, double z2) {
    return gen_incomplete_gamma_with_error(a, z1, z2).value;
}

SpecFunResult bessel_k0_with_error(double x) {
    require(x > 0.0 && !std::isnan(x), "bessel_k0: argument must be positive");
    if (std::isinf(x)) return {0.0, 0.0};
    if (x <= 2.0) {
        // K0 = -(ln(x/2) + γ) I0 + Σ (x²/4)^k / (k!)² H_k
        const double q = 0.25 * x * x;
        double term = 1.0;
        double i0 = 1.0;
        double tail = 0.0;
        double harmonic = 0.0;
        for (int k = 1; k < 200; ++k) {
            term *= q / (static_cast<double>(k) * k);
            harmonic += 1.0 / k;
            i0 += term;
            tail += term * harmonic;
            if (term < kEps * 1e-3 * i0) break;
        }
        const double lead = -(std::log(0.5 * x) + std::numbers::egamma) * i0;
        const double v = lead + tail;
        return {v, 8 * kEps * (std::fabs(lead) + tail)};
    }
    // Steed's continued fraction (Temme's CF2) for order zero.
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 1; i < kMaxIter; ++i) {
        a -= 2 * i;
        c = -a * c / (i + 1.0);
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::fabs(dels / s) < kEps) break;
    }
    const double v = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
    return {v, 16 * kEps * v};
}

double bessel_k0(double x) { return bessel_k0_with_error(x).value; }

namespace {

// Plain Gauss series in w ∈ [0, 1/2); returns sum and an error bound.
SpecFunResult gauss_series(double a, double b, double c, double w) {
    double term = 1.0;
    double sum = 1.0;
    double abs_sum = 1.0;
    for (int k = 0; k < 20000; ++k) {
        const double ratio = (a + k) * (b + k) / ((c + k) * (k + 1.0)) * w;
        term *= ratio;
        sum += term;
        abs_sum += std::fabs(term);
        if (term == 0.0) return {sum, 4 * kEps * abs_sum};
        const double next_ratio = std::fabs((a + k + 1) * (b + k + 1) / ((c + k + 1) * (k + 2.0)) * w);
        if (next_ratio < 1.0 && std::fabs(term) < kEps * 0.25 * std::fabs(sum)) {
            const double tail = std::fabs(term) * next_ratio / (1.0 - next_ratio);
            return {sum, tail + 4 * kEps * abs_sum};
        }
    }
    throw DomainError("hyp2f1: series did not converge");
}

}  // namespace

SpecFunResult hyp2f1_with_error(double a, double b, double c, double z) {
    require(z >= -1.0 && z <= 0.0, "hyp2f1: z must lie in [-1, 0]");
    require(!(c <= 0.0 && c == std::floor(c)), "hyp2f1: c must not be a non-positive integer");
    if (z == 0.0) return {1.0, 0.0};
    // Pfaff: 2F1(a,b;c;z) = (1-z)^{-a} 2F1(a, c-b; c; z/(z-1)), and the a<->b mirror.
    const double w = z / (z - 1.0);
    const double one_minus_z = 1.0 - z;
    SpecFunResult first = gauss_series(a, c - b, c, w);
    const double fa = std::pow(one_minus_z, -a);
    first.value *= fa;
    first.est_abs_error *= std::fabs(fa);
    SpecFunResult second = gauss_series(c - a, b, c, w);
    const double fb = std::pow(one_minus_z, -b);
    second.value *= fb;
    second.est_abs_error *= std::fabs(fb);
    return first.est_abs_error <= second.est_abs_error ? first : second;
}

double hyp2f1(double a, double b, double c, double z) { return hyp2f1_with_error(a, b, c, z).value; }

double chi2_pdf(double dof, double x) {
    require(dof > 0.0, "chi2_pdf: dof must be positive");
    require(x > 0.0, "chi2_pdf: x must be positive");
    const double h = 0.5 * dof;
    return std::exp((h - 1.0) * std::log(x) - 0.5 * x - h * std::numbers::ln2 - log_gamma(h));
}

SpecFunResult noncentral_chi2_pdf_with_error(int dof, double noncentrality, double x) {
    require(dof >= 1, "noncentral_chi2_pdf: dof must be a positive integer");
    require(noncentrality >= 0.0 && std::isfinite(noncentrality),
            "noncentral_chi2_pdf: noncentrality must be non-negative");
    require(x > 0.0 && !std::isnan(x), "noncentral_chi2_pdf: x must be positive");
    if (std::isinf(x)) return {0.0, 0.0};
    const double k = dof;
    if (noncentrality == 0.0) {
        const double v = chi2_pdf(k, x);
        return {v, 8 * kEps * v};
    }
    const double half_lambda = 0.5 * noncentrality;
    const double log_half_lambda = std::log(half_lambda);
    auto log_term = [&](double j) {
        return -half_lambda + j * log_half_lambda - log_gamma(j + 1.0) +
               (0.5 * k + j - 1.0) * std::log(x) - 0.5 * x - (0.5 * k + j) * std::numbers::ln2 -
               log_gamma(0.5 * k + j);
    };
    // Successive term ratio λx / (4 (j+1)(k/2+j)) decreases in j; start where it crosses 1.
    const double target = noncentrality * x / 4.0;
    const double hk = 0.5 * k;
    const double disc = (hk + 1.0) * (hk + 1.0) - 4.0 * (hk - target);
    double start = 0.0;
    if (disc >= 0.0) start = std::max(0.0, std::floor((-(hk + 1.0) + std::sqrt(disc)) / 2.0));
    constexpr double rel_trunc = 1e-14;
    const double peak = log_term(start);
    double sum = 1.0;  // terms scaled by exp(-peak)
    double last_up = 1.0;
    for (double j = start + 1.0;; j += 1.0) {
        const double t = std::exp(log_term(j) - peak);
        sum += t;
        last_up = t;
        if (t < rel_trunc * sum) break;
        if (j - start > 1e6) throw DomainError("noncentral_chi2_pdf: series did not converge");
    }
    double last_down = 0.0;
    for (double j = start - 1.0; j >= 0.0; j -= 1.0) {
        const double t = std::exp(log_term(j) - peak);
        sum += t;
        last_down = t;
        if (t < rel_trunc * sum) break;
    }
    const double v = std::exp(peak) * sum;
    return {v, std::exp(peak) * (2.0 * (last_up + last_down) + 64 * kEps * sum)};
}

double noncentral_chi2_pdf(int dof, double noncentrality, double x) {
    return noncentral_chi2_pdf_with_error(dof, noncentrality, x).value;
}

}  // namespace covprior::specfun
