#include "covprior/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "covprior/errors.hpp"
#include "covprior/montecarlo.hpp"

namespace covprior::oracle {
namespace {

// QUADPACK qk21 abscissae and weights.
constexpr double kXgk[11] = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
constexpr double kWgk[11] = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600525478406, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
constexpr double kWg[5] = {0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
                           0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
                           0.295524224714752870173892994651338};

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = std::numeric_limits<double>::min();

// Maps the integration variable t of a segment onto x, with dx/dt.
enum class Map { Identity, Upper, Lower, Both };

struct Transform {
    Map map = Map::Identity;
    double origin = 0.0;

    double x(double t, double& jac) const {
        switch (map) {
            case Map::Identity:
                jac = 1.0;
                return t;
            case Map::Upper: {
                const double d = 1.0 - t;
                jac = 1.0 / (d * d);
                return origin + t / d;
            }
            case Map::Lower: {
                const double d = 1.0 - t;
                jac = 1.0 / (d * d);
                return origin - t / d;
            }
            case Map::Both: {
                const double d = 1.0 - t * t;
                jac = (1.0 + t * t) / (d * d);
                return t / d;
            }
        }
        jac = 1.0;
        return t;
    }

    double t_of(double x) const {
        switch (map) {
            case Map::Identity:
                return x;
            case Map::Upper: {
                const double u = x - origin;
                return u / (1.0 + u);
            }
            case Map::Lower: {
                const double u = origin - x;
                return u / (1.0 + u);
            }
            case Map::Both:
                if (x == 0.0) return 0.0;
                return 2.0 * x / (1.0 + std::sqrt(1.0 + 4.0 * x * x));
        }
        return x;
    }
};

struct Segment {
    double a = 0.0;
    double b = 0.0;
    std::vector<double> value;
    std::vector<double> error;
};

class Engine {
public:
    Engine(const VectorIntegrand& f, std::size_t k, Transform tr)
        : f_(f), k_(k), tr_(tr), fc_(k), fv1_(11 * k), fv2_(11 * k) {}

    // 21-point Gauss-Kronrod rule with the QUADPACK error heuristic.
    void rule(Segment& s) {
        const double centr = 0.5 * (s.a + s.b);
        const double hlgth = 0.5 * (s.b - s.a);
        const double dhlgth = std::fabs(hlgth);
        std::vector<double> resg(k_, 0.0), resk(k_), resabs(k_);

        eval(centr, fc_);
        for (std::size_t c = 0; c < k_; ++c) {
            resk[c] = kWgk[10] * fc_[c];
            resabs[c] = std::fabs(resk[c]);
        }
        for (int j = 0; j < 10; ++j) {
            const double absc = hlgth * kXgk[j];
            std::span<double> v1(&fv1_[j * k_], k_);
            std::span<double> v2(&fv2_[j * k_], k_);
            eval(inside(centr - absc, s.a, s.b), v1);
            eval(inside(centr + absc, s.a, s.b), v2);
            for (std::size_t c = 0; c < k_; ++c) {
                const double sum = v1[c] + v2[c];
                resk[c] += kWgk[j] * sum;
                resabs[c] += kWgk[j] * (std::fabs(v1[c]) + std::fabs(v2[c]));
                if (j % 2 == 1) resg[c] += kWg[j / 2] * sum;
            }
        }
        s.value.assign(k_, 0.0);
        s.error.assign(k_, 0.0);
        for (std::size_t c = 0; c < k_; ++c) {
            const double reskh = 0.5 * resk[c];
            double asc = kWgk[10] * std::fabs(fc_[c] - reskh);
            for (int j = 0; j < 10; ++j)
                asc += kWgk[j] * (std::fabs(fv1_[j * k_ + c] - reskh) + std::fabs(fv2_[j * k_ + c] - reskh));
            const double result = resk[c] * hlgth;
            const double rabs = resabs[c] * dhlgth;
            asc *= dhlgth;
            double err = std::fabs((resk[c] - resg[c]) * hlgth);
            if (asc != 0.0 && err != 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
            if (rabs > kTiny / (50.0 * kEps)) err = std::max(50.0 * kEps * rabs, err);
            s.value[c] = result;
            s.error[c] = err;
        }
        evals_ += 21;
    }

    std::size_t evals() const { return evals_; }

private:
    // Nodes of very narrow segments can round onto an endpoint, where an
    // integrable singularity may sit; keep them strictly inside.
    static double inside(double t, double a, double b) {
        if (t <= a) return std::nextafter(a, b);
        if (t >= b) return std::nextafter(b, a);
        return t;
    }

    void eval(double t, std::span<double> out) {
        double jac = 1.0;
        const double x = tr_.x(t, jac);
        if (!std::isfinite(x) || !std::isfinite(jac)) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        f_(x, out);
        for (std::size_t c = 0; c < k_; ++c) {
            double v = out[c] * jac;
            if (std::isnan(v) || std::isinf(v)) {
                // Far tails of a mapped infinite range can produce inf*0.
                if (tr_.map != Map::Identity && out[c] == 0.0) v = 0.0;
                else
                    throw DomainError("integrand is not finite at x = " + std::to_string(x));
            }
            out[c] = v;
        }
    }

    const VectorIntegrand& f_;
    std::size_t k_;
    Transform tr_;
    std::vector<double> fc_, fv1_, fv2_;
    std::size_t evals_ = 0;
};

Transform choose_transform(Interval r) {
    const bool lo_inf = std::isinf(r.lo);
    const bool hi_inf = std::isinf(r.hi);
    if (lo_inf && hi_inf) return {Map::Both, 0.0};
    if (hi_inf) return {Map::Upper, r.lo};
    if (lo_inf) return {Map::Lower, r.hi};
    return {Map::Identity, 0.0};
}

// Start/end of the integration variable t for the mapped range.
void t_range(const Transform& tr, Interval r, double& a, double& b) {
    switch (tr.map) {
        case Map::Identity:
            a = r.lo;
            b = r.hi;
            return;
        case Map::Upper:
            a = 0.0;
            b = 1.0;
            return;
        case Map::Lower:
            // x decreases as t increases: ∫_{-inf}^{b} = ∫_0^1 f(x(t)) |dx/dt| dt.
            a = 0.0;
            b = 1.0;
            return;
        case Map::Both:
            a = -1.0;
            b = 1.0;
            return;
    }
}

}  // namespace

static VectorEstimate adaptive(const VectorIntegrand& f, std::size_t k, std::size_t k_conv, Interval range,
                               const IntegrationSpec& spec, std::span<const double> breakpoints) {
    spec.validate();
    if (!(range.lo <= range.hi)) throw DomainError("integration range has lo > hi");
    if (std::isnan(range.lo) || std::isnan(range.hi)) throw DomainError("integration range is NaN");
    VectorEstimate out;
    out.value.assign(k, 0.0);
    out.error.assign(k, 0.0);
    if (range.lo == range.hi) return out;

    const Transform tr = choose_transform(range);
    double ta, tb;
    t_range(tr, range, ta, tb);

    std::vector<double> cuts{ta, tb};
    for (double x : breakpoints) {
        if (!(x > range.lo && x < range.hi)) continue;
        const double t = tr.t_of(x);
        if (t > ta && t < tb) cuts.push_back(t);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    Engine eng(f, k, tr);
    std::vector<double> total(k, 0.0), total_err(k, 0.0);
    // Components share one tolerance scaled by the largest of them, so a
    // component that integrates to zero does not demand abs_tol on its own.
    auto tol_of = [&](std::size_t) {
        double scale = 0.0;
        for (std::size_t c = 0; c < k_conv; ++c) scale = std::max(scale, std::fabs(total[c]));
        return std::max(spec.abs_tol, spec.rel_tol * scale);
    };
    auto score_of = [&](const Segment& s) {
        double sc = 0.0;
        for (std::size_t c = 0; c < k_conv; ++c) sc = std::max(sc, s.error[c] / tol_of(c));
        return sc;
    };

    // Segments live in `pool`; the heap orders indices of live segments by score.
    std::vector<Segment> pool;
    std::vector<bool> live;
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry> heap;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        Segment seg;
        seg.a = cuts[i];
        seg.b = cuts[i + 1];
        eng.rule(seg);
        for (std::size_t c = 0; c < k; ++c) {
            total[c] += seg.value[c];
            total_err[c] += seg.error[c];
        }
        pool.push_back(std::move(seg));
        live.push_back(true);
    }
    for (std::size_t i = 0; i < pool.size(); ++i) heap.emplace(score_of(pool[i]), i);

    auto converged = [&] {
        for (std::size_t c = 0; c < k_conv; ++c)
            if (total_err[c] > tol_of(c)) return false;
        return true;
    };
    // Exact re-summation in position order; deterministic and free of drift.
    auto resum = [&] {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (live[i]) idx.push_back(i);
        std::sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) { return pool[l].a < pool[r].a; });
        std::fill(total.begin(), total.end(), 0.0);
        std::fill(total_err.begin(), total_err.end(), 0.0);
        for (std::size_t i : idx)
            for (std::size_t c = 0; c < k; ++c) {
                total[c] += pool[i].value[c];
                total_err[c] += pool[i].error[c];
            }
    };

    bool exhausted = false;
    std::vector<double> stuck_err(k, 0.0);  // error locked in segments too narrow to split
    for (;;) {
        if (converged()) {
            resum();
            if (converged()) break;
        }
        if (heap.empty()) break;
        bool stuck = false;
        for (std::size_t c = 0; c < k_conv; ++c)
            if (stuck_err[c] > tol_of(c)) stuck = true;
        if (stuck) break;
        if (eng.evals() + 42 > spec.max_evals) {
            exhausted = true;
            break;
        }
        const std::size_t i = heap.top().second;
        heap.pop();
        const double a = pool[i].a;
        const double b = pool[i].b;
        const double mid = 0.5 * (a + b);
        const double width = std::fabs(b - a);
        if (width <= 4.0 * kEps * std::max(std::fabs(a), std::fabs(b)) || width < 1e3 * kTiny || mid == a ||
            mid == b) {
            for (std::size_t c = 0; c < k; ++c) stuck_err[c] += pool[i].error[c];
            continue;
        }
        Segment l, r;
        l.a = a;
        l.b = mid;
        r.a = mid;
        r.b = b;
        eng.rule(l);
        eng.rule(r);
        for (std::size_t c = 0; c < k; ++c) {
            total[c] += l.value[c] + r.value[c] - pool[i].value[c];
            total_err[c] += l.error[c] + r.error[c] - pool[i].error[c];
        }
        live[i] = false;
        pool[i].value.clear();
        pool[i].error.clear();
        const double sl = score_of(l);
        const double sr = score_of(r);
        pool.push_back(std::move(l));
        live.push_back(true);
        heap.emplace(sl, pool.size() - 1);
        pool.push_back(std::move(r));
        live.push_back(true);
        heap.emplace(sr, pool.size() - 1);
    }
    resum();
    out.value = total;
    out.error = total_err;
    out.evals_used = eng.evals();
    if (!converged()) {
        std::size_t worst = 0;
        double ratio = 0.0;
        for (std::size_t c = 0; c < k_conv; ++c) {
            const double q = total_err[c] / tol_of(c);
            if (q > ratio) {
                ratio = q;
                worst = c;
            }
        }
        const std::string why = exhausted ? "max_evals exhausted" : "round-off limits further subdivision";
        throw IntegrationError("adaptive quadrature did not meet tolerance (" + why + ")", total[worst],
                               total_err[worst], eng.evals());
    }
    return out;
}

const char* to_string(Scheme s) noexcept {
    switch (s) {
        case Scheme::AdaptiveQuadrature:
            return "adaptive-quadrature";
        case Scheme::MonteCarlo:
            return "monte-carlo";
        case Scheme::ExactSum:
            return "exact-sum";
    }
    return "unknown";
}

void IntegrationSpec::validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw DomainError("integration tolerances must be positive");
    if (max_evals == 0) throw DomainError("max_evals must be positive");
}

IntegrationSpec IntegrationSpec::tightened(double factor) const {
    IntegrationSpec s = *this;
    s.abs_tol *= factor;
    s.rel_tol *= factor;
    return s;
}

OracleEstimate integrate_1d(const ScalarIntegrand& f, Interval range, const IntegrationSpec& spec,
                            std::span<const double> breakpoints) {
    const VectorIntegrand vf = [&f](double x, std::span<double> out) { out[0] = f(x); };
    const VectorEstimate v = adaptive(vf, 1, 1, range, spec, breakpoints);
    return {v.value[0], v.error[0], v.evals_used, Scheme::AdaptiveQuadrature};
}

VectorEstimate integrate_1d_vector(const VectorIntegrand& f, std::size_t k, Interval range,
                                   const IntegrationSpec& spec, std::span<const double> breakpoints) {
    if (k == 0) throw ShapeError("integrate_1d_vector: zero components");
    return adaptive(f, k, k, range, spec, breakpoints);
}

namespace {

// Integrates axes [axis, dim) with the leading coordinates fixed in `point`.
// Output layout: k values followed by k accumulated inner error bounds.
void nested(const PointVectorIntegrand& f, std::size_t k, const Box& box, const IntegrationSpec& spec,
            std::size_t axis, std::vector<double>& point, std::span<double> out, std::size_t& evals) {
    const std::size_t dim = box.axes.size();
    const std::span<const double> bps =
        axis < box.breakpoints.size() ? std::span<const double>(box.breakpoints[axis]) : std::span<const double>();
    if (axis + 1 == dim) {
        const VectorIntegrand g = [&](double x, std::span<double> o) {
            point[axis] = x;
            f(point, o);
        };
        const VectorEstimate r = adaptive(g, k, k, box.axes[axis], spec, bps);
        for (std::size_t c = 0; c < k; ++c) {
            out[c] = r.value[c];
            out[k + c] = r.error[c];
        }
        evals += r.evals_used;
        return;
    }
    const IntegrationSpec inner = spec.tightened(0.1);
    const VectorIntegrand g = [&](double x, std::span<double> o) {
        point[axis] = x;
        nested(f, k, box, inner, axis + 1, point, o, evals);
    };
    const VectorEstimate r = adaptive(g, 2 * k, k, box.axes[axis], spec, bps);
    for (std::size_t c = 0; c < k; ++c) {
        out[c] = r.value[c];
        out[k + c] = r.error[c] + std::fabs(r.value[k + c]);
    }
}

}  // namespace

VectorEstimate integrate_box_vector(const PointVectorIntegrand& f, std::size_t k, const Box& box,
                                    const IntegrationSpec& spec) {
    spec.validate();
    if (box.axes.empty()) throw ShapeError("integrate_box_vector: empty box");
    if (k == 0) throw ShapeError("integrate_box_vector: zero components");
    std::vector<double> point(box.axes.size(), 0.0);
    std::vector<double> buf(2 * k);
    std::size_t evals = 0;
    nested(f, k, box, spec, 0, point, buf, evals);
    VectorEstimate out;
    out.value.assign(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k));
    out.error.assign(buf.begin() + static_cast<std::ptrdiff_t>(k), buf.end());
    out.evals_used = evals;
    return out;
}

namespace {

// Stick-breaking map from the unit box onto the simplex; returns the Jacobian.
double stick_break(std::span<const double> u, std::span<double> theta) {
    double rem = 1.0;
    double jac = 1.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        theta[i] = rem * u[i];
        jac *= rem;
        rem *= 1.0 - u[i];
    }
    theta[u.size()] = rem;
    return jac;
}

double log_factorial(std::size_t n) { return std::lgamma(static_cast<double>(n) + 1.0); }

}  // namespace

OracleEstimate integrate_nd(const PointIntegrand& f, const Domain& domain, const IntegrationSpec& spec) {
    spec.validate();
    if (spec.scheme == Scheme::ExactSum) throw DomainError("exact-sum scheme needs a discrete support");

    if (const auto* box = std::get_if<Box>(&domain)) {
        if (box->axes.empty()) throw ShapeError("integrate_nd: empty box");
        if (spec.scheme == Scheme::AdaptiveQuadrature) {
            const PointVectorIntegrand g = [&f](std::span<const double> x, std::span<double> o) { o[0] = f(x); };
            const VectorEstimate r = integrate_box_vector(g, 1, *box, spec);
            return {r.value[0], r.error[0], r.evals_used, Scheme::AdaptiveQuadrature};
        }
        double volume = 1.0;
        for (const auto& ax : box->axes) {
            if (std::isinf(ax.lo) || std::isinf(ax.hi))
                throw DomainError("monte-carlo integration over an unbounded box needs a variable transform");
            volume *= ax.hi - ax.lo;
        }
        const std::size_t dim = box->axes.size();
        auto sampler = [&](CounterRng& rng) {
            std::vector<double> x(dim);
            for (std::size_t i = 0; i < dim; ++i) x[i] = box->axes[i].lo + (box->axes[i].hi - box->axes[i].lo) * rng.uniform();
            return x;
        };
        auto g = [&](const std::vector<double>& x) { return f(x); };
        OracleEstimate e = mc_expectation(sampler, g, spec.max_evals, spec.seed);
        e.value *= volume;
        e.error *= volume;
        return e;
    }

    const auto& simplex = std::get<Simplex>(domain);
    if (simplex.cells < 2) throw ShapeError("integrate_nd: simplex needs at least 2 cells");
    const std::size_t d = simplex.cells;
    if (spec.scheme == Scheme::AdaptiveQuadrature) {
        Box unit;
        unit.axes.assign(d - 1, Interval{0.0, 1.0});
        const PointVectorIntegrand g = [&](std::span<const double> u, std::span<double> o) {
            std::vector<double> theta(d);
            const double jac = stick_break(u, theta);
            o[0] = jac == 0.0 ? 0.0 : f(theta) * jac;
        };
        const VectorEstimate r = integrate_box_vector(g, 1, unit, spec);
        return {r.value[0], r.error[0], r.evals_used, Scheme::AdaptiveQuadrature};
    }
    // Uniform Dirichlet(1) draws have density (d-1)! on the simplex.
    const std::vector<double> ones(d, 1.0);
    auto sampler = [&](CounterRng& rng) {
        std::vector<double> theta(d);
        rng.dirichlet(ones, theta);
        return theta;
    };
    auto g = [&](const std::vector<double>& theta) { return f(theta); };
    OracleEstimate e = mc_expectation(sampler, g, spec.max_evals, spec.seed);
    const double inv_vol = std::exp(-log_factorial(d - 1));
    e.value *= inv_vol;
    e.error *= inv_vol;
    return e;
}

}  // namespace covprior::oracle
