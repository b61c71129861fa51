#pragma once

// Deterministic Monte-Carlo expectations.
//
// Draws are split into fixed blocks of kMcBlockSize samples; block b uses the
// RNG stream b under the caller's seed. Block statistics are merged in block
// order, so the estimate does not depend on how many workers ran.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <thread>
#include <vector>

#include "covprior/errors.hpp"
#include "covprior/quadrature.hpp"
#include "covprior/rng.hpp"

namespace covprior::oracle {

inline constexpr std::size_t kMcBlockSize = 16384;

namespace detail {

struct BlockStats {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;
};

inline void merge(BlockStats& into, const BlockStats& b) {
    if (b.count == 0) return;
    if (into.count == 0) {
        into = b;
        return;
    }
    const double n = static_cast<double>(into.count + b.count);
    const double delta = b.mean - into.mean;
    into.mean += delta * static_cast<double>(b.count) / n;
    into.m2 += b.m2 + delta * delta * static_cast<double>(into.count) * static_cast<double>(b.count) / n;
    into.count += b.count;
}

}  // namespace detail

inline unsigned default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Sample mean of g(sampler(rng)) over n draws with its standard error.
/// `sampler` is called as sampler(CounterRng&) and `g` on its result.
template <class Sampler, class G>
OracleEstimate mc_expectation(Sampler&& sampler, G&& g, std::size_t n, std::uint64_t seed,
                              unsigned workers = default_workers()) {
    if (n < 2) throw DomainError("mc_expectation: need at least 2 samples");
    const std::size_t blocks = (n + kMcBlockSize - 1) / kMcBlockSize;
    std::vector<detail::BlockStats> stats(blocks);

    auto run_block = [&](std::size_t b) {
        CounterRng rng(seed, b);
        const std::size_t count = std::min(kMcBlockSize, n - b * kMcBlockSize);
        detail::BlockStats s;
        for (std::size_t i = 0; i < count; ++i) {
            const double v = static_cast<double>(g(sampler(rng)));
            ++s.count;
            const double delta = v - s.mean;
            s.mean += delta / static_cast<double>(s.count);
            s.m2 += delta * (v - s.mean);
        }
        stats[b] = s;
    };

    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(blocks)));
    if (workers == 1) {
        for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t b = w; b < blocks; b += workers) run_block(b);
            });
        }
        for (auto& t : pool) t.join();
    }

    detail::BlockStats total;
    for (const auto& s : stats) detail::merge(total, s);
    const double var = total.m2 / static_cast<double>(total.count - 1);
    OracleEstimate out;
    out.value = total.mean;
    out.error = std::sqrt(std::max(0.0, var) / static_cast<double>(total.count));
    out.evals_used = total.count;
    out.scheme = Scheme::MonteCarlo;
    return out;
}

/// Component-wise sample means of a k-valued g(sample, out) with standard
/// errors; same block/stream layout as mc_expectation.
template <class Sampler, class G>
VectorEstimate mc_expectation_vector(Sampler&& sampler, G&& g, std::size_t k, std::size_t n, std::uint64_t seed,
                                     unsigned workers = default_workers()) {
    if (n < 2) throw DomainError("mc_expectation: need at least 2 samples");
    const std::size_t blocks = (n + kMcBlockSize - 1) / kMcBlockSize;
    std::vector<detail::BlockStats> stats(blocks * k);

    auto run_block = [&](std::size_t b) {
        CounterRng rng(seed, b);
        const std::size_t count = std::min(kMcBlockSize, n - b * kMcBlockSize);
        std::vector<double> v(k);
        detail::BlockStats* s = &stats[b * k];
        for (std::size_t i = 0; i < count; ++i) {
            g(sampler(rng), std::span<double>(v));
            for (std::size_t c = 0; c < k; ++c) {
                ++s[c].count;
                const double delta = v[c] - s[c].mean;
                s[c].mean += delta / static_cast<double>(s[c].count);
                s[c].m2 += delta * (v[c] - s[c].mean);
            }
        }
    };

    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(blocks)));
    if (workers == 1) {
        for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t b = w; b < blocks; b += workers) run_block(b);
            });
        for (auto& t : pool) t.join();
    }

    VectorEstimate out;
    out.value.assign(k, 0.0);
    out.error.assign(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        detail::BlockStats total;
        for (std::size_t b = 0; b < blocks; ++b) detail::merge(total, stats[b * k + c]);
        out.value[c] = total.mean;
        out.error[c] = std::sqrt(std::max(0.0, total.m2 / static_cast<double>(total.count - 1)) /
                                 static_cast<double>(total.count));
    }
    out.evals_used = n;
    return out;
}

}  // namespace covprior::oracle
