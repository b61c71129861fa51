#pragma once

// Counter-based random numbers (Philox4x32-10) plus the handful of variates
// the Monte-Carlo oracles need. Variates are generated in-house so a given
// (seed, stream) produces the same draws with any standard library.

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace covprior::oracle {

inline constexpr std::string_view kRngVersion = "philox4x32-10/v1";

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// One Philox4x32-10 block: the bijection at the heart of the generator.
PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept;

class CounterRng {
public:
    using result_type = std::uint32_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return 0xFFFFFFFFu; }
    result_type operator()() noexcept;

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double normal() noexcept;
    double exponential() noexcept;
    /// Gamma(shape, 1) by Marsaglia-Tsang.
    double gamma(double shape) noexcept;
    /// Fills `out` with one Dirichlet(alpha) draw.
    void dirichlet(std::span<const double> alpha, std::span<double> out) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    PhiloxCounter buffer_{};
    int used_ = 4;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

}  // namespace covprior::oracle
