#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tabgns {

/// Seeded random source with hand-rolled distributions.
///
/// std::mt19937_64 has a pinned standard output sequence; the distribution
/// mappings below avoid <random>'s implementation-defined distributions so
/// identical seeds give identical streams on any toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

    /// Uniform on the open interval (0, 1); never returns 0 or 1.
    double uniform();

    /// Uniform on [lo, hi].
    double uniform_range(double lo, double hi);

    /// Standard normal via Box-Muller (pairs cached, deterministic order).
    double normal();

    /// Standard Gumbel(0,1): -ln(-ln(u)) with u from the open unit interval.
    double gumbel();

    /// Uniform integer in [0, n). n must be >= 1.
    std::uint64_t below(std::uint64_t n);

    /// In-place Fisher-Yates shuffle with a pinned visit order.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::uint64_t next_u64() { return engine_(); }

    /// splitmix64 finalizer; used both for seeding and for deriving
    /// independent child seeds from (seed, stream tag) pairs.
    static std::uint64_t mix(std::uint64_t x);
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace tabgns
