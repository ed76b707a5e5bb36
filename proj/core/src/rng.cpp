#include "tabgns/rng.hpp"

#include <cmath>

namespace tabgns {

double Rng::uniform() {
    // 53 random bits centered in (0,1): range [2^-54, 1 - 2^-54].
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

double Rng::gumbel() { return -std::log(-std::log(uniform())); }

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling over the top bits keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

std::uint64_t Rng::mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t stream) {
    return mix(mix(seed) ^ mix(stream * 0x9e3779b97f4a7c15ull + 0x6a09e667f3bcc909ull));
}

} // namespace tabgns
