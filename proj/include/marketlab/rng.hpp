#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace marketlab {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

// Wichura's AS241 (PPND16): inverse standard normal CDF, ~1e-15 accurate.
inline double inverse_normal_cdf(double p) {
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
            (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
            (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                  3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
              4.2313330701600911252e1) * r + 1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double v;
    if (r <= 5.0) {
        r -= 1.6;
        v = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        v = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
    }
    return (q < 0.0) ? -v : v;
}

} // namespace detail

struct StreamId {
    std::uint64_t path = 0;
    std::uint64_t component = 0;
};

/// Deterministic substream generator: identical (seed, stream_id) reproduce
/// identical draws; distinct stream ids give statistically independent streams.
/// xoshiro256++ seeded through a splitmix64 chain over (seed, path, component).
class RngStream {
public:
    RngStream(std::uint64_t seed, StreamId id) : seed_(seed), id_(id) {
        std::uint64_t s = seed ^ 0x6a09e667f3bcc908ULL;
        s = detail::splitmix64(s) ^ id.path;
        s = detail::splitmix64(s) ^ id.component;
        std::uint64_t chain = detail::splitmix64(s);
        for (auto& w : state_) w = detail::splitmix64(chain);
    }

    explicit RngStream(std::uint64_t seed) : RngStream(seed, StreamId{}) {}

    std::uint64_t next_u64() {
        std::uint64_t* s = state_;
        const std::uint64_t result = detail::rotl(s[0] + s[3], 23) + s[0];
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = detail::rotl(s[3], 45);
        return result;
    }

    /// Uniform in the open interval (0,1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via inverse CDF (one uniform per draw).
    double normal() { return detail::inverse_normal_cdf(uniform()); }

    /// Exponential with unit mean.
    double exponential() { return -std::log(uniform()); }

    /// Gamma(shape, 1) for shape >= 1, Marsaglia-Tsang squeeze.
    double gamma(double shape) {
        if (shape < 1.0) throw std::invalid_argument("RngStream::gamma: shape < 1");
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    std::uint64_t seed() const { return seed_; }
    StreamId id() const { return id_; }

private:
    std::uint64_t seed_;
    StreamId id_;
    std::uint64_t state_[4];
};

} // namespace marketlab
