#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace mvsim {

// Counter-based Gaussian noise.
//
// Every variate is a pure function of (seed, path, particle, step,
// component): a keyed Philox block cipher turns the key tuple into uniform
// bits, and an inverse normal CDF maps them to a standard normal draw.
// Random access by key makes parallel scheduling trivially deterministic
// and lets two simulations with different particle counts consume identical
// Brownian paths, which is exactly the coupling the chaos experiments need.

struct NoiseKey {
    std::uint64_t seed = 0;
    std::uint32_t path = 0;
    std::uint32_t particle = 0;
    std::uint32_t step = 0;
    std::uint32_t component = 0;
};

// Step index reserved for initial-condition draws; no time loop can reach
// it, so X_0 never aliases a Brownian increment.
inline constexpr std::uint32_t kInitialDrawStep = 0xffffffffu;

namespace detail {

inline constexpr std::uint32_t kPhiloxM4x32A = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM4x32B = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW32A = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW32B = 0xBB67AE85u;

// Philox4x32-10 (Salmon et al.), the standard 10-round configuration.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t prod0 = std::uint64_t(kPhiloxM4x32A) * ctr[0];
        const std::uint64_t prod1 = std::uint64_t(kPhiloxM4x32B) * ctr[2];
        ctr = {std::uint32_t(prod1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(prod1),
               std::uint32_t(prod0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(prod0)};
        key[0] += kPhiloxW32A;
        key[1] += kPhiloxW32B;
    }
    return ctr;
}

// Wichura's AS241 (PPND16) rational approximation of the inverse standard
// normal CDF; absolute error below ~1e-15 over (0,1), far inside the 1e-9
// accuracy contract. One uniform in, one normal out keeps the purity
// contract one-key-one-variate.
inline double inverse_normal_cdf(double p) {
    const double q = p - 0.5;
    if (q > -0.425 && q < 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) *
                        r +
                    4.5921953931549871457e4) *
                       r +
                   1.3731693765509461125e4) *
                      r +
                  1.9715909503065514427e3) *
                     r +
                 1.3314166789178437745e2) *
                    r +
                3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) *
                        r +
                    2.1213794301586595867e4) *
                       r +
                   5.3941960214247511077e3) *
                      r +
                  6.8718700749205790830e2) *
                     r +
                 4.2313330701600911252e1) *
                    r +
                1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    if (r <= 0.0) return q < 0.0 ? -38.5 : 38.5;  // saturate at the double-precision tail
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) *
                       r +
                   1.27045825245236838258e0) *
                      r +
                  3.64784832476320460504e0) *
                     r +
                 5.76949722146069140550e0) *
                    r +
                4.63033784615654529590e0) *
                   r +
               1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) *
                       r +
                   1.48103976427480074590e-1) *
                      r +
                  6.89767334985100004550e-1) *
                     r +
                 1.67638483018380384940e0) *
                    r +
                2.05319162663775882187e0) *
                   r +
               1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) *
                       r +
                   2.65321895265761230930e-2) *
                      r +
                  2.96560571828504891230e-1) *
                     r +
                 1.78482653991729133580e0) *
                    r +
                5.46378491116411436990e0) *
                   r +
               6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) *
                       r +
                   7.86869131145613259100e-4) *
                      r +
                  1.48753612908506148525e-2) *
                     r +
                 1.36929880922735805310e-1) *
                    r +
                5.99832206555887937690e-1) *
                   r +
               1.0);
    }
    return q < 0.0 ? -val : val;
}

// 53-bit uniform in (0,1), strictly inside the open interval.
inline double to_uniform01(std::uint32_t hi, std::uint32_t lo) {
    const double bits53 = (hi >> 5) * 67108864.0 + (lo >> 6);  // 27 + 26 bits
    return (bits53 + 0.5) * (1.0 / 9007199254740992.0);        // / 2^53
}

}  // namespace detail

// Standard normal variate, a pure function of the key.
inline double gaussian(const NoiseKey& key) {
    const auto block = detail::philox4x32(
        {key.step, key.particle, key.path, key.component},
        {std::uint32_t(key.seed), std::uint32_t(key.seed >> 32)});
    return detail::inverse_normal_cdf(detail::to_uniform01(block[0], block[1]));
}

// m independent increment components, each gaussian * sqrt(dt).
inline void brownian_increment(std::uint64_t seed, std::uint32_t path, std::uint32_t particle,
                               std::uint32_t step, int m, double dt, double* out) {
    if (!(dt > 0.0)) throw std::invalid_argument("brownian_increment: dt must be positive");
    const double sq = std::sqrt(dt);
    for (int c = 0; c < m; ++c)
        out[c] = sq * gaussian({seed, path, particle, step, std::uint32_t(c)});
}

// iid initial draw mean + std * N(0,1), keyed off the reserved step index so
// the same (seed, path, particle) gives the same X_0 under any particle
// count: enlarging N extends the population instead of reshuffling it.
inline void initial_sample(std::uint64_t seed, std::uint32_t path, std::uint32_t particle, int d,
                           double mean, double std_dev, double* out) {
    if (std_dev < 0.0) throw std::invalid_argument("initial_sample: std must be nonnegative");
    for (int c = 0; c < d; ++c)
        out[c] = mean + std_dev * gaussian({seed, path, particle, kInitialDrawStep, std::uint32_t(c)});
}

}  // namespace mvsim
