#ifndef PERMSAMP_RNG_HPP
#define PERMSAMP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace permsamp {

using Rng = std::mt19937_64;

// SplitMix64 step; used to derive independent sub-stream seeds from a master
// seed so that parallel trials are reproducible regardless of thread count.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Uniform double in [0, 1) with 53 random bits. Spelled out instead of
// std::uniform_real_distribution so output is identical across standard
// library implementations.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Marsaglia polar method over uniform01; deterministic across platforms.
class GaussianDraw {
public:
    double operator()(Rng& rng) {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01(rng) - 1.0;
            v = 2.0 * uniform01(rng) - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

private:
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace permsamp

#endif
