#ifndef COSEG_COMMON_HPP
#define COSEG_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace coseg {

// Error taxonomy: config/usage problems vs. runtime failures. The CLI maps
// ConfigError to exit code 1 and everything else to 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct TrainError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Stable seed derivation so independent RNG streams (per domain, per epoch,
// per frame) never alias.
inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = splitmix64(seed ^ 0x6a09e667f3bcc908ull);
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    return splitmix64(s ^ c);
}

// Deterministic RNG wrapper. Distributions are implemented here (not via
// std::*_distribution) so sequences are identical across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x853c49e6748fea9bull) {}

    uint64_t next_u64() {
        // xorshift* seeded through splitmix; period is ample for this use.
        state_ = splitmix64(state_);
        return state_;
    }

    // uniform in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    int uniform_int(int n) { return int(next_u64() % uint64_t(n)); }

    // standard normal via Box-Muller (first branch only, fully deterministic)
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    template <typename It>
    void shuffle(It first, It last) {
        auto n = last - first;
        for (auto i = n - 1; i > 0; --i) {
            auto j = uniform_int(int(i + 1));
            std::swap(first[i], first[j]);
        }
    }

private:
    uint64_t state_;
};

}  // namespace coseg

#endif
