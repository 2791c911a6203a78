#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <utility>
#include <vector>

namespace tempattn {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives an independent stream seed from a master seed, a purpose tag and
/// integer parts. Streams keyed this way are order-independent, which is what
/// makes parallel generation and per-(sequence, feature) testing reproducible
/// regardless of worker count.
inline uint64_t derive_seed(uint64_t master, std::string_view tag,
                            std::initializer_list<uint64_t> parts = {}) {
    uint64_t s = master ^ 0x6a09e667f3bcc908ULL;
    splitmix64(s);
    s ^= fnv1a64(tag);
    splitmix64(s);
    for (uint64_t p : parts) {
        s ^= p;
        splitmix64(s);
    }
    uint64_t copy = s;
    return splitmix64(copy);
}

/// Deterministic RNG with self-contained distributions so streams do not
/// depend on the standard library's distribution implementations.
/// xoshiro-free: a splitmix64-seeded 64-bit mixer is plenty here.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // Warm up so nearby seeds decorrelate.
        splitmix64(state_);
        splitmix64(state_);
    }

    uint64_t bits() { return splitmix64(state_); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi], inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(bits() % span);
    }

    /// Standard normal via Box-Muller (one value per call, stream-stable).
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
};

}  // namespace tempattn
