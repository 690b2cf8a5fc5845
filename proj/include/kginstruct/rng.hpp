#pragma once

#include <cstdint>
#include <vector>

namespace kgi {

// SplitMix64. Small, fast, and bit-identical on every platform, which the
// reproducibility contract needs; std:: distributions are implementation
// defined and cannot be used anywhere output bytes depend on randomness.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Unbiased draw in [0, n) via rejection.
    uint64_t next_below(uint64_t n) {
        if (n <= 1) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return v % n;
    }

    // Uniform double in [0, 1) with 53 bits of precision.
    double next_real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool next_bool(double p_true) { return next_real() < p_true; }

private:
    uint64_t state_;
};

// Derived stream seed for sub-part `index` of a run keyed by `seed`.
// Distinct (seed, index) pairs give independent, reproducible streams.
inline uint64_t mix_seed(uint64_t seed, uint64_t index) {
    SplitMix64 g(seed);
    uint64_t a = g.next();
    SplitMix64 h(a ^ (index * 0xbf58476d1ce4e5b9ull));
    return h.next();
}

// Seeded Fisher-Yates.
template <typename T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.next_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace kgi
