#include "glass/rng.hpp"

#include <cmath>

namespace glass {

uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

static inline uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

Rng Rng::seeded(uint64_t seed) {
    Rng r;
    uint64_t x = seed;
    for (auto& w : r.s) w = splitmix64(x);
    return r;
}

uint64_t Rng::next_u64() {
    uint64_t result = rotl(s[0] + s[3], 23) + s[0];
    uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(next_u64() % span);
}

double Rng::normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

Rng SeedSeq::stream(uint64_t index) const {
    return stream(index, 0);
}

Rng SeedSeq::stream(uint64_t index, uint64_t salt) const {
    uint64_t x = root;
    uint64_t a = splitmix64(x);
    uint64_t key = a ^ (0x9E3779B97F4A7C15ULL * (index + 1)) ^ (0xD1B54A32D192ED03ULL * (salt + 1));
    return Rng::seeded(key);
}

}  // namespace glass
