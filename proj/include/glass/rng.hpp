#pragma once

#include <array>
#include <cstdint>

namespace glass {

// Counter-free xoshiro256++ with splitmix64 seeding. All sampling goes through
// this so that runs are bit-reproducible across reruns on the same build;
// std::<distribution> types are implementation-defined and never used.
struct Rng {
    std::array<uint64_t, 4> s{};

    static Rng seeded(uint64_t seed);

    uint64_t next_u64();

    // uniform in [0,1)
    double uniform();
    double uniform(double lo, double hi);

    // integer in [lo, hi] inclusive
    int64_t uniform_int(int64_t lo, int64_t hi);

    // standard normal via Box-Muller (two uniforms per draw, no cached spare,
    // so the state serializes as just the four words)
    double normal();

    std::array<uint64_t, 4> state() const { return s; }
    void set_state(const std::array<uint64_t, 4>& st) { s = st; }
};

uint64_t splitmix64(uint64_t& x);

// Derives independent per-record streams from a root seed; used to fan
// rendering / generation out across workers deterministically.
struct SeedSeq {
    uint64_t root = 0;

    explicit SeedSeq(uint64_t r) : root(r) {}
    Rng stream(uint64_t index) const;
    Rng stream(uint64_t index, uint64_t salt) const;
};

}  // namespace glass
