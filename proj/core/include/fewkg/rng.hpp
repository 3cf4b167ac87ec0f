#pragma once
// Deterministic random streams. Every piece of randomness in the project
// flows through an Rng derived from (master seed, purpose tag, indices),
// so results are reproducible bit-for-bit across runs and across resume.

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace fewkg {

uint64_t splitmix64(uint64_t& state);

// Stable 64-bit mix of a seed with a purpose tag and up to three indices.
// Used to derive independent per-purpose streams from one master seed.
uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t a = 0,
                     uint64_t b = 0, uint64_t c = 0);

// xoshiro256** with splitmix64 seeding. Small serializable state; identical
// sequences on every platform, unlike std distribution adaptors.
class Rng {
public:
    explicit Rng(uint64_t seed = 0);

    uint64_t next_u64();
    // Uniform in [0, bound). bound > 0. Unbiased via rejection.
    uint64_t next_below(uint64_t bound);
    // Uniform in [0, 1) with 53 random bits.
    double next_double();
    // Uniform in [lo, hi).
    double next_double(double lo, double hi);

    // k distinct values from [0, n), in draw order. k <= n.
    std::vector<size_t> sample_distinct(size_t n, size_t k);
    // Fisher-Yates permutation of [0, n).
    std::vector<size_t> permutation(size_t n);

    // State round-trips through 4 words (checkpoint serialization).
    std::array<uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

private:
    std::array<uint64_t, 4> s_;
};

}  // namespace fewkg
