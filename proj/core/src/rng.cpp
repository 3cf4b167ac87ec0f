#include "fewkg/rng.hpp"

#include <array>
#include <stdexcept>

namespace fewkg {

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t a,
                     uint64_t b, uint64_t c) {
    uint64_t h = seed;
    splitmix64(h);
    for (unsigned char ch : tag) {
        h ^= ch;
        splitmix64(h);
    }
    h ^= a;
    splitmix64(h);
    h ^= b;
    splitmix64(h);
    h ^= c;
    splitmix64(h);
    return h;
}

namespace {
inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
}

uint64_t Rng::next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

uint64_t Rng::next_below(uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::next_below: bound must be > 0");
    // Rejection sampling over the largest multiple of bound.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % bound;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_double(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

std::vector<size_t> Rng::sample_distinct(size_t n, size_t k) {
    if (k > n) throw std::invalid_argument("Rng::sample_distinct: k > n");
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = 0; i < k; ++i) {
        size_t j = i + static_cast<size_t>(next_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

std::vector<size_t> Rng::permutation(size_t n) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = 0; i + 1 < n; ++i) {
        size_t j = i + static_cast<size_t>(next_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

}  // namespace fewkg
