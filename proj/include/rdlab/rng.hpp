#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>

namespace rdlab {

// Substream seeds are derived by hashing (master, tag, index) so that each
// consumer owns an independent generator and results do not depend on the
// order in which substreams are created.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

constexpr std::uint64_t substream_seed(std::uint64_t master, std::string_view tag,
                                       std::uint64_t index = 0) {
    return mix64(mix64(master ^ hash_tag(tag)) + mix64(index));
}

using engine = std::mt19937_64;

inline engine make_engine(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    return engine(substream_seed(master, tag, index));
}

// Uniform double in [0,1) from the top 53 bits; platform independent,
// unlike std::uniform_real_distribution.
inline double uniform01(engine& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Lazily supplies fresh random bits, k at a time.
class bit_source {
public:
    explicit bit_source(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t take(unsigned k) {
        std::uint64_t out = 0;
        unsigned filled = 0;
        while (filled < k) {
            if (avail_ == 0) {
                buf_ = gen_();
                avail_ = 64;
            }
            const unsigned n = std::min(k - filled, avail_);
            const std::uint64_t part = n == 64 ? buf_ : (buf_ & ((std::uint64_t{1} << n) - 1));
            buf_ = n == 64 ? 0 : buf_ >> n;
            avail_ -= n;
            out |= part << filled;
            filled += n;
        }
        return out;
    }

    std::uint64_t word() { return gen_(); }

private:
    engine gen_;
    std::uint64_t buf_ = 0;
    unsigned avail_ = 0;
};

} // namespace rdlab
