// Counter-based random streams. A stream is a (key, counter) pair; drawing
// never depends on how many other streams exist, so per-trial streams give
// identical aggregates for any scheduling order.
#pragma once

#include <bit>
#include <cstdint>

namespace ergo {

constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t combine_keys(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

class Stream {
public:
    constexpr Stream() = default;
    constexpr explicit Stream(std::uint64_t key) : key_(mix64(key)) {}
    constexpr Stream(std::uint64_t seed, std::uint64_t sub) : key_(combine_keys(seed, sub)) {}

    constexpr std::uint64_t bits_at(std::uint64_t index) const {
        return mix64(key_ ^ mix64(index * 0xd1b54a32d192ed03ULL + 1));
    }
    constexpr std::uint64_t next() { return bits_at(counter_++); }

    // [0,1) with 53 random bits
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    Stream child(std::uint64_t sub) const {
        Stream s;
        s.key_ = combine_keys(key_, sub);
        return s;
    }
    std::uint64_t key() const { return key_; }
    std::uint64_t position() const { return counter_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

inline std::uint64_t double_bits(double x) { return std::bit_cast<std::uint64_t>(x); }

}  // namespace ergo
