#pragma once

#include <cstdint>
#include <random>

namespace bailout {

// Reproducible random stream. A stream is fully determined by (seed, path);
// split() derives child streams whose draws do not depend on how much the
// parent has been consumed, so parallel or reordered work stays bit-stable.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t path = 0)
        : seed_(seed), path_(path), engine_(mix(seed, path)) {}

    RandomStream split(std::uint64_t index) const { return RandomStream(seed_, mix(path_ + 0x632be59bd9b4e019ULL, index)); }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::uint64_t next_u64() { return engine_(); }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t path() const { return path_; }

    using result_type = std::mt19937_64::result_type;
    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix(splitmix(a) ^ (b * 0xd1b54a32d192ed03ULL)); }

    std::uint64_t seed_;
    std::uint64_t path_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace bailout
