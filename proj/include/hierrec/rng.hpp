#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace hierrec {

/// 64-bit FNV-1a. Used for stream derivation and config hashing.
constexpr std::uint64_t fnv1a(std::string_view data,
                              std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of a named sub-stream, e.g. derive_seed(global, "rollout", episode).
inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view name,
                                 std::uint64_t index = 0) noexcept {
    return mix64(mix64(parent ^ fnv1a(name)) + index);
}

/// Random stream built on mt19937_64. Draws are computed from raw engine
/// output so sequences do not depend on the standard library's
/// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::size_t below(std::size_t n);

    bool bernoulli(double p) { return uniform() < p; }

    /// Index drawn from unnormalized nonnegative weights.
    std::size_t categorical(const std::vector<double>& weights);

    /// k distinct indices of [0, n) in draw order.
    std::vector<std::size_t> choose(std::size_t n, std::size_t k);

    std::mt19937_64& engine() { return engine_; }
    const std::mt19937_64& engine() const { return engine_; }

    std::string serialize() const;
    void deserialize(const std::string& state);

private:
    std::mt19937_64 engine_;
};

}  // namespace hierrec
