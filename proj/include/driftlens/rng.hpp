#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "driftlens/error.hpp"

namespace driftlens {

// All sampling in the pipeline flows through this wrapper so that split
// membership is reproducible bit-for-bit from (inputs, seed) alone.
//
// The algorithm stack is fixed and documented here so other implementations
// can match outputs exactly:
//   * generator: std::mt19937_64 seeded directly with the 64-bit seed
//     (the engine is fully specified by the C++ standard, so streams are
//     identical across compilers and platforms)
//   * bounded draws: rejection sampling on the top of the 64-bit range,
//     then modulo (never a distribution object; std::uniform_int_distribution
//     is not portable across standard libraries)
//   * unit doubles: top 53 bits of a draw scaled by 2^-53
//   * sampling without replacement: partial Fisher-Yates over an index array
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, n).
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) throw InputError("SeededRng::bounded: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t draw;
        do {
            draw = engine_();
        } while (draw >= limit);
        return draw % n;
    }

    // Uniform double in [0, 1).
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // The first `count` elements of a Fisher-Yates shuffle of [0, population).
    std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count) {
        if (count > population) {
            throw InputError("sample_indices: requested " + std::to_string(count) +
                             " from population of " + std::to_string(population));
        }
        std::vector<std::size_t> idx(population);
        for (std::size_t i = 0; i < population; ++i) idx[i] = i;
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t j = i + static_cast<std::size_t>(bounded(population - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(count);
        return idx;
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Per-setting child seed: settings run independently, so each derives its own
// stream from (master seed, setting id).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view setting_id) {
    return (master * 0x9e3779b97f4a7c15ULL) ^ fnv1a64(setting_id);
}

} // namespace driftlens
