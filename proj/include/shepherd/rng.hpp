#pragma once

// Portable seeded randomness. std::uniform_int_distribution and friends are
// implementation-defined, so bounded draws and shuffles are done here to keep
// outputs identical across standard libraries.

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace shepherd {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Child seed for a named stream, e.g. derive_seed(root, "bench/inst-7").
std::uint64_t derive_seed(std::uint64_t root, std::string_view label) noexcept;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound); bound must be > 0. Rejection sampling,
    /// so the result is unbiased.
    std::uint64_t below(std::uint64_t bound);

    /// Uniform double in [0, 1) with 53 bits of precision.
    double uniform();

    /// Indices of a uniform k-subset of [0, n), in ascending order.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace shepherd
