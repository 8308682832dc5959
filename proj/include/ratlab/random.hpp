#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace ratlab {

/// Deterministic random source.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the standard, and
/// implements the derived distributions locally: the std:: distributions are
/// implementation-defined, so using them would make datasets depend on the
/// standard library in use.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [lo, hi], both inclusive. Unbiased (rejection).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_unit(); }

    bool coin() { return (next_u64() >> 63) != 0; }

    /// Fisher-Yates shuffle driven by uniform_int.
    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Stable child seed for (master seed, repetition index, role tag).
/// The value depends only on its arguments, never on host or scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t repetition, std::string_view role);

}  // namespace ratlab
