#include "ratlab/random.hpp"

#include <stdexcept>

namespace ratlab {

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
    if (span == UINT64_MAX) return static_cast<std::int64_t>(next_u64());
    const std::uint64_t range = span + 1;
    // Largest multiple of range that fits; draws at or above it are rejected.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range + 1) % range;
    std::uint64_t draw;
    do {
        draw = next_u64();
    } while (draw > limit);
    return lo + static_cast<std::int64_t>(draw % range);
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t repetition, std::string_view role) {
    // FNV-1a over the role tag, then fold everything through the mixer.
    std::uint64_t tag = 0xcbf29ce484222325ULL;
    for (unsigned char c : role) {
        tag ^= c;
        tag *= 0x100000001b3ULL;
    }
    std::uint64_t h = mix64(master);
    h = mix64(h ^ repetition);
    h = mix64(h ^ tag);
    return h;
}

}  // namespace ratlab
