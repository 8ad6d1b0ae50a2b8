#pragma once

#include <cstdint>

namespace fieldmeta {

/// Independent random streams derived from one root seed.
///
/// Every consumer of randomness draws its seed as
/// split_seed(root, stream, index), so adding a consumer never shifts the
/// sequence seen by another.
enum class Stream : std::uint64_t {
    init = 1,          // index 0: meta-initialization, index i: scratch fits
    corpus = 2,        // index i: synthetic signal i
    batch = 3,         // index e: shuffle of epoch e
    random_scorer = 4, // index: mix of (outer step, signal, inner step)
    fourier = 5,       // Fourier feature matrix
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t split_seed(std::uint64_t root, Stream stream, std::uint64_t index = 0) {
    return splitmix64(splitmix64(splitmix64(root) ^ static_cast<std::uint64_t>(stream)) ^ index);
}

}  // namespace fieldmeta
