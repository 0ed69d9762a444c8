#pragma once

#include <cstdint>
#include <random>

namespace cmr::rng {

// std::uniform_int_distribution is implementation-defined; the raw engine
// output is standardized, so modulo draws keep seeds portable across
// toolchains. Bias is irrelevant at these range sizes.
inline std::uint64_t draw(std::mt19937_64& g, std::uint64_t lo, std::uint64_t hi) {
    return lo + g() % (hi - lo + 1);
}

} // namespace cmr::rng
