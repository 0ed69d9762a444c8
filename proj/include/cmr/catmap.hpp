#pragma once

/**
 * @file catmap.hpp
 * @brief Arnold's cat map over an N×N grid as a keyed permutation of slot
 *        addresses.
 *
 * The map is x' = (x + p·y) mod n, y' = (q·x + (p·q+1)·y) mod n, applied k
 * times. The matrix has determinant 1, so every key induces a bijection of
 * Z_n × Z_n and therefore of the 1-D address range [0, n²).
 */

#include <array>
#include <cstdint>
#include <vector>

#include "cmr/error.hpp"

namespace cmr::catmap {

// Grids above this side length make the brute-force oracles (and the
// attack sweeps built on them) intractable.
inline constexpr std::uint32_t kMaxGridSide = 256;

struct KeySet {
    std::uint32_t k = 0; // iteration count
    std::uint32_t p = 1;
    std::uint32_t q = 1;
    std::uint32_t n = 1; // grid side

    bool operator==(const KeySet&) const = default;
};

struct Point2D {
    std::uint32_t x = 0;
    std::uint32_t y = 0;

    bool operator==(const Point2D&) const = default;
};

struct PeriodInfo {
    std::uint64_t period = 1; // smallest t >= 1 with map^t = identity
    KeySet key;
};

using Permutation = std::vector<std::uint32_t>;

namespace detail {

// Column-major storage is irrelevant at 2×2; entries kept reduced mod n.
using Mat2 = std::array<std::uint64_t, 4>; // [a b; c d]

inline Mat2 one_step(const KeySet& key) {
    const std::uint64_t n = key.n;
    return {1 % n, key.p % n, key.q % n,
            (static_cast<std::uint64_t>(key.p) * key.q + 1) % n};
}

inline Mat2 mul(const Mat2& l, const Mat2& r, std::uint64_t n) {
    return {(l[0] * r[0] + l[1] * r[2]) % n, (l[0] * r[1] + l[1] * r[3]) % n,
            (l[2] * r[0] + l[3] * r[2]) % n, (l[2] * r[1] + l[3] * r[3]) % n};
}

inline Mat2 identity(std::uint64_t n) { return {1 % n, 0, 0, 1 % n}; }

// M^k by repeated multiplication, reduced mod n at every step. k stays small
// here (key generation caps it below the period), so no fast exponentiation.
inline Mat2 power(const KeySet& key) {
    Mat2 m = identity(key.n);
    const Mat2 step = one_step(key);
    for (std::uint32_t i = 0; i < key.k; ++i) m = mul(m, step, key.n);
    return m;
}

inline void validate(const KeySet& key) {
    if (key.p < 1 || key.q < 1 || key.n < 1)
        throw Error("key set requires p, q, n >= 1");
}

} // namespace detail

inline Point2D map_point(Point2D pt, const KeySet& key) {
    detail::validate(key);
    const detail::Mat2 m = detail::power(key);
    const std::uint64_t n = key.n;
    return {static_cast<std::uint32_t>((m[0] * pt.x + m[1] * pt.y) % n),
            static_cast<std::uint32_t>((m[2] * pt.x + m[3] * pt.y) % n)};
}

// Row-major 1-D ↔ 2-D convention: (addr mod n, addr div n).
inline Point2D addr_to_2d(std::uint32_t addr, std::uint32_t n) {
    if (addr >= n * n)
        throw std::out_of_range("address " + std::to_string(addr) +
                                " outside grid of " + std::to_string(n * n));
    return {addr % n, addr / n};
}

inline std::uint32_t addr_from_2d(Point2D pt, std::uint32_t n) {
    return pt.y * n + pt.x;
}

/// result[logical] = physical slot index; always a bijection of [0, n²).
inline Permutation permute(const KeySet& key) {
    detail::validate(key);
    if (key.n > kMaxGridSide)
        throw CapacityError("grid side " + std::to_string(key.n) +
                            " exceeds maximum " + std::to_string(kMaxGridSide));
    const detail::Mat2 m = detail::power(key);
    const std::uint64_t n = key.n;
    Permutation result(key.n * key.n);
    for (std::uint32_t addr = 0; addr < result.size(); ++addr) {
        const Point2D pt{addr % key.n, addr / key.n};
        const Point2D moved{
            static_cast<std::uint32_t>((m[0] * pt.x + m[1] * pt.y) % n),
            static_cast<std::uint32_t>((m[2] * pt.x + m[3] * pt.y) % n)};
        result[addr] = addr_from_2d(moved, key.n);
    }
    return result;
}

inline Permutation invert(const Permutation& perm) {
    Permutation inv(perm.size());
    for (std::uint32_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
    return inv;
}

inline Permutation inverse_permute(const KeySet& key) {
    return invert(permute(key));
}

/// Order of the one-step matrix in SL(2, Z_n); k in the key is ignored.
inline PeriodInfo period(const KeySet& key) {
    detail::validate(key);
    const detail::Mat2 id = detail::identity(key.n);
    const detail::Mat2 step = detail::one_step(key);
    detail::Mat2 m = step;
    std::uint64_t t = 1;
    while (m != id) {
        m = detail::mul(m, step, key.n);
        ++t;
    }
    return {t, key};
}

} // namespace cmr::catmap
