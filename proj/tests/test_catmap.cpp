// Cat map unit tests. The oracles here are deliberately primitive: direct
// 2×2 matrix arithmetic per point and whole-grid iteration until identity.

#include <algorithm>
#include <catch_amalgamated.hpp>
#include <numeric>
#include <random>

#include "cmr/catmap.hpp"

using namespace cmr::catmap;

namespace {

// Oracle: single application of the raw matrix, no powering path shared
// with the implementation.
Point2D one_step_oracle(Point2D pt, std::uint32_t p, std::uint32_t q,
                        std::uint32_t n) {
    const std::uint64_t x = (pt.x + static_cast<std::uint64_t>(p) * pt.y) % n;
    const std::uint64_t y =
        (static_cast<std::uint64_t>(q) * pt.x +
         (static_cast<std::uint64_t>(p) * q + 1) * pt.y) %
        n;
    return {static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)};
}

// Oracle: iterate every grid point until all return home simultaneously.
std::uint64_t period_oracle(std::uint32_t p, std::uint32_t q, std::uint32_t n) {
    std::vector<Point2D> pts;
    for (std::uint32_t y = 0; y < n; ++y)
        for (std::uint32_t x = 0; x < n; ++x) pts.push_back({x, y});
    std::vector<Point2D> cur = pts;
    for (std::uint64_t t = 1;; ++t) {
        for (auto& pt : cur) pt = one_step_oracle(pt, p, q, n);
        if (cur == pts) return t;
    }
}

bool is_permutation_of_range(Permutation perm) {
    std::sort(perm.begin(), perm.end());
    for (std::uint32_t i = 0; i < perm.size(); ++i)
        if (perm[i] != i) return false;
    return true;
}

} // namespace

TEST_CASE("map_point matches the spec examples") {
    CHECK(map_point({3, 5}, {0, 1, 1, 7}) == Point2D{3, 5}); // k=0 identity
    CHECK(map_point({0, 0}, {1, 1, 1, 2}) == Point2D{0, 0}); // origin fixed
    CHECK(map_point({1, 1}, {1, 1, 1, 2}) == Point2D{0, 1});
}

TEST_CASE("map_point agrees with k-fold one-step oracle") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::uint32_t n = 1 + rng() % 32;
        const std::uint32_t p = 1 + rng() % 9;
        const std::uint32_t q = 1 + rng() % 9;
        const std::uint32_t k = rng() % 12;
        Point2D pt{static_cast<std::uint32_t>(rng() % n),
                   static_cast<std::uint32_t>(rng() % n)};
        Point2D expect = pt;
        for (std::uint32_t i = 0; i < k; ++i)
            expect = one_step_oracle(expect, p, q, n);
        CHECK(map_point(pt, {k, p, q, n}) == expect);
    }
}

TEST_CASE("address conversion is the row-major bijection") {
    CHECK(addr_to_2d(0, 4) == Point2D{0, 0});
    CHECK(addr_to_2d(5, 4) == Point2D{1, 1});
    CHECK(addr_to_2d(15, 4) == Point2D{3, 3});
    CHECK(addr_from_2d({0, 0}, 4) == 0);
    CHECK(addr_from_2d({1, 1}, 4) == 5);
    for (std::uint32_t n : {1u, 2u, 5u, 16u})
        for (std::uint32_t a = 0; a < n * n; ++a)
            CHECK(addr_from_2d(addr_to_2d(a, n), n) == a);
    CHECK_THROWS_AS(addr_to_2d(16, 4), std::out_of_range);
}

TEST_CASE("permute produces the frozen n=2 example") {
    CHECK(permute({1, 1, 1, 2}) == Permutation{0, 3, 1, 2});
}

TEST_CASE("permute with k=0 is the identity") {
    const Permutation p = permute({0, 4, 2, 3});
    Permutation id(9);
    std::iota(id.begin(), id.end(), 0);
    CHECK(p == id);
}

TEST_CASE("permute at k=period is the identity") {
    const KeySet base{0, 1, 1, 5};
    const std::uint64_t t = period(base).period;
    CHECK(t == 10);
    const Permutation p =
        permute({static_cast<std::uint32_t>(t), base.p, base.q, base.n});
    Permutation id(25);
    std::iota(id.begin(), id.end(), 0);
    CHECK(p == id);
}

TEST_CASE("bijectivity sweep over small keys") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 120; ++trial) {
        KeySet key{static_cast<std::uint32_t>(rng() % 9),
                   1 + static_cast<std::uint32_t>(rng() % 5),
                   1 + static_cast<std::uint32_t>(rng() % 5),
                   1 + static_cast<std::uint32_t>(rng() % 32)};
        CHECK(is_permutation_of_range(permute(key)));
    }
}

TEST_CASE("inverse_permute composes to the identity") {
    CHECK(invert({0, 3, 1, 2}) == Permutation{0, 2, 3, 1});
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        KeySet key{static_cast<std::uint32_t>(rng() % 16),
                   1 + static_cast<std::uint32_t>(rng() % 8),
                   1 + static_cast<std::uint32_t>(rng() % 8),
                   1 + static_cast<std::uint32_t>(rng() % 32)};
        const Permutation fwd = permute(key);
        const Permutation bwd = inverse_permute(key);
        for (std::uint32_t i = 0; i < fwd.size(); ++i) {
            CHECK(bwd[fwd[i]] == i);
            CHECK(fwd[bwd[i]] == i);
        }
    }
}

TEST_CASE("composition in k") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const std::uint32_t n = 1 + rng() % 16;
        const std::uint32_t p = 1 + rng() % 5;
        const std::uint32_t q = 1 + rng() % 5;
        const std::uint32_t a = rng() % 6, b = rng() % 6;
        const Permutation pa = permute({a, p, q, n});
        const Permutation pb = permute({b, p, q, n});
        const Permutation pab = permute({a + b, p, q, n});
        for (std::uint32_t i = 0; i < pa.size(); ++i)
            CHECK(pb[pa[i]] == pab[i]);
    }
}

TEST_CASE("period matches brute-force iteration") {
    CHECK(period({0, 1, 1, 1}).period == 1);
    CHECK(period({0, 1, 1, 2}).period == 3);
    CHECK(period({0, 1, 1, 5}).period == 10);
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 25; ++trial) {
        const std::uint32_t n = 1 + rng() % 12;
        const std::uint32_t p = 1 + rng() % 6;
        const std::uint32_t q = 1 + rng() % 6;
        CHECK(period({0, p, q, n}).period == period_oracle(p, q, n));
    }
}

TEST_CASE("origin is a fixed point of every key") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        KeySet key{static_cast<std::uint32_t>(rng() % 20),
                   1 + static_cast<std::uint32_t>(rng() % 16),
                   1 + static_cast<std::uint32_t>(rng() % 16),
                   1 + static_cast<std::uint32_t>(rng() % 64)};
        CHECK(permute(key)[0] == 0);
    }
}

TEST_CASE("oversized grid is a capacity error") {
    CHECK_THROWS_AS(permute({1, 1, 1, 257}), cmr::CapacityError);
}
