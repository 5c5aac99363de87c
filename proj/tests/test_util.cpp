#include "doctest.h"

#include "gapminer/util.hpp"

#include <atomic>
#include <cmath>
#include <set>
#include <vector>

using namespace gapminer;

TEST_CASE("rng streams are deterministic and decorrelated") {
    auto a1 = rng_stream(42, 7);
    auto a2 = rng_stream(42, 7);
    CHECK(a1() == a2());
    CHECK(a1() == a2());

    auto b = rng_stream(42, 8);
    auto c = rng_stream(43, 7);
    std::set<uint64_t> firsts{rng_stream(42, 7)(), b(), c()};
    CHECK(firsts.size() == 3);
}

TEST_CASE("uniform01 stays in the half-open unit interval") {
    auto g = rng_stream(1, 0);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double u = uniform01(g);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("normal draws have the right first two moments") {
    auto g = rng_stream(2, 0);
    NormalDraw nd;
    double sum = 0.0, sum2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double x = nd(g);
        sum += x;
        sum2 += x * x;
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(0.02));
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("fnv1a64 matches reference values") {
    // Published test vectors for the 64-bit FNV-1a function.
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
    CHECK(hex64(0xcbf29ce484222325ull) == "cbf29ce484222325");
}

TEST_CASE("parallel_for covers every index once and propagates exceptions") {
    const std::size_t count = 1000;
    std::vector<std::atomic<int>> hits(count);
    parallel_for(count, 4, [&](std::size_t i) { hits[i] += 1; });
    for (std::size_t i = 0; i < count; ++i) CHECK(hits[i] == 1);

    CHECK_THROWS_AS(
        parallel_for(10, 2, [](std::size_t i) {
            if (i == 5) throw std::runtime_error("boom");
        }),
        std::runtime_error);
}

TEST_CASE("wilson interval brackets the point estimate") {
    auto w = wilson95(80, 100);
    CHECK(w.lo < 0.8);
    CHECK(w.hi > 0.8);
    CHECK(w.lo == doctest::Approx(0.7112).epsilon(0.01));
    CHECK(w.hi == doctest::Approx(0.8661).epsilon(0.01));
    auto z = wilson95(0, 0);
    CHECK(z.lo == 0.0);
    CHECK(z.hi == 1.0);
}

TEST_CASE("rational comparison avoids floating error") {
    Rational a{1, 3};
    Rational b{2, 6};
    Rational c{1, 2};
    CHECK(rational_equal(a, b));
    CHECK(rational_less(a, c));
    CHECK_FALSE(rational_less(c, a));
    CHECK(a.value() == doctest::Approx(1.0 / 3.0));
}
