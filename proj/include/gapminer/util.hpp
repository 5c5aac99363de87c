// Small shared utilities: deterministic RNG streams, content digests,
// a chunked parallel-for, and interval statistics.
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gapminer {

// splitmix64, used to derive independent RNG streams from (seed, index).
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Stream i of a seeded run. Serial and parallel execution draw identical
// numbers because each draw owns its stream.
inline std::mt19937_64 rng_stream(uint64_t seed, uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ (index + 1)));
}

// Uniform double in [0,1) from the top 53 bits. The std distributions are
// implementation-defined; this is stable across library versions.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline bool uniform_bit(std::mt19937_64& g) { return (g() >> 63) != 0; }

// Box-Muller standard normal (deterministic, unlike std::normal_distribution).
class NormalDraw {
public:
    double operator()(std::mt19937_64& g) {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform01(g);
        double u2 = uniform01(g);
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a 64-bit, used for provenance digests of files and configs.
inline uint64_t fnv1a64(std::string_view data, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(uint64_t v);
std::string digest_file(const std::string& path);

// Shortest round-trip decimal form of a double (locale-free, byte-stable),
// and its strict inverse. Dataset and model files must reproduce the exact
// bits on reload, so iostream formatting is not used for persisted numbers.
std::string format_double(double v);
double parse_double(std::string_view text);

// Runs fn(i) for i in [0,count) across `jobs` threads. Work items are
// independent; any shared output must be indexed by i.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

int default_jobs();

// Wilson 95% score interval for k successes out of n.
struct WilsonInterval {
    double lo = 0.0;
    double hi = 1.0;
};
WilsonInterval wilson95(std::size_t successes, std::size_t trials);

// Exact nonnegative rational with small denominators (feature values and
// split thresholds are multiples of 1/n^2; midpoints double the denominator).
struct Rational {
    int64_t num = 0;
    int64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline bool rational_less(const Rational& a, const Rational& b) {
    return a.num * b.den < b.num * a.den;
}
inline bool rational_equal(const Rational& a, const Rational& b) {
    return a.num * b.den == b.num * a.den;
}

Rational rational_reduced(int64_t num, int64_t den);

// Exact midpoint (a + b) / 2 in lowest terms.
inline Rational rational_mid(const Rational& a, const Rational& b) {
    return rational_reduced(a.num * b.den + b.num * a.den, 2 * a.den * b.den);
}

}  // namespace gapminer
