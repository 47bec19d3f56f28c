#pragma once

#include <cstdint>
#include <random>

namespace kvflow {

// Seeded random stream. The engine is std::mt19937_64 seeded through
// std::seed_seq, both of which the standard pins down bit-for-bit; the
// uniform and Poisson transforms are done here by hand because the library
// distributions are implementation-defined.
class RandomStream {
public:
    // `stream` separates independent consumers of one run seed
    // (arrivals, budget draws, ...).
    RandomStream(std::uint64_t seed, std::uint64_t stream);

    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    // Poisson(mean) by sequential inversion; means above 30 are split into
    // equal chunks so exp(-mean) never underflows.
    std::int64_t poisson(double mean);
    bool bernoulli(double p) { return uniform() < p; }
    std::uint64_t next() { return engine_(); }
    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

private:
    std::mt19937_64 engine_;
};

namespace streams {
inline constexpr std::uint64_t kArrivals = 1;
inline constexpr std::uint64_t kBudget = 2;
}  // namespace streams

}  // namespace kvflow
