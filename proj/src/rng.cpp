#include "kvflow/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace kvflow {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

std::int64_t poisson_small(RandomStream& rng, double mean) {
    double u = rng.uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::int64_t k = 0;
    while (u >= cdf) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
        if (p == 0.0 && cdf <= u) break;  // float tail exhausted
    }
    return k;
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream) : engine_(make_engine(seed, stream)) {}

double RandomStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::int64_t RandomStream::poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
        throw std::invalid_argument("poisson mean must be finite and >= 0");
    }
    if (mean == 0.0) return 0;
    constexpr double kChunk = 30.0;
    auto chunks = static_cast<std::int64_t>(std::ceil(mean / kChunk));
    double part = mean / static_cast<double>(chunks);
    std::int64_t total = 0;
    for (std::int64_t i = 0; i < chunks; ++i) total += poisson_small(*this, part);
    return total;
}

std::int64_t RandomStream::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(engine_());
    // Rejection sampling to avoid modulo bias.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
}

}  // namespace kvflow
