#include "kvflow/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace kvflow {

Tokens workload_tokens(Tokens prompt_len, Tokens decode_len) {
    if (prompt_len < 1 || decode_len < 1) {
        throw std::invalid_argument("workload_tokens: lengths must be >= 1 (got l=" + std::to_string(prompt_len) +
                                    ", o=" + std::to_string(decode_len) + ")");
    }
    return prompt_len * decode_len + (decode_len + decode_len * decode_len) / 2;
}

Tokens usage(std::span<const ActiveEntry> active) {
    Tokens total = 0;
    for (const auto& a : active) total += a.prompt_len + a.generated;
    return total;
}

std::vector<Tokens> peak_projection(std::span<const ProjectionItem> items, Slot horizon) {
    ProjectionProfile profile;
    profile.load(items);
    std::vector<Tokens> out(static_cast<std::size_t>(std::max<Slot>(horizon, 0)));
    for (Slot d = 1; d <= horizon; ++d) out[static_cast<std::size_t>(d - 1)] = profile.at(d);
    return out;
}

void ProjectionProfile::load(std::span<const ProjectionItem> items) {
    Slot len = 0;
    for (const auto& it : items) len = std::max(len, it.decode_len - it.generated);
    // A request with r slots remaining contributes (l + g) + d at offsets
    // d = 1..r: a constant plus d times an alive-count.
    std::vector<Tokens> base(static_cast<std::size_t>(len) + 2, 0);
    std::vector<Tokens> alive(static_cast<std::size_t>(len) + 2, 0);
    for (const auto& it : items) {
        Slot remaining = it.decode_len - it.generated;
        if (remaining <= 0) continue;
        base[1] += it.prompt_len + it.generated;
        base[static_cast<std::size_t>(remaining) + 1] -= it.prompt_len + it.generated;
        alive[1] += 1;
        alive[static_cast<std::size_t>(remaining) + 1] -= 1;
    }
    usage_.assign(static_cast<std::size_t>(len) + 1, 0);
    Tokens b = 0, n = 0;
    for (Slot d = 1; d <= len; ++d) {
        b += base[static_cast<std::size_t>(d)];
        n += alive[static_cast<std::size_t>(d)];
        usage_[static_cast<std::size_t>(d)] = b + d * n;
    }
}

Tokens ProjectionProfile::at(Slot d) const {
    if (d < 1 || d >= static_cast<Slot>(usage_.size())) return 0;
    return usage_[static_cast<std::size_t>(d)];
}

Tokens ProjectionProfile::peak_with(Tokens prompt_len, Tokens lifetime) const {
    Tokens peak = 0;
    Slot tracked = std::min<Slot>(lifetime, horizon());
    for (Slot d = 1; d <= tracked; ++d) {
        peak = std::max(peak, usage_[static_cast<std::size_t>(d)] + prompt_len + d);
    }
    // Past the tracked range only the candidate remains and its usage grows.
    if (lifetime > tracked) peak = std::max(peak, prompt_len + lifetime);
    return peak;
}

void ProjectionProfile::add_fresh(Tokens prompt_len, Tokens lifetime) {
    ensure(lifetime);
    for (Slot d = 1; d <= lifetime; ++d) usage_[static_cast<std::size_t>(d)] += prompt_len + d;
}

void ProjectionProfile::ensure(Slot horizon) {
    if (horizon >= static_cast<Slot>(usage_.size())) usage_.resize(static_cast<std::size_t>(horizon) + 1, 0);
}

}  // namespace kvflow

namespace kvflow {

std::size_t nearest_rank(std::size_t n, double q) {
    if (n == 0) throw std::invalid_argument("nearest_rank of empty sample");
    // Scale in integer percent-of-percent to dodge 0.95 * 100 = 94.999...
    auto scaled = static_cast<std::int64_t>(std::llround(q * 1'000'000.0));
    auto rank = static_cast<std::size_t>((static_cast<std::int64_t>(n) * scaled + 999'999) / 1'000'000);
    return std::clamp<std::size_t>(rank, 1, n);
}

}  // namespace kvflow
