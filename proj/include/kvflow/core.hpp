#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace kvflow {

using Tokens = std::int64_t;
using Slot = std::int64_t;
using RequestId = std::int64_t;

// Requests of one class share prompt and decode lengths.
struct RequestClass {
    int class_id = 0;
    Tokens prompt_len = 1;
    Tokens decode_len = 1;
};

struct Request {
    RequestId id = 0;
    Tokens prompt_len = 1;
    Tokens decode_len = 1;
    Slot arrival_slot = 1;
    std::optional<int> class_id;
    bool output_known = true;
};

enum class Phase { Waiting, Active, Completed };

struct RequestState {
    Phase phase = Phase::Waiting;
    Tokens generated = 0;
    std::optional<Slot> activation_slot;
    std::optional<Slot> completion_slot;
    std::int64_t evict_count = 0;
};

// What a policy may see of an active request. decode_len is empty when the
// scenario hides output lengths.
struct ActiveEntry {
    RequestId id = 0;
    Tokens prompt_len = 1;
    Tokens generated = 0;
    Slot activation_slot = 1;
    std::optional<Tokens> decode_len;
};

// Total KV tokens a request holds summed over its lifetime:
// sum_{j=1..o} (l + j) = l*o + (o + o^2)/2. Throws on non-positive lengths.
Tokens workload_tokens(Tokens prompt_len, Tokens decode_len);

// U = sum over active of (prompt_len + generated).
Tokens usage(std::span<const ActiveEntry> active);

// Projected usage at each future slot offset 1..horizon, assuming every
// request decodes once per slot and frees its memory at the end of the slot
// where generated reaches decode_len.
struct ProjectionItem {
    Tokens prompt_len = 1;
    Tokens generated = 0;
    Tokens decode_len = 1;
};

std::vector<Tokens> peak_projection(std::span<const ProjectionItem> items, Slot horizon);

// Incremental forward-usage profile. Index d (1-based) holds the usage
// projected d slots ahead. Bulk loading is O(n + horizon) via difference
// arrays; single additions are O(lifetime).
class ProjectionProfile {
public:
    ProjectionProfile() = default;

    // Resets to the projection of `items`.
    void load(std::span<const ProjectionItem> items);
    // Usage at offset d; zero beyond the tracked range.
    Tokens at(Slot d) const;
    // Largest value over offsets 1..lifetime if a fresh request (l, lifetime)
    // were added now.
    Tokens peak_with(Tokens prompt_len, Tokens lifetime) const;
    // Adds a fresh request (generated = 0).
    void add_fresh(Tokens prompt_len, Tokens lifetime);
    Slot horizon() const { return static_cast<Slot>(usage_.size()) - 1; }

private:
    void ensure(Slot horizon);

    std::vector<Tokens> usage_{0};  // usage_[0] unused
};

}  // namespace kvflow

namespace kvflow {

// 1-based nearest-rank position ceil(q * n), clamped to [1, n].
std::size_t nearest_rank(std::size_t n, double q);

}  // namespace kvflow
