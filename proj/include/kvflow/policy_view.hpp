#pragma once

#include <map>
#include <optional>
#include <span>
#include <tuple>

#include <absl/container/btree_map.h>
#include <absl/container/btree_set.h>
#include <absl/container/flat_hash_map.h>

#include "kvflow/core.hpp"

namespace kvflow {

// A waiting request as a policy sees it. decode_len is empty when outputs
// are hidden from the scheduler.
struct WaitingEntry {
    RequestId id = 0;
    Tokens prompt_len = 1;
    std::optional<int> class_id;
    std::optional<Tokens> decode_len;
    Slot arrival_slot = 1;
};

// Waiting queue ordered by (arrival_slot, id). The class, decode-length and
// prompt-length indexes are built the first time a policy asks for one and
// maintained from then on, so policies that only scan FIFO order don't pay
// for them.
class WaitingQueue {
public:
    using Key = std::pair<Slot, RequestId>;
    using DecodeKey = std::tuple<Tokens, Slot, RequestId>;
    using FifoMap = absl::btree_map<Key, WaitingEntry>;
    using KeySet = absl::btree_set<Key>;
    using DecodeSet = absl::btree_set<DecodeKey>;

    void push(const WaitingEntry& entry);
    bool erase(RequestId id);
    // Valid until the queue is next modified.
    const WaitingEntry* find(RequestId id) const;
    bool contains(RequestId id) const { return index_.contains(id); }

    std::size_t size() const { return fifo_.size(); }
    bool empty() const { return fifo_.empty(); }

    const FifoMap& fifo() const { return fifo_; }
    const WaitingEntry& at(const Key& key) const { return fifo_.at(key); }
    // Per-class FIFO; nullptr when no request of that class is waiting.
    const KeySet* class_queue(int class_id) const;
    std::size_t class_size(int class_id) const;
    const std::map<int, KeySet>& classes() const;
    // Entries with a visible decode_len, ordered by (decode_len, arrival, id).
    const DecodeSet& by_decode_len() const;
    // Smallest prompt length currently waiting; 0 when empty.
    Tokens min_prompt_len() const;

private:
    void index_entry(const Key& key, const WaitingEntry& entry) const;

    FifoMap fifo_;
    absl::flat_hash_map<RequestId, Key> index_;
    mutable bool class_indexed_ = false;
    mutable bool decode_indexed_ = false;
    mutable bool prompt_indexed_ = false;
    mutable std::map<int, KeySet> by_class_;
    mutable DecodeSet by_decode_;
    mutable absl::btree_multiset<Tokens> prompt_lens_;
};

struct PolicyView {
    Slot clock = 1;
    Tokens kv_capacity = 0;
    Tokens current_usage = 0;  // sum of prompt_len + generated over active, before this slot's decode
    bool outputs_known = true;
    const WaitingQueue& waiting;
    std::span<const ActiveEntry> active;  // activation order, most recent last
};

}  // namespace kvflow
