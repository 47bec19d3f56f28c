#include "kvflow/policy_view.hpp"

#include <stdexcept>
#include <string>

namespace kvflow {

void WaitingQueue::index_entry(const Key& key, const WaitingEntry& entry) const {
    if (class_indexed_ && entry.class_id) by_class_[*entry.class_id].insert(key);
    if (decode_indexed_ && entry.decode_len) by_decode_.emplace(*entry.decode_len, entry.arrival_slot, entry.id);
    if (prompt_indexed_) prompt_lens_.insert(entry.prompt_len);
}

void WaitingQueue::push(const WaitingEntry& entry) {
    Key key{entry.arrival_slot, entry.id};
    if (!index_.emplace(entry.id, key).second) {
        throw std::logic_error("request " + std::to_string(entry.id) + " is already waiting");
    }
    fifo_.emplace(key, entry);
    index_entry(key, entry);
}

bool WaitingQueue::erase(RequestId id) {
    auto it = index_.find(id);
    if (it == index_.end()) return false;
    Key key = it->second;
    index_.erase(it);
    auto node = fifo_.find(key);
    const WaitingEntry& entry = node->second;
    if (class_indexed_ && entry.class_id) {
        auto cls = by_class_.find(*entry.class_id);
        cls->second.erase(key);
        if (cls->second.empty()) by_class_.erase(cls);
    }
    if (decode_indexed_ && entry.decode_len) {
        by_decode_.erase(DecodeKey{*entry.decode_len, entry.arrival_slot, entry.id});
    }
    if (prompt_indexed_) prompt_lens_.erase(prompt_lens_.find(entry.prompt_len));
    fifo_.erase(node);
    return true;
}

const WaitingEntry* WaitingQueue::find(RequestId id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &fifo_.at(it->second);
}

const std::map<int, WaitingQueue::KeySet>& WaitingQueue::classes() const {
    if (!class_indexed_) {
        class_indexed_ = true;
        for (const auto& [key, entry] : fifo_) {
            if (entry.class_id) by_class_[*entry.class_id].insert(key);
        }
    }
    return by_class_;
}

const WaitingQueue::KeySet* WaitingQueue::class_queue(int class_id) const {
    const auto& all = classes();
    auto it = all.find(class_id);
    return it == all.end() ? nullptr : &it->second;
}

std::size_t WaitingQueue::class_size(int class_id) const {
    const auto* q = class_queue(class_id);
    return q ? q->size() : 0;
}

const WaitingQueue::DecodeSet& WaitingQueue::by_decode_len() const {
    if (!decode_indexed_) {
        decode_indexed_ = true;
        for (const auto& [key, entry] : fifo_) {
            if (entry.decode_len) by_decode_.emplace(*entry.decode_len, entry.arrival_slot, entry.id);
        }
    }
    return by_decode_;
}

Tokens WaitingQueue::min_prompt_len() const {
    if (!prompt_indexed_) {
        prompt_indexed_ = true;
        for (const auto& [key, entry] : fifo_) prompt_lens_.insert(entry.prompt_len);
    }
    return prompt_lens_.empty() ? 0 : *prompt_lens_.begin();
}

}  // namespace kvflow
