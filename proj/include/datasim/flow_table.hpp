/*
 * Copyright 2026 The datasim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DATASIM_FLOW_TABLE_HPP
#define DATASIM_FLOW_TABLE_HPP

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "datasim/types.hpp"

namespace datasim {

using EntryId = std::uint64_t;

struct FlowEntry {
    EntryId entry_id = 0;
    MatchKey match_key;
    std::uint64_t packet_count = 0;
    std::uint64_t byte_count = 0;
    SimTime install_time = 0.0;
    SimTime last_matched = 0.0;
    SimTime idle_timeout = 10.0;

    HostId dest_host() const { return match_key.dest_host(); }

    bool idle(SimTime now) const { return now - last_matched >= idle_timeout; }
};

struct MatchResult {
    std::optional<EntryId> entry;

    bool hit() const { return entry.has_value(); }
};

/// (destination host, entry count) pairs, ascending by host id.
struct DestCount {
    HostId host;
    std::uint64_t count = 0;
    bool operator==(const DestCount&) const = default;
};

/// Capacity-bounded single flow table.
///
/// Lookups try the FMS key first and fall back to the destination's MMOS
/// entry, so a full-match rule shadows the aggregated one.
class FlowTable {
public:
    explicit FlowTable(std::size_t capacity) : capacity_(capacity) {
        assert(capacity > 0);
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    bool full() const { return entries_.size() >= capacity_; }

    MatchResult match_packet(const PacketHeader& pkt, SimTime now) {
        auto it = entries_.find(MatchKey::fms(pkt));
        if (it == entries_.end())
            it = entries_.find(MatchKey::mmos(pkt.dst_mac));
        if (it == entries_.end())
            return {};
        FlowEntry& e = it->second;
        e.packet_count += 1;
        e.byte_count += pkt.bytes;
        e.last_matched = std::max(e.last_matched, now);
        return {e.entry_id};
    }

    /// Installs `key`, or refreshes it if already present. Returns nullopt
    /// when the key is new and the table is at capacity.
    std::optional<EntryId> try_install(const MatchKey& key, SimTime now,
                                       SimTime idle_timeout) {
        assert(key.well_formed() && idle_timeout > 0);
        if (auto it = entries_.find(key); it != entries_.end()) {
            it->second.last_matched = std::max(it->second.last_matched, now);
            return it->second.entry_id;
        }
        if (full())
            return std::nullopt;
        FlowEntry e;
        e.entry_id = next_id_++;
        e.match_key = key;
        e.install_time = now;
        e.last_matched = now;
        e.idle_timeout = idle_timeout;
        entries_.emplace(key, e);
        return e.entry_id;
    }

    /// Throws TableFull instead of returning nullopt.
    EntryId install_entry(const MatchKey& key, SimTime now, SimTime idle_timeout) {
        if (auto id = try_install(key, now, idle_timeout))
            return *id;
        throw TableFull();
    }

    /// Removes and returns every entry idle at `now`, ordered by entry id.
    std::vector<FlowEntry> evict_idle(SimTime now) {
        std::vector<FlowEntry> out;
        for (auto it = entries_.begin(); it != entries_.end();) {
            if (it->second.idle(now)) {
                out.push_back(it->second);
                it = entries_.erase(it);
            } else {
                ++it;
            }
        }
        sort_by_id(out);
        return out;
    }

    std::vector<FlowEntry> remove(std::span<const MatchKey> keys) {
        std::vector<FlowEntry> out;
        for (const auto& k : keys) {
            if (auto it = entries_.find(k); it != entries_.end()) {
                out.push_back(it->second);
                entries_.erase(it);
            }
        }
        sort_by_id(out);
        return out;
    }

    std::vector<MatchKey> keys_for(HostId host, MatchScheme scheme) const {
        std::vector<MatchKey> out;
        for (const auto& [k, e] : entries_)
            if (k.dst_mac == host && k.scheme == scheme)
                out.push_back(k);
        return out;
    }

    std::vector<DestCount> dest_flow_counts() const {
        std::map<HostId, std::uint64_t> counts;
        for (const auto& [k, e] : entries_)
            ++counts[k.dest_host()];
        std::vector<DestCount> out;
        out.reserve(counts.size());
        for (const auto& [h, c] : counts)
            out.push_back({h, c});
        return out;
    }

    const FlowEntry* find(const MatchKey& key) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? nullptr : &it->second;
    }

    /// Entries in key order.
    const std::map<MatchKey, FlowEntry>& entries() const { return entries_; }

private:
    static void sort_by_id(std::vector<FlowEntry>& v) {
        std::sort(v.begin(), v.end(), [](const FlowEntry& a, const FlowEntry& b) {
            return a.entry_id < b.entry_id;
        });
    }

    std::size_t capacity_;
    EntryId next_id_ = 1;
    std::map<MatchKey, FlowEntry> entries_;
};

} // namespace datasim

#endif // DATASIM_FLOW_TABLE_HPP
