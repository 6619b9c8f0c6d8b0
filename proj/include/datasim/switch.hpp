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

#ifndef DATASIM_SWITCH_HPP
#define DATASIM_SWITCH_HPP

#include <optional>
#include <variant>
#include <vector>

#include "datasim/flow_table.hpp"

namespace datasim {

enum class Health : std::uint8_t { Healthy, Degraded, Disconnected };

inline const char* to_string(Health h) {
    switch (h) {
    case Health::Healthy: return "Healthy";
    case Health::Degraded: return "Degraded";
    case Health::Disconnected: return "Disconnected";
    }
    return "?";
}

enum class ErrorKind : std::uint8_t { TableFull, FlowRuleException, ChannelDisconnected };

inline const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::TableFull: return "TableFull";
    case ErrorKind::FlowRuleException: return "FlowRuleException";
    case ErrorKind::ChannelDisconnected: return "ChannelDisconnected";
    }
    return "?";
}

struct ErrorRecord {
    SimTime time;
    ErrorKind kind;
};

struct FlowModAdd {
    MatchKey key;
    SimTime idle_timeout = 10.0;
};

struct FlowModRemove {
    std::vector<MatchKey> keys;
};

using FlowMod = std::variant<FlowModAdd, FlowModRemove>;

enum class PacketOutcome : std::uint8_t { Forwarded, PacketIn, Dropped };

struct FlowModResult {
    bool applied = false;            // false when rejected (full or disconnected)
    std::optional<EntryId> added;
    std::vector<FlowEntry> removed;  // become FlowRemoved notifications
};

/// One simulated switch: a single flow table plus the degradation state
/// machine that stands in for the controller-observed errors.
///
///   Healthy  -> Degraded      a TableFull inside the current observation window
///   Degraded -> Disconnected  degradation lasting disconnect_delay seconds
///   Degraded -> Healthy       one full observation window with no errors
///                             and f < f_cap throughout
class SwitchState {
public:
    SwitchState(SwitchId id, std::size_t f_cap, SimTime disconnect_delay)
        : id_(id), table_(f_cap), disconnect_delay_(disconnect_delay) {}

    SwitchId id() const { return id_; }
    Health health() const { return health_; }
    const FlowTable& table() const { return table_; }
    const std::vector<ErrorRecord>& error_log() const { return errors_; }
    std::optional<SimTime> degraded_since() const { return degraded_since_; }
    std::optional<SimTime> disconnected_at() const { return disconnected_at_; }
    SimTime disconnect_delay() const { return disconnect_delay_; }

    PacketOutcome process_packet(const PacketHeader& pkt, SimTime now) {
        if (health_ == Health::Disconnected)
            return PacketOutcome::Dropped;
        return table_.match_packet(pkt, now).hit() ? PacketOutcome::Forwarded
                                                   : PacketOutcome::PacketIn;
    }

    FlowModResult apply_flow_mod(const FlowMod& mod, SimTime now) {
        FlowModResult r;
        if (health_ == Health::Disconnected)
            return r;
        if (const auto* add = std::get_if<FlowModAdd>(&mod)) {
            r.added = table_.try_install(add->key, now, add->idle_timeout);
            r.applied = r.added.has_value();
            if (!r.applied)
                log_error(now, ErrorKind::TableFull);
        } else {
            const auto& rm = std::get<FlowModRemove>(mod);
            r.removed = table_.remove(rm.keys);
            r.applied = true;
        }
        note_size();
        return r;
    }

    std::vector<FlowEntry> evict_idle(SimTime now) {
        if (health_ == Health::Disconnected)
            return {};
        auto out = table_.evict_idle(now);
        note_size();
        return out;
    }

    void log_error(SimTime now, ErrorKind kind) {
        errors_.push_back({now, kind});
        if (kind == ErrorKind::TableFull && !window_error_)
            window_error_ = now;
    }

    /// Degrade / disconnect transitions; safe to call at any event time.
    Health update_health(SimTime now) {
        if (health_ == Health::Disconnected)
            return health_;
        if (health_ == Health::Healthy && window_error_) {
            health_ = Health::Degraded;
            degraded_since_ = *window_error_;
        }
        if (health_ == Health::Degraded && now >= *degraded_since_ + disconnect_delay_) {
            health_ = Health::Disconnected;
            disconnected_at_ = now;
            log_error(now, ErrorKind::ChannelDisconnected);
        }
        return health_;
    }

    /// Ends the observation window at `now`: applies the recovery transition
    /// and starts a new window. update_health runs first.
    Health close_window(SimTime now) {
        update_health(now);
        if (health_ == Health::Degraded && !window_error_ && window_max_f_ < table_.capacity()) {
            health_ = Health::Healthy;
            degraded_since_.reset();
        }
        window_error_.reset();
        window_max_f_ = table_.size();
        return health_;
    }

private:
    void note_size() { window_max_f_ = std::max(window_max_f_, table_.size()); }

    SwitchId id_;
    FlowTable table_;
    SimTime disconnect_delay_;
    Health health_ = Health::Healthy;
    std::vector<ErrorRecord> errors_;
    std::optional<SimTime> degraded_since_;
    std::optional<SimTime> disconnected_at_;
    std::optional<SimTime> window_error_;
    std::size_t window_max_f_ = 0;
};

} // namespace datasim

#endif // DATASIM_SWITCH_HPP
