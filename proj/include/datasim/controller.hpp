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

#ifndef DATASIM_CONTROLLER_HPP
#define DATASIM_CONTROLLER_HPP

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "datasim/switch.hpp"

namespace datasim {

/// Matching scheme per (switch, destination host), with a network default.
class AggregationPolicy {
public:
    explicit AggregationPolicy(MatchScheme default_scheme = MatchScheme::FMS)
        : default_(default_scheme) {}

    MatchScheme default_scheme() const { return default_; }

    MatchScheme lookup(SwitchId sw, HostId host) const {
        auto it = overrides_.find({sw, host});
        return it == overrides_.end() ? default_ : it->second;
    }

    void set(SwitchId sw, HostId host, MatchScheme scheme) {
        if (scheme == default_)
            overrides_.erase({sw, host});
        else
            overrides_[{sw, host}] = scheme;
    }

    /// Hosts at `sw` whose scheme differs from the default, ascending.
    std::vector<HostId> overridden_hosts(SwitchId sw) const {
        std::vector<HostId> out;
        for (auto it = overrides_.lower_bound({sw, HostId{0}});
             it != overrides_.end() && it->first.first == sw; ++it)
            out.push_back(it->first.second);
        return out;
    }

    const std::map<std::pair<SwitchId, HostId>, MatchScheme>& overrides() const {
        return overrides_;
    }

    bool operator==(const AggregationPolicy&) const = default;

private:
    MatchScheme default_;
    std::map<std::pair<SwitchId, HostId>, MatchScheme> overrides_;
};

struct ControllerStats {
    SimTime window_start = 0.0;
    SimTime window_length = 0.0;
    std::uint64_t packet_in_count = 0;
    std::uint64_t flow_mod_count = 0;

    double packet_in_rate() const {
        return window_length > 0 ? static_cast<double>(packet_in_count) / window_length : 0.0;
    }
};

/// The built-in reactive forwarding application.
///
/// Packets whose source is listed in `response_sources` (the servers) are
/// treated as response traffic and always matched with `response_scheme`
/// when one is configured.
class Controller {
public:
    Controller(AggregationPolicy policy, SimTime idle_timeout)
        : policy_(std::move(policy)), idle_timeout_(idle_timeout) {}

    const AggregationPolicy& policy() const { return policy_; }
    SimTime idle_timeout() const { return idle_timeout_; }

    void set_response_scheme(std::set<HostId> sources, std::optional<MatchScheme> scheme) {
        response_sources_ = std::move(sources);
        response_scheme_ = scheme;
    }

    MatchScheme scheme_for(SwitchId sw, const PacketHeader& pkt) const {
        if (response_scheme_ && response_sources_.count(pkt.src_mac))
            return *response_scheme_;
        return policy_.lookup(sw, pkt.dst_mac);
    }

    FlowModAdd handle_packet_in(SwitchId sw, const PacketHeader& pkt) {
        ++window_.packet_in_count;
        ++total_packet_in_;
        ++window_.flow_mod_count;
        return {MatchKey::of(scheme_for(sw, pkt), pkt), idle_timeout_};
    }

    /// Switches the scheme of (`sw`, `host`) and returns the flow_mods that
    /// realise the change against the switch's current table. Empty when the
    /// scheme is already in effect.
    std::vector<FlowMod> set_scheme(const FlowTable& table, SwitchId sw, HostId host,
                                    MatchScheme scheme) {
        std::vector<FlowMod> mods;
        if (policy_.lookup(sw, host) == scheme)
            return mods;
        policy_.set(sw, host, scheme);
        if (scheme == MatchScheme::MMOS) {
            mods.push_back(FlowModRemove{table.keys_for(host, MatchScheme::FMS)});
            mods.push_back(FlowModAdd{MatchKey::mmos(host), idle_timeout_});
        } else {
            // FMS entries are rebuilt lazily through packet_in.
            mods.push_back(FlowModRemove{{MatchKey::mmos(host)}});
        }
        window_.flow_mod_count += mods.size();
        return mods;
    }

    /// Current window counters, then a fresh window starting at `now`.
    ControllerStats roll_window(SimTime now) {
        ControllerStats s = window_;
        s.window_length = now - window_.window_start;
        window_ = ControllerStats{};
        window_.window_start = now;
        return s;
    }

    ControllerStats controller_metrics(SimTime now) const {
        ControllerStats s = window_;
        s.window_length = now - window_.window_start;
        return s;
    }

    std::uint64_t total_packet_in() const { return total_packet_in_; }

private:
    AggregationPolicy policy_;
    SimTime idle_timeout_;
    std::set<HostId> response_sources_;
    std::optional<MatchScheme> response_scheme_;
    ControllerStats window_;
    std::uint64_t total_packet_in_ = 0;
};

} // namespace datasim

#endif // DATASIM_CONTROLLER_HPP
