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

#ifndef DATASIM_TOPOLOGY_HPP
#define DATASIM_TOPOLOGY_HPP

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "datasim/types.hpp"

namespace datasim {

enum class HostRole : std::uint8_t { Client, Server, Internet };

struct Host {
    HostId mac;
    std::uint32_t ip = 0;
    HostRole role = HostRole::Client;
    std::uint32_t office = 0;  // clients only
};

struct TopologyParams {
    std::uint32_t offices = 4;
    std::uint32_t hosts_per_office = 6;
    std::uint32_t servers = 6;
    std::uint32_t internet_hosts = 4;

    void validate() const {
        if (offices == 0 || hosts_per_office == 0)
            throw ConfigInvalid("topology: offices and hosts_per_office must be > 0");
        if (servers == 0)
            throw ConfigInvalid("topology.servers: must be > 0");
        if (offices > 250 || hosts_per_office > 250 || servers > 250 || internet_hosts > 250)
            throw ConfigInvalid("topology: at most 250 hosts per group");
    }
};

/// Enterprise network: one edge switch per office and a core switch holding
/// the server rack and the Internet gateway.
///
///   client -> client (same office)   office
///   client -> client (other office)  office_src, core, office_dst
///   client -> server                 office, core
///   internet -> server               core
class Topology {
public:
    explicit Topology(const TopologyParams& p = {}) : params_(p) {
        p.validate();
        for (std::uint32_t o = 0; o < p.offices; ++o)
            for (std::uint32_t h = 0; h < p.hosts_per_office; ++h)
                add({MacAddress{0x020000010000ull + o * 256 + h},
                     (10u << 24) | (o << 16) | (h + 1), HostRole::Client, o},
                    clients_);
        for (std::uint32_t s = 0; s < p.servers; ++s)
            add({MacAddress{0x020000020000ull + s}, (10u << 24) | (100u << 16) | (s + 1),
                 HostRole::Server, 0},
                servers_);
        for (std::uint32_t i = 0; i < p.internet_hosts; ++i)
            add({MacAddress{0x020000030000ull + i}, (198u << 24) | (51u << 16) | (100u << 8) | (i + 1),
                 HostRole::Internet, 0},
                internet_);
    }

    const TopologyParams& params() const { return params_; }
    std::uint32_t switch_count() const { return params_.offices + 1; }
    SwitchId core_switch() const { return params_.offices; }

    const std::vector<Host>& clients() const { return clients_; }
    const std::vector<Host>& servers() const { return servers_; }
    const std::vector<Host>& internet() const { return internet_; }

    const Host& host(HostId mac) const {
        auto it = hosts_.find(mac);
        if (it == hosts_.end())
            throw Error("unknown host");
        return it->second;
    }

    bool has_host(HostId mac) const { return hosts_.count(mac) != 0; }

    std::set<HostId> server_macs() const {
        std::set<HostId> out;
        for (const auto& s : servers_)
            out.insert(s.mac);
        return out;
    }

    /// Switches traversed from `src` to `dst`, in order.
    std::vector<SwitchId> route(HostId src, HostId dst) const {
        const Host& a = host(src);
        const Host& b = host(dst);
        std::vector<SwitchId> path;
        if (a.role == HostRole::Client)
            path.push_back(a.office);
        if (!(a.role == HostRole::Client && b.role == HostRole::Client && a.office == b.office))
            path.push_back(core_switch());
        if (b.role == HostRole::Client && !(a.role == HostRole::Client && a.office == b.office))
            path.push_back(b.office);
        return path;
    }

private:
    void add(const Host& h, std::vector<Host>& group) {
        group.push_back(h);
        hosts_.emplace(h.mac, h);
    }

    TopologyParams params_;
    std::vector<Host> clients_, servers_, internet_;
    std::map<HostId, Host> hosts_;
};

} // namespace datasim

#endif // DATASIM_TOPOLOGY_HPP
