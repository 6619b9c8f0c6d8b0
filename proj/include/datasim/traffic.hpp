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

#ifndef DATASIM_TRAFFIC_HPP
#define DATASIM_TRAFFIC_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "datasim/rng.hpp"
#include "datasim/topology.hpp"

namespace datasim {

struct TrafficMix {
    double client_to_server = 0.6;
    double client_to_client = 0.1;
    double internet_to_server = 0.3;
};

/// Background load. Every request flow opens with a fresh 5-tuple, so `rate`
/// is the aggregate new-flow rate offered to the network.
struct TrafficProfile {
    double rate = 10.0;  // new flows per second (R)
    TrafficMix mix;
    double duration = 120.0;
    std::uint64_t seed = 1;

    std::uint32_t min_packets = 2;   // request packets per flow
    std::uint32_t max_packets = 6;
    double packet_gap = 0.1;         // mean seconds between request packets
    bool responses = true;           // one reversed packet per request packet
    double response_delay = 0.002;

    void validate() const {
        if (!(rate > 0))
            throw ConfigInvalid("traffic.rate: must be > 0");
        if (!(duration > 0))
            throw ConfigInvalid("traffic.duration: must be > 0");
        const double sum = mix.client_to_server + mix.client_to_client + mix.internet_to_server;
        if (mix.client_to_server < 0 || mix.client_to_client < 0 || mix.internet_to_server < 0 ||
            std::abs(sum - 1.0) > 1e-9)
            throw ConfigInvalid("traffic.mix: fractions must be nonnegative and sum to 1");
        if (min_packets == 0 || max_packets < min_packets)
            throw ConfigInvalid("traffic.min_packets/max_packets: need 1 <= min <= max");
        if (!(packet_gap > 0) || response_delay < 0)
            throw ConfigInvalid("traffic.packet_gap: must be > 0");
    }
};

struct AttackProfile {
    std::vector<HostId> attackers;
    std::vector<HostId> victims;
    double syn_rate = 10.0;  // SYN packets per second per attacker
    double start = 0.0;
    double duration = 0.0;
    std::uint64_t seed = 7;

    void validate() const {
        if (!(syn_rate > 0))
            throw ConfigInvalid("attack.syn_rate: must be > 0");
        if (!attackers.empty() && victims.empty())
            throw ConfigInvalid("attack.victims: required when attackers are set");
        if (start < 0 || duration < 0)
            throw ConfigInvalid("attack.start/duration: must be >= 0");
    }
};

struct ScheduledPacket {
    PacketHeader header;
    bool attack = false;

    SimTime time() const { return header.timestamp; }
    bool operator==(const ScheduledPacket&) const = default;
};

using Schedule = std::vector<ScheduledPacket>;

namespace detail {

/// Source ports handed out sequentially per host from a seeded offset.
class PortAllocator {
public:
    explicit PortAllocator(Rng& rng) : rng_(rng) {}

    std::uint16_t next(HostId host) {
        auto it = next_.find(host);
        if (it == next_.end())
            it = next_.emplace(host, static_cast<std::uint32_t>(rng_.below(kSpan))).first;
        const std::uint32_t p = kFirst + (it->second % kSpan);
        ++it->second;
        return static_cast<std::uint16_t>(p);
    }

private:
    static constexpr std::uint32_t kFirst = 1024;
    static constexpr std::uint32_t kSpan = 65536 - kFirst;
    Rng& rng_;
    std::map<HostId, std::uint32_t> next_;
};

inline void sort_schedule(Schedule& s) {
    std::stable_sort(s.begin(), s.end(), [](const ScheduledPacket& a, const ScheduledPacket& b) {
        return a.header.timestamp < b.header.timestamp;
    });
}

} // namespace detail

/// Poisson request arrivals at `profile.rate`; each request is a short TCP
/// flow of min..max packets, optionally answered packet-for-packet on the
/// reversed 5-tuple.
inline Schedule generate_schedule(const TrafficProfile& profile, const Topology& topo) {
    profile.validate();
    Rng rng(profile.seed);
    detail::PortAllocator ports(rng);
    const auto& clients = topo.clients();
    const auto& servers = topo.servers();
    const auto& inet = topo.internet();
    const bool have_inet = !inet.empty();
    const bool cc_ok = clients.size() > 1;

    Schedule out;
    double t = rng.exponential(profile.rate);
    while (t < profile.duration) {
        const double u = rng.uniform01();
        const Host* src;
        const Host* dst;
        std::uint16_t dst_port = 80;
        if (u < profile.mix.client_to_server || (!cc_ok && !have_inet)) {
            src = &clients[rng.below(clients.size())];
            dst = &servers[rng.below(servers.size())];
        } else if (u < profile.mix.client_to_server + profile.mix.client_to_client && cc_ok) {
            src = &clients[rng.below(clients.size())];
            do {
                dst = &clients[rng.below(clients.size())];
            } while (dst == src);
            dst_port = 5001;
        } else if (have_inet) {
            src = &inet[rng.below(inet.size())];
            dst = &servers[rng.below(servers.size())];
        } else {
            src = &clients[rng.below(clients.size())];
            dst = &servers[rng.below(servers.size())];
        }

        PacketHeader h;
        h.src_mac = src->mac;
        h.dst_mac = dst->mac;
        h.src_ip = src->ip;
        h.dst_ip = dst->ip;
        h.proto = Proto::TCP;
        h.src_port = ports.next(src->mac);
        h.dst_port = dst_port;

        const auto span = profile.max_packets - profile.min_packets + 1;
        const auto n = profile.min_packets + static_cast<std::uint32_t>(rng.below(span));
        double pt = t;
        for (std::uint32_t k = 0; k < n; ++k) {
            if (k > 0)
                pt += rng.exponential(1.0 / profile.packet_gap);
            if (pt >= profile.duration)
                break;
            h.timestamp = pt;
            h.flags = k == 0 ? kFlagSyn : kFlagAck;
            h.bytes = k == 0 ? 74 : 200 + static_cast<std::uint32_t>(rng.below(1000));
            out.push_back({h, false});
            if (profile.responses && pt + profile.response_delay < profile.duration) {
                PacketHeader r = reversed(h);
                r.timestamp = pt + profile.response_delay;
                r.flags = k == 0 ? (kFlagSyn | kFlagAck) : kFlagAck;
                r.bytes = k == 0 ? 74 : 500 + static_cast<std::uint32_t>(rng.below(1000));
                out.push_back({r, false});
            }
        }
        t += rng.exponential(profile.rate);
    }
    detail::sort_schedule(out);
    return out;
}

/// SYN flood: one Poisson stream per attacker, each packet on a fresh source
/// port towards a uniformly drawn victim.
inline Schedule generate_attack(const AttackProfile& profile, const Topology& topo) {
    profile.validate();
    Schedule out;
    if (profile.attackers.empty() || profile.duration <= 0)
        return out;
    Rng rng(profile.seed);
    detail::PortAllocator ports(rng);
    const double end = profile.start + profile.duration;
    for (HostId a : profile.attackers) {
        const Host& src = topo.host(a);
        Rng stream = rng.fork(a.value);
        double t = profile.start + stream.exponential(profile.syn_rate);
        while (t < end) {
            const Host& dst = topo.host(profile.victims[stream.below(profile.victims.size())]);
            PacketHeader h;
            h.src_mac = src.mac;
            h.dst_mac = dst.mac;
            h.src_ip = src.ip;
            h.dst_ip = dst.ip;
            h.proto = Proto::TCP;
            h.src_port = ports.next(src.mac);
            h.dst_port = 80;
            h.flags = kFlagSyn;
            h.bytes = 60;
            h.timestamp = t;
            out.push_back({h, true});
            t += stream.exponential(profile.syn_rate);
        }
    }
    detail::sort_schedule(out);
    return out;
}

inline Schedule merge(Schedule a, const Schedule& b) {
    a.insert(a.end(), b.begin(), b.end());
    detail::sort_schedule(a);
    return a;
}

//------------------------------------------------------------------------------
// CSV replay format:
//   time,src_mac,dst_mac,src_ip,dst_ip,proto,src_port,dst_port,flags,bytes,attack

inline constexpr const char* kScheduleCsvHeader =
    "time,src_mac,dst_mac,src_ip,dst_ip,proto,src_port,dst_port,flags,bytes,attack";

inline void write_schedule_csv(const Schedule& s, std::ostream& out) {
    out << kScheduleCsvHeader << '\n';
    char buf[256];
    for (const auto& p : s) {
        const auto& h = p.header;
        std::snprintf(buf, sizeof buf, "%.17g,%llu,%llu,%u,%u,%u,%u,%u,%u,%u,%d\n", h.timestamp,
                      static_cast<unsigned long long>(h.src_mac.value),
                      static_cast<unsigned long long>(h.dst_mac.value), h.src_ip, h.dst_ip,
                      static_cast<unsigned>(h.proto), h.src_port, h.dst_port, h.flags, h.bytes,
                      p.attack ? 1 : 0);
        out << buf;
    }
}

inline Schedule read_schedule_csv(std::istream& in) {
    Schedule s;
    std::string line;
    if (!std::getline(in, line) || line != kScheduleCsvHeader)
        throw FormatError("schedule csv: unexpected header");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        double t;
        unsigned long long smac, dmac;
        unsigned sip, dip, proto, sport, dport, flags, bytes;
        int attack;
        if (std::sscanf(line.c_str(), "%lf,%llu,%llu,%u,%u,%u,%u,%u,%u,%u,%d", &t, &smac, &dmac,
                        &sip, &dip, &proto, &sport, &dport, &flags, &bytes, &attack) != 11 ||
            (proto != 6 && proto != 17) || sport > 65535 || dport > 65535)
            throw FormatError("schedule csv: malformed line " + std::to_string(lineno));
        ScheduledPacket p;
        p.header = {MacAddress{smac}, MacAddress{dmac}, sip, dip, static_cast<Proto>(proto),
                    static_cast<std::uint16_t>(sport), static_cast<std::uint16_t>(dport),
                    static_cast<std::uint8_t>(flags), bytes, t};
        p.attack = attack != 0;
        if (!s.empty() && t < s.back().header.timestamp)
            throw FormatError("schedule csv: timestamps decrease at line " + std::to_string(lineno));
        s.push_back(p);
    }
    return s;
}

} // namespace datasim

#endif // DATASIM_TRAFFIC_HPP
