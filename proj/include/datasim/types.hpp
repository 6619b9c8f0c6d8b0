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

#ifndef DATASIM_TYPES_HPP
#define DATASIM_TYPES_HPP

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace datasim {

/// Simulated time in seconds.
using SimTime = double;

using SwitchId = std::uint32_t;

/// 48-bit MAC address; also serves as the host identifier.
struct MacAddress {
    std::uint64_t value = 0;
    auto operator<=>(const MacAddress&) const = default;
};

using HostId = MacAddress;

//------------------------------------------------------------------------------
// errors

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TableFull : public Error {
public:
    TableFull() : Error("flow table full") {}
};

class DegenerateData : public Error {
public:
    using Error::Error;
};

class EmptyWindow : public Error {
public:
    EmptyWindow() : Error("empty flow-record window") {}
};

class SwitchUnreachable : public Error {
public:
    explicit SwitchUnreachable(SwitchId id)
        : Error("switch " + std::to_string(id) + " unreachable") {}
};

class ConfigInvalid : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

//------------------------------------------------------------------------------
// packets

enum class Proto : std::uint8_t { TCP = 6, UDP = 17 };

enum PacketFlags : std::uint8_t {
    kFlagNone = 0,
    kFlagSyn = 1u << 0,
    kFlagAck = 1u << 1,
};

struct PacketHeader {
    MacAddress src_mac;
    MacAddress dst_mac;
    std::uint32_t src_ip = 0;
    std::uint32_t dst_ip = 0;
    Proto proto = Proto::TCP;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint8_t flags = kFlagNone;
    std::uint32_t bytes = 64;
    SimTime timestamp = 0.0;

    bool operator==(const PacketHeader&) const = default;
};

/// The header with source and destination fields swapped.
inline PacketHeader reversed(const PacketHeader& p) {
    PacketHeader r = p;
    r.src_mac = p.dst_mac;
    r.dst_mac = p.src_mac;
    r.src_ip = p.dst_ip;
    r.dst_ip = p.src_ip;
    r.src_port = p.dst_port;
    r.dst_port = p.src_port;
    return r;
}

//------------------------------------------------------------------------------
// match keys

enum class MatchScheme : std::uint8_t { MMOS, FMS };

inline const char* to_string(MatchScheme s) {
    return s == MatchScheme::MMOS ? "MMOS" : "FMS";
}

/// Flow-table match key. Under MMOS only dst_mac is significant and every
/// other field is zero; under FMS all seven header fields are.
struct MatchKey {
    MatchScheme scheme = MatchScheme::FMS;
    MacAddress dst_mac;
    MacAddress src_mac;
    std::uint32_t src_ip = 0;
    std::uint32_t dst_ip = 0;
    Proto proto = Proto::TCP;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;

    auto operator<=>(const MatchKey&) const = default;

    HostId dest_host() const { return dst_mac; }

    static MatchKey mmos(MacAddress dst) {
        MatchKey k;
        k.scheme = MatchScheme::MMOS;
        k.dst_mac = dst;
        return k;
    }

    static MatchKey fms(const PacketHeader& p) {
        MatchKey k;
        k.scheme = MatchScheme::FMS;
        k.dst_mac = p.dst_mac;
        k.src_mac = p.src_mac;
        k.src_ip = p.src_ip;
        k.dst_ip = p.dst_ip;
        k.proto = p.proto;
        k.src_port = p.src_port;
        k.dst_port = p.dst_port;
        return k;
    }

    static MatchKey of(MatchScheme s, const PacketHeader& p) {
        return s == MatchScheme::MMOS ? mmos(p.dst_mac) : fms(p);
    }

    /// FMS key of the reverse direction; MMOS keys have no reverse.
    MatchKey reverse() const {
        MatchKey r = *this;
        r.dst_mac = src_mac;
        r.src_mac = dst_mac;
        r.src_ip = dst_ip;
        r.dst_ip = src_ip;
        r.src_port = dst_port;
        r.dst_port = src_port;
        return r;
    }

    bool well_formed() const {
        if (scheme == MatchScheme::FMS)
            return true;
        return src_mac.value == 0 && src_ip == 0 && dst_ip == 0 &&
               src_port == 0 && dst_port == 0 && proto == Proto::TCP;
    }
};

} // namespace datasim

template <>
struct std::hash<datasim::MacAddress> {
    std::size_t operator()(const datasim::MacAddress& m) const noexcept {
        return std::hash<std::uint64_t>{}(m.value);
    }
};

#endif // DATASIM_TYPES_HPP
