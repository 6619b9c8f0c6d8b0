#include <set>

#include <gtest/gtest.h>

#include "datasim/controller.hpp"
#include "datasim/rng.hpp"
#include "datasim/simulator.hpp"

using namespace datasim;

namespace {

PacketHeader pkt(std::uint64_t src, std::uint64_t dst, std::uint16_t sport) {
    PacketHeader h;
    h.src_mac = MacAddress{src};
    h.dst_mac = MacAddress{dst};
    h.src_ip = static_cast<std::uint32_t>(src);
    h.dst_ip = static_cast<std::uint32_t>(dst);
    h.src_port = sport;
    h.dst_port = 80;
    return h;
}

SimConfig sim_config(AnalyzerMode mode) {
    SimConfig c;
    c.analyzer.mode = mode;
    c.duration = 20.0;
    c.response_scheme.reset();
    return c;
}

} // namespace

TEST(AggregationPolicy, FallsBackToDefault) {
    AggregationPolicy p(MatchScheme::FMS);
    EXPECT_EQ(p.lookup(1, MacAddress{5}), MatchScheme::FMS);
    p.set(1, MacAddress{5}, MatchScheme::MMOS);
    EXPECT_EQ(p.lookup(1, MacAddress{5}), MatchScheme::MMOS);
    EXPECT_EQ(p.lookup(2, MacAddress{5}), MatchScheme::FMS);
    p.set(1, MacAddress{5}, MatchScheme::FMS);
    EXPECT_TRUE(p.overrides().empty());
}

TEST(Controller, PacketInUnderMmosAddsDestinationKey) {
    AggregationPolicy p(MatchScheme::FMS);
    p.set(1, MacAddress{9}, MatchScheme::MMOS);
    Controller c(p, 10.0);
    const auto mod = c.handle_packet_in(1, pkt(2, 9, 1234));
    EXPECT_EQ(mod.key, MatchKey::mmos(MacAddress{9}));
    EXPECT_DOUBLE_EQ(mod.idle_timeout, 10.0);
}

TEST(Controller, PacketInUnderFmsAddsFullKey) {
    Controller c(AggregationPolicy(MatchScheme::FMS), 10.0);
    const auto p = pkt(2, 9, 1234);
    const auto mod = c.handle_packet_in(1, p);
    EXPECT_EQ(mod.key, MatchKey::fms(p));
    EXPECT_EQ(mod.key.src_port, 1234);
    EXPECT_EQ(c.total_packet_in(), 1u);
}

TEST(Controller, ResponseSourcesUseResponseScheme) {
    Controller c(AggregationPolicy(MatchScheme::FMS), 10.0);
    c.set_response_scheme({MacAddress{9}}, MatchScheme::MMOS);
    EXPECT_EQ(c.handle_packet_in(0, pkt(9, 2, 80)).key.scheme, MatchScheme::MMOS);
    EXPECT_EQ(c.handle_packet_in(0, pkt(2, 9, 80)).key.scheme, MatchScheme::FMS);
}

// 40 FMS entries for host A: demotion changes f by 1 - 40
TEST(Controller, DemotionArithmetic) {
    SwitchState sw(1, 100, 8.0);
    Controller c(AggregationPolicy(MatchScheme::FMS), 10.0);
    for (std::uint16_t i = 0; i < 40; ++i)
        sw.apply_flow_mod(c.handle_packet_in(1, pkt(2, 7, i)), 0.0);
    for (std::uint16_t i = 0; i < 5; ++i)
        sw.apply_flow_mod(c.handle_packet_in(1, pkt(2, 8, i)), 0.0);
    const auto f_before = sw.table().size();
    const auto mods = c.set_scheme(sw.table(), 1, MacAddress{7}, MatchScheme::MMOS);
    ASSERT_EQ(mods.size(), 2u);
    ASSERT_TRUE(std::holds_alternative<FlowModRemove>(mods[0]));
    EXPECT_EQ(std::get<FlowModRemove>(mods[0]).keys.size(), 40u);
    ASSERT_TRUE(std::holds_alternative<FlowModAdd>(mods[1]));
    EXPECT_EQ(std::get<FlowModAdd>(mods[1]).key, MatchKey::mmos(MacAddress{7}));
    for (const auto& m : mods)
        sw.apply_flow_mod(m, 1.0);
    EXPECT_EQ(static_cast<long>(sw.table().size()) - static_cast<long>(f_before), 1 - 40);
    EXPECT_EQ(c.policy().lookup(1, MacAddress{7}), MatchScheme::MMOS);
}

TEST(Controller, SetSchemeIsIdempotent) {
    SwitchState sw(0, 100, 8.0);
    Controller c(AggregationPolicy(MatchScheme::FMS), 10.0);
    sw.apply_flow_mod(c.handle_packet_in(0, pkt(2, 7, 1)), 0.0);
    EXPECT_FALSE(c.set_scheme(sw.table(), 0, MacAddress{7}, MatchScheme::MMOS).empty());
    EXPECT_TRUE(c.set_scheme(sw.table(), 0, MacAddress{7}, MatchScheme::MMOS).empty());
    EXPECT_TRUE(c.set_scheme(sw.table(), 0, MacAddress{8}, MatchScheme::FMS).empty());
}

TEST(Controller, PromotionRemovesOnlyTheAggregate) {
    AggregationPolicy p(MatchScheme::FMS);
    p.set(0, MacAddress{7}, MatchScheme::MMOS);
    Controller c(p, 10.0);
    const auto mods = c.set_scheme(FlowTable(4), 0, MacAddress{7}, MatchScheme::FMS);
    ASSERT_EQ(mods.size(), 1u);
    const auto& rm = std::get<FlowModRemove>(mods[0]);
    ASSERT_EQ(rm.keys.size(), 1u);
    EXPECT_EQ(rm.keys[0], MatchKey::mmos(MacAddress{7}));
}

TEST(Controller, WindowCounters) {
    Controller c(AggregationPolicy(MatchScheme::FMS), 10.0);
    EXPECT_DOUBLE_EQ(c.controller_metrics(3.0).packet_in_rate(), 0.0);
    for (std::uint16_t i = 0; i < 6; ++i)
        c.handle_packet_in(0, pkt(1, 2, i));
    const auto s = c.roll_window(3.0);
    EXPECT_EQ(s.packet_in_count, 6u);
    EXPECT_DOUBLE_EQ(s.packet_in_rate(), 2.0);
    EXPECT_EQ(c.controller_metrics(4.0).packet_in_count, 0u);
}

// random interleavings of policy changes and packet_ins
TEST(Controller, KeyGranularityMatchesPolicy) {
    Rng rng(42);
    SwitchState sw(0, 1000, 8.0);
    Controller c(AggregationPolicy(MatchScheme::FMS), 10.0);
    for (int step = 0; step < 5000; ++step) {
        const HostId host{1 + rng.below(6)};
        if (rng.uniform01() < 0.2) {
            const auto scheme = rng.uniform01() < 0.5 ? MatchScheme::MMOS : MatchScheme::FMS;
            for (const auto& m : c.set_scheme(sw.table(), 0, host, scheme))
                sw.apply_flow_mod(m, step * 0.01);
        } else {
            const auto p = pkt(100, host.value, static_cast<std::uint16_t>(rng.below(60000)));
            const auto expected = c.policy().lookup(0, host);
            const auto mod = c.handle_packet_in(0, p);
            ASSERT_EQ(mod.key.scheme, expected);
            ASSERT_TRUE(mod.key.well_formed());
        }
    }
}

// two requests to S from different ports: FMS needs two rules, MMOS one
TEST(Controller, TwoPacketTrace) {
    const Topology topo;
    const Host& inet = topo.internet()[0];
    const Host& srv = topo.servers()[0];
    Schedule s;
    for (int i = 0; i < 2; ++i) {
        PacketHeader h = pkt(inet.mac.value, srv.mac.value, static_cast<std::uint16_t>(4000 + i));
        h.src_ip = inet.ip;
        h.dst_ip = srv.ip;
        h.timestamp = 1.0 + i;
        s.push_back({h, false});
    }
    Simulator fms(sim_config(AnalyzerMode::FMS_only), s);
    const auto rf = fms.run();
    EXPECT_EQ(rf.total_packet_in, 2u);
    Simulator mmos(sim_config(AnalyzerMode::MMOS_only), s);
    const auto rm = mmos.run();
    EXPECT_EQ(rm.total_packet_in, 1u);
}

// fresh one-packet flows into the core: every packet is a packet_in under FMS
TEST(Controller, FmsPacketInRateMatchesFreshFlows) {
    const Topology topo;
    Rng rng(3);
    Schedule s;
    double t = 0.0;
    std::uint16_t port = 1024;
    while ((t += rng.exponential(20.0)) < 20.0) {
        const Host& a = topo.internet()[rng.below(topo.internet().size())];
        const Host& b = topo.servers()[rng.below(topo.servers().size())];
        PacketHeader h = pkt(a.mac.value, b.mac.value, port++);
        h.src_ip = a.ip;
        h.dst_ip = b.ip;
        h.timestamp = t;
        s.push_back({h, false});
    }
    Simulator sim(sim_config(AnalyzerMode::FMS_only), s);
    const auto r = sim.run();
    EXPECT_EQ(r.total_packet_in, s.size());
}
