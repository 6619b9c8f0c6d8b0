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

#ifndef DATASIM_SIMULATOR_HPP
#define DATASIM_SIMULATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "datasim/controller.hpp"
#include "datasim/data_app.hpp"
#include "datasim/ids.hpp"
#include "datasim/switch.hpp"
#include "datasim/topology.hpp"
#include "datasim/traffic.hpp"

namespace datasim {

enum class EventKind : std::uint8_t {
    FlowMod,
    PacketIn,
    FlowRemoved,
    EvictionSweep,
    ObservationTick,
    PacketArrival,
};

inline const char* to_string(EventKind k) {
    switch (k) {
    case EventKind::FlowMod: return "FlowMod";
    case EventKind::PacketIn: return "PacketIn";
    case EventKind::FlowRemoved: return "FlowRemoved";
    case EventKind::EvictionSweep: return "EvictionSweep";
    case EventKind::ObservationTick: return "ObservationTick";
    case EventKind::PacketArrival: return "PacketArrival";
    }
    return "?";
}

/// Where the IDS looks: one feature vector over every switch's records, or
/// one per switch with the window flagged when any switch is.
enum class IdsScope : std::uint8_t { Network, PerSwitch };

inline const char* to_string(IdsScope s) { return s == IdsScope::Network ? "network" : "per_switch"; }

struct SimConfig {
    TopologyParams topology;
    AnalyzerConfig analyzer;
    double duration = 120.0;
    double ctrl_latency = 0.0;
    double eviction_interval = 1.0;
    double disconnect_delay_min = 7.0;
    double disconnect_delay_max = 10.0;
    std::optional<MatchScheme> response_scheme = MatchScheme::MMOS;
    std::size_t ids_window_periods = 3;
    std::uint64_t seed = 1;
    double ids_attack_fraction = 0.2;  // labelling threshold for SOM training windows
    IdsScope ids_scope = IdsScope::PerSwitch;
    std::size_t svm_label_horizon = 2;  // periods ahead an error still marks a sample -1

    void validate() const {
        topology.validate();
        analyzer.validate();
        if (!(duration > 0))
            throw ConfigInvalid("duration: must be > 0");
        if (ctrl_latency < 0)
            throw ConfigInvalid("ctrl_latency: must be >= 0");
        if (!(eviction_interval > 0))
            throw ConfigInvalid("eviction_interval: must be > 0");
        if (!(disconnect_delay_min > 0) || disconnect_delay_max < disconnect_delay_min)
            throw ConfigInvalid("disconnect_delay: need 0 < min <= max");
        if (ids_window_periods == 0)
            throw ConfigInvalid("ids_window_periods: must be > 0");
    }
};

struct IdsWindow {
    SimTime start = 0.0;
    SimTime end = 0.0;
    std::optional<Verdict> verdict;  // nullopt: statistics unavailable
    bool attack_truth = false;       // window lies inside the attack interval
};

struct SwitchReport {
    SwitchId id = 0;
    std::optional<SimTime> first_error;
    std::optional<SimTime> first_table_full;
    std::optional<SimTime> disconnected_at;
    std::size_t table_full_errors = 0;
    std::size_t flow_rule_exceptions = 0;
    std::size_t max_entries = 0;
    std::uint64_t packet_in = 0;
    std::uint64_t offered = 0;
    std::uint64_t forwarded = 0;
    std::uint64_t dropped = 0;
};

struct SimResult {
    std::vector<std::size_t> entries_series;           // total entries, one per second
    std::vector<std::vector<std::size_t>> switch_series;  // [switch][second]
    std::vector<std::uint64_t> packet_in_series;       // packet_in per second
    std::uint64_t total_packet_in = 0;
    std::vector<SwitchReport> switches;
    std::vector<AnalyzerLogRecord> analyzer_log;
    std::vector<IdsWindow> ids_windows;
    std::vector<LabeledFeatures> ids_samples;   // per switch-window, ground-truth labelled
    std::vector<ObservationSample> svm_samples;  // labelled by observed errors
    std::uint64_t trace_digest = 0;
    std::size_t trace_events = 0;
    std::optional<SimTime> controller_suspended_at;
};

/// Single-threaded discrete-event run over a fixed packet schedule.
class Simulator {
public:
    Simulator(SimConfig cfg, Schedule schedule, std::shared_ptr<const SvmModel> model = nullptr,
              std::shared_ptr<const SomGrid> som = nullptr,
              std::optional<std::pair<SimTime, SimTime>> attack_interval = std::nullopt)
        : cfg_(std::move(cfg)), topo_(cfg_.topology), schedule_(std::move(schedule)),
          controller_(AggregationPolicy(cfg_.analyzer.default_scheme()), cfg_.analyzer.idle_timeout),
          model_(std::move(model)), som_(std::move(som)), attack_interval_(attack_interval) {
        cfg_.validate();
        if (cfg_.analyzer.mode == AnalyzerMode::DATA && !model_)
            throw ConfigInvalid("analyzer.mode=DATA requires an SVM model");
        controller_.set_response_scheme(topo_.server_macs(), cfg_.response_scheme);
        Rng rng(cfg_.seed ^ 0xD15C0ull);
        for (SwitchId s = 0; s < topo_.switch_count(); ++s) {
            Rng r = rng.fork(s);
            const double delay = r.uniform(cfg_.disconnect_delay_min, cfg_.disconnect_delay_max);
            switches_.emplace_back(s, cfg_.analyzer.f_cap, delay);
        }
        reports_.resize(switches_.size());
        for (SwitchId s = 0; s < switches_.size(); ++s)
            reports_[s].id = s;
        ids_state_.resize(switches_.size());
        for (const auto& p : schedule_) {
            if (!topo_.has_host(p.header.src_mac) || !topo_.has_host(p.header.dst_mac))
                throw ConfigInvalid("schedule references a host outside the topology");
            if (p.attack)
                attack_keys_.insert(MatchKey::fms(p.header));
        }
        if (model_)
            db_.set_model(model_);
        classifier_ = model_ ? svm_classifier(model_) : threshold_classifier(0.0);
    }

    void set_trace(std::ostream* out) { trace_out_ = out; }

    const std::vector<SwitchState>& switches() const { return switches_; }
    const Controller& controller() const { return controller_; }
    const SharedDatabase& database() const { return db_; }
    const Topology& topology() const { return topo_; }

    SimResult run() {
        const auto seconds = static_cast<std::size_t>(std::ceil(cfg_.duration - 1e-9));
        result_.entries_series.assign(seconds, 0);
        result_.packet_in_series.assign(seconds, 0);
        result_.switch_series.assign(switches_.size(), std::vector<std::size_t>(seconds, 0));

        for (std::size_t i = 0; i < schedule_.size(); ++i)
            if (schedule_[i].time() < cfg_.duration)
                push({schedule_[i].time(), EventKind::PacketArrival, switch_of(i, 0), 0, i, 0, {}});
        for (double t = cfg_.eviction_interval; t <= cfg_.duration + 1e-9; t += cfg_.eviction_interval)
            push({t, EventKind::EvictionSweep, 0, 0, 0, 0, {}});
        const double period = cfg_.analyzer.observation_period;
        for (std::uint64_t k = 1; k * period <= cfg_.duration + 1e-9; ++k)
            push({k * period, EventKind::ObservationTick, 0, 0, k, 0, {}});

        while (!queue_.empty()) {
            Event ev = queue_.top();
            queue_.pop();
            dispatch(ev);
        }

        finish();
        return result_;
    }

    /// Packets currently held at switches waiting for a flow_mod.
    std::uint64_t pending() const { return pending_; }

private:
    struct Event {
        SimTime time;
        EventKind kind;
        SwitchId sw;
        std::uint64_t seq;
        std::size_t packet;  // schedule index, or period index for ticks
        std::size_t hop;
        std::optional<FlowModAdd> mod;
    };

    struct EventOrder {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time != b.time)
                return a.time > b.time;
            if (a.kind != b.kind)
                return a.kind > b.kind;
            if (a.sw != b.sw)
                return a.sw > b.sw;
            return a.seq > b.seq;
        }
    };

    struct IdsSwitchState {
        std::map<EntryId, std::pair<std::uint64_t, std::uint64_t>> snapshot;  // packets, bytes
        std::vector<FlowEntry> removed;
    };

    void push(Event ev) {
        ev.seq = next_seq_++;
        queue_.push(std::move(ev));
    }

    SwitchId switch_of(std::size_t packet, std::size_t hop) const {
        const auto& h = schedule_[packet].header;
        return topo_.route(h.src_mac, h.dst_mac)[hop];
    }

    std::size_t hops_of(std::size_t packet) const {
        const auto& h = schedule_[packet].header;
        return topo_.route(h.src_mac, h.dst_mac).size();
    }

    void trace(SimTime t, SwitchId sw, EventKind kind, const std::string& info) {
        char head[96];
        std::snprintf(head, sizeof head, "{\"t\":%.6f,\"sw\":%u,\"kind\":\"%s\",\"info\":\"", t, sw,
                      to_string(kind));
        const std::string line = std::string(head) + info + "\"}";
        for (unsigned char c : line) {
            digest_ ^= c;
            digest_ *= 0x100000001B3ull;
        }
        digest_ ^= '\n';
        digest_ *= 0x100000001B3ull;
        ++result_.trace_events;
        if (trace_out_)
            *trace_out_ << line << '\n';
    }

    std::size_t second_index(SimTime t) const {
        auto i = static_cast<std::size_t>(std::floor(t));
        return std::min(i, result_.packet_in_series.size() - 1);
    }

    void dispatch(const Event& ev) {
        switch (ev.kind) {
        case EventKind::PacketArrival: on_arrival(ev); break;
        case EventKind::PacketIn: on_packet_in(ev); break;
        case EventKind::FlowMod: on_flow_mod(ev); break;
        case EventKind::EvictionSweep: on_sweep(ev.time); break;
        case EventKind::ObservationTick: on_tick(ev.time, ev.packet); break;
        case EventKind::FlowRemoved: break;
        }
    }

    void refresh_health(SwitchState& sw, SimTime now) {
        const bool was_up = sw.health() != Health::Disconnected;
        sw.update_health(now);
        if (was_up && sw.health() == Health::Disconnected) {
            trace(now, sw.id(), EventKind::ObservationTick, "disconnected");
            if (!result_.controller_suspended_at)
                result_.controller_suspended_at = now;
        }
    }

    void forward(std::size_t packet, std::size_t hop, SimTime now) {
        if (hop + 1 < hops_of(packet))
            push({now, EventKind::PacketArrival, switch_of(packet, hop + 1), 0, packet, hop + 1, {}});
    }

    void on_arrival(const Event& ev) {
        SwitchState& sw = switches_[ev.sw];
        refresh_health(sw, ev.time);
        auto& rep = reports_[ev.sw];
        ++rep.offered;
        const PacketHeader& h = schedule_[ev.packet].header;
        switch (sw.process_packet(h, ev.time)) {
        case PacketOutcome::Dropped:
            ++rep.dropped;
            break;
        case PacketOutcome::Forwarded:
            ++rep.forwarded;
            forward(ev.packet, ev.hop, ev.time);
            break;
        case PacketOutcome::PacketIn:
            ++pending_;
            push({ev.time, EventKind::PacketIn, ev.sw, 0, ev.packet, ev.hop, {}});
            break;
        }
    }

    void on_packet_in(const Event& ev) {
        SwitchState& sw = switches_[ev.sw];
        refresh_health(sw, ev.time);
        if (sw.health() == Health::Disconnected) {
            --pending_;
            ++reports_[ev.sw].dropped;
            return;
        }
        ++reports_[ev.sw].packet_in;
        ++result_.packet_in_series[second_index(ev.time)];
        FlowModAdd add = controller_.handle_packet_in(ev.sw, schedule_[ev.packet].header);
        trace(ev.time, ev.sw, EventKind::PacketIn, to_string(add.key.scheme));
        push({ev.time + cfg_.ctrl_latency, EventKind::FlowMod, ev.sw, 0, ev.packet, ev.hop, add});
    }

    void on_flow_mod(const Event& ev) {
        SwitchState& sw = switches_[ev.sw];
        refresh_health(sw, ev.time);
        --pending_;
        auto r = sw.apply_flow_mod(*ev.mod, ev.time);
        note_removed(ev.sw, r.removed, ev.time);
        reports_[ev.sw].max_entries = std::max(reports_[ev.sw].max_entries, sw.table().size());
        refresh_health(sw, ev.time);
        if (r.applied) {
            trace(ev.time, ev.sw, EventKind::FlowMod, "add");
            ++reports_[ev.sw].forwarded;
            forward(ev.packet, ev.hop, ev.time);
        } else {
            trace(ev.time, ev.sw, EventKind::FlowMod, "rejected");
            ++reports_[ev.sw].dropped;
        }
    }

    void note_removed(SwitchId s, const std::vector<FlowEntry>& removed, SimTime now) {
        for (const auto& e : removed) {
            trace(now, s, EventKind::FlowRemoved, to_string(e.match_key.scheme));
            ids_state_[s].removed.push_back(e);
        }
    }

    void on_sweep(SimTime now) {
        std::size_t total = 0;
        const std::size_t idx = second_index(now - 1e-9);
        for (auto& sw : switches_) {
            refresh_health(sw, now);
            note_removed(sw.id(), sw.evict_idle(now), now);
            total += sw.table().size();
            result_.switch_series[sw.id()][idx] = sw.table().size();
        }
        result_.entries_series[idx] = total;
    }

    void on_tick(SimTime now, std::uint64_t period) {
        for (auto& sw : switches_)
            refresh_health(sw, now);

        std::vector<const SwitchState*> view;
        for (const auto& sw : switches_)
            view.push_back(&sw);
        auto step = analyzer_step(cfg_.analyzer, db_, view, controller_, classifier_, now, period);
        for (auto& action : step.actions) {
            SwitchState& sw = switches_[action.switch_id];
            for (const auto& mod : action.mods) {
                if (sw.health() == Health::Disconnected) {
                    sw.log_error(now, ErrorKind::FlowRuleException);
                    continue;
                }
                auto r = sw.apply_flow_mod(mod, now);
                note_removed(sw.id(), r.removed, now);
            }
            trace(now, sw.id(), EventKind::FlowMod,
                  std::string(action.scheme == MatchScheme::MMOS ? "demote " : "promote ") +
                      std::to_string(action.host.value));
        }
        for (auto& rec : step.log)
            result_.analyzer_log.push_back(rec);

        for (auto& sw : switches_) {
            const auto before = sw.health();
            sw.close_window(now);
            if (before != sw.health())
                trace(now, sw.id(), EventKind::ObservationTick, to_string(sw.health()));
            reports_[sw.id()].max_entries =
                std::max(reports_[sw.id()].max_entries, sw.table().size());
        }

        if (period % cfg_.ids_window_periods == 0)
            ids_window(now - period_len() * static_cast<double>(cfg_.ids_window_periods), now);
    }

    double period_len() const { return cfg_.analyzer.observation_period; }

    void ids_window(SimTime start, SimTime end) {
        IdsWindow w;
        w.start = start;
        w.end = end;
        if (attack_interval_)
            w.attack_truth = start >= attack_interval_->first - 1e-9 &&
                             end <= attack_interval_->second + 1e-9;
        const bool available = !result_.controller_suspended_at.has_value();
        bool any_attack = false;
        std::vector<FlowRecord> network;
        auto judge = [&](const std::vector<FlowRecord>& records) {
            const auto x = extract_features(records);
            std::size_t n_attack = 0;
            for (const auto& r : records)
                n_attack += r.attack;
            const bool label = static_cast<double>(n_attack) >=
                               cfg_.ids_attack_fraction * static_cast<double>(records.size());
            result_.ids_samples.push_back({x, label ? Verdict::Attack : Verdict::Normal});
            if (available && som_ && som_->detect(x) == Verdict::Attack)
                any_attack = true;
        };
        for (auto& sw : switches_) {
            auto& st = ids_state_[sw.id()];
            std::vector<FlowRecord> records;
            auto add_record = [&](const FlowEntry& e) {
                std::uint64_t p0 = 0, b0 = 0;
                if (auto it = st.snapshot.find(e.entry_id); it != st.snapshot.end())
                    std::tie(p0, b0) = it->second;
                const bool fresh = e.install_time > start;
                if (!fresh && e.packet_count == p0)
                    return;
                FlowRecord r;
                r.key = e.match_key;
                r.packets = static_cast<double>(e.packet_count - p0);
                r.bytes = static_cast<double>(e.byte_count - b0);
                // activity inside this window, like the packet and byte deltas
                r.duration = e.last_matched - std::max(e.install_time, start);
                r.attack = attack_keys_.count(e.match_key) != 0;
                records.push_back(r);
            };
            for (const auto& e : st.removed)
                add_record(e);
            std::map<EntryId, std::pair<std::uint64_t, std::uint64_t>> snap;
            if (sw.health() != Health::Disconnected) {
                for (const auto& [k, e] : sw.table().entries()) {
                    add_record(e);
                    snap[e.entry_id] = {e.packet_count, e.byte_count};
                }
            }
            st.snapshot = std::move(snap);
            st.removed.clear();
            if (records.empty() || sw.health() == Health::Disconnected)
                continue;
            if (cfg_.ids_scope == IdsScope::PerSwitch)
                judge(records);
            else
                network.insert(network.end(), records.begin(), records.end());
        }
        if (cfg_.ids_scope == IdsScope::Network && !network.empty())
            judge(network);
        if (available && som_)
            w.verdict = any_attack ? Verdict::Attack : Verdict::Normal;
        result_.ids_windows.push_back(w);
    }

    void finish() {
        for (auto& sw : switches_) {
            auto& rep = reports_[sw.id()];
            for (const auto& e : sw.error_log()) {
                if (!rep.first_error)
                    rep.first_error = e.time;
                if (e.kind == ErrorKind::TableFull) {
                    ++rep.table_full_errors;
                    if (!rep.first_table_full)
                        rep.first_table_full = e.time;
                } else if (e.kind == ErrorKind::FlowRuleException) {
                    ++rep.flow_rule_exceptions;
                }
            }
            rep.disconnected_at = sw.disconnected_at();
        }
        result_.switches = reports_;
        result_.total_packet_in = controller_.total_packet_in();
        result_.trace_digest = digest_;

        // Label each observation: -1 when the switch logged an error in this
        // period or within the next svm_label_horizon periods.
        const double period = period_len();
        const double ahead = period * static_cast<double>(cfg_.svm_label_horizon);
        for (const auto& sw : switches_) {
            for (const auto& stored : db_.samples(sw.id())) {
                const double t = static_cast<double>(stored.period) * period;
                bool bad = false;
                for (const auto& e : sw.error_log())
                    if (e.time > t - period && e.time <= t + ahead)
                        bad = true;
                if (t + ahead > cfg_.duration + 1e-9 && !bad)
                    continue;  // horizon not fully observed
                ObservationSample s = stored.sample;
                s.sign = bad ? -1 : +1;
                result_.svm_samples.push_back(s);
            }
        }
    }

    SimConfig cfg_;
    Topology topo_;
    Schedule schedule_;
    Controller controller_;
    std::shared_ptr<const SvmModel> model_;
    std::shared_ptr<const SomGrid> som_;
    std::optional<std::pair<SimTime, SimTime>> attack_interval_;
    std::vector<SwitchState> switches_;
    std::vector<SwitchReport> reports_;
    std::vector<IdsSwitchState> ids_state_;
    std::set<MatchKey> attack_keys_;
    SharedDatabase db_;
    Classifier classifier_;
    std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t pending_ = 0;
    std::uint64_t digest_ = 0xCBF29CE484222325ull;
    std::ostream* trace_out_ = nullptr;
    SimResult result_;
};

} // namespace datasim

#endif // DATASIM_SIMULATOR_HPP
