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

#ifndef DATASIM_HARNESS_HPP
#define DATASIM_HARNESS_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "datasim/simulator.hpp"

namespace datasim {

using nlohmann::json;

//------------------------------------------------------------------------------
// configuration

/// A scheme under test: one of the static schemes, the threshold baseline at
/// `threshold` * f_cap, or the adaptive SVM-driven mode.
struct SchemeSpec {
    AnalyzerMode mode = AnalyzerMode::DATA;
    double threshold = 1.0;

    std::string name() const {
        if (mode != AnalyzerMode::Threshold)
            return to_string(mode);
        char buf[48];
        std::snprintf(buf, sizeof buf, "Threshold(%gf_cap)", threshold);
        return buf;
    }

    static SchemeSpec parse(const std::string& s) {
        if (s == "MMOS") return {AnalyzerMode::MMOS_only, 1.0};
        if (s == "FMS") return {AnalyzerMode::FMS_only, 1.0};
        if (s == "DATA") return {AnalyzerMode::DATA, 1.0};
        if (s.rfind("Threshold:", 0) == 0) {
            try {
                std::size_t used = 0;
                const double v = std::stod(s.substr(10), &used);
                if (used == s.size() - 10 && v > 0 && v <= 1)
                    return {AnalyzerMode::Threshold, v};
            } catch (const std::exception&) {
            }
        }
        throw ConfigInvalid("scheme '" + s + "': expected MMOS, FMS, DATA or Threshold:<(0,1]>");
    }

    std::string token() const {
        if (mode != AnalyzerMode::Threshold)
            return to_string(mode);
        char buf[48];
        std::snprintf(buf, sizeof buf, "Threshold:%g", threshold);
        return buf;
    }
};

struct ExperimentConfig {
    SimConfig sim;
    TrafficProfile traffic;
    std::optional<AttackProfile> attack;
    SchemeSpec scheme;
    std::optional<std::string> svm_model;
    std::optional<std::string> ids_model;
    std::string output_dir = "out";
    std::vector<double> sweep_rates{10.0, 20.0, 30.0};
    std::vector<SchemeSpec> sweep_schemes{
        {AnalyzerMode::MMOS_only, 1.0}, {AnalyzerMode::FMS_only, 1.0},
        {AnalyzerMode::Threshold, 0.5}, {AnalyzerMode::Threshold, 1.0},
        {AnalyzerMode::DATA, 1.0}};
    std::size_t sweep_seeds = 1;

    /// Applies the scheme to the analyzer settings and validates everything.
    void finalise() {
        sim.analyzer.mode = scheme.mode;
        if (scheme.mode == AnalyzerMode::Threshold)
            sim.analyzer.f_thres = scheme.threshold * static_cast<double>(sim.analyzer.f_cap);
        traffic.duration = sim.duration;
        sim.validate();
        traffic.validate();
        if (attack)
            attack->validate();
        if (sweep_rates.empty() || sweep_schemes.empty() || sweep_seeds == 0)
            throw ConfigInvalid("sweep: rates, schemes and seeds must be non-empty");
    }
};

namespace detail {

template <class T>
T field(const json& j, const char* name, const std::string& path, T fallback) {
    if (!j.contains(name))
        return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw ConfigInvalid(path + name + ": wrong type");
    }
}

inline MatchScheme parse_match_scheme(const std::string& s, const std::string& where) {
    if (s == "MMOS") return MatchScheme::MMOS;
    if (s == "FMS") return MatchScheme::FMS;
    throw ConfigInvalid(where + ": expected MMOS or FMS");
}

} // namespace detail

/// Host references in configs: "client:<office>:<index>", "server:<i>",
/// "internet:<i>".
inline HostId parse_host_ref(const std::string& ref, const Topology& topo) {
    unsigned a = 0, b = 0;
    char tail = 0;
    if (std::sscanf(ref.c_str(), "client:%u:%u%c", &a, &b, &tail) == 2 && a < topo.params().offices &&
        b < topo.params().hosts_per_office)
        return topo.clients()[a * topo.params().hosts_per_office + b].mac;
    if (std::sscanf(ref.c_str(), "server:%u%c", &a, &tail) == 1 && a < topo.servers().size())
        return topo.servers()[a].mac;
    if (std::sscanf(ref.c_str(), "internet:%u%c", &a, &tail) == 1 && a < topo.internet().size())
        return topo.internet()[a].mac;
    throw ConfigInvalid("host reference '" + ref + "' does not exist in the topology");
}

inline std::string host_ref(HostId mac, const Topology& topo) {
    const Host& h = topo.host(mac);
    switch (h.role) {
    case HostRole::Client: {
        const auto idx = (mac.value & 0xFF);
        return "client:" + std::to_string(h.office) + ":" + std::to_string(idx);
    }
    case HostRole::Server: return "server:" + std::to_string(mac.value & 0xFFFF);
    case HostRole::Internet: return "internet:" + std::to_string(mac.value & 0xFFFF);
    }
    return "?";
}

/// Desk-scale SYN flood used when a config asks for the default attack: one
/// enterprise and one Internet attacker against the first two servers.
inline AttackProfile default_attack(const Topology& topo) {
    AttackProfile a;
    a.attackers = {topo.clients()[0].mac};
    if (!topo.internet().empty())
        a.attackers.push_back(topo.internet()[0].mac);
    a.victims = {topo.servers()[0].mac};
    if (topo.servers().size() > 1)
        a.victims.push_back(topo.servers()[1].mac);
    a.syn_rate = 3.0;
    a.start = 36.0;
    a.duration = 72.0;
    return a;
}

inline ExperimentConfig parse_config(const json& j) {
    if (!j.is_object())
        throw ConfigInvalid("config: top level must be an object");
    using detail::field;
    ExperimentConfig c;
    c.sim.seed = field<std::uint64_t>(j, "seed", "", c.sim.seed);
    c.sim.duration = field<double>(j, "duration", "", c.sim.duration);
    c.sim.ctrl_latency = field<double>(j, "ctrl_latency", "", c.sim.ctrl_latency);
    c.sim.eviction_interval = field<double>(j, "eviction_interval", "", c.sim.eviction_interval);
    c.sim.disconnect_delay_min = field<double>(j, "disconnect_delay_min", "", c.sim.disconnect_delay_min);
    c.sim.disconnect_delay_max = field<double>(j, "disconnect_delay_max", "", c.sim.disconnect_delay_max);
    c.sim.ids_window_periods = field<std::size_t>(j, "ids_window_periods", "", c.sim.ids_window_periods);
    if (j.contains("ids_scope")) {
        const auto scope = field<std::string>(j, "ids_scope", "", "network");
        if (scope == "network") c.sim.ids_scope = IdsScope::Network;
        else if (scope == "per_switch") c.sim.ids_scope = IdsScope::PerSwitch;
        else throw ConfigInvalid("ids_scope: expected network or per_switch");
    }
    if (j.contains("response_scheme")) {
        if (j["response_scheme"].is_null())
            c.sim.response_scheme.reset();
        else
            c.sim.response_scheme = detail::parse_match_scheme(
                field<std::string>(j, "response_scheme", "", "MMOS"), "response_scheme");
    }
    c.output_dir = field<std::string>(j, "output", "", c.output_dir);
    if (j.contains("svm_model"))
        c.svm_model = field<std::string>(j, "svm_model", "", "");
    if (j.contains("ids_model"))
        c.ids_model = field<std::string>(j, "ids_model", "", "");

    if (j.contains("topology")) {
        const auto& t = j["topology"];
        auto& p = c.sim.topology;
        p.offices = field<std::uint32_t>(t, "offices", "topology.", p.offices);
        p.hosts_per_office = field<std::uint32_t>(t, "hosts_per_office", "topology.", p.hosts_per_office);
        p.servers = field<std::uint32_t>(t, "servers", "topology.", p.servers);
        p.internet_hosts = field<std::uint32_t>(t, "internet_hosts", "topology.", p.internet_hosts);
    }
    if (j.contains("analyzer")) {
        const auto& a = j["analyzer"];
        auto& p = c.sim.analyzer;
        p.observation_period = field<double>(a, "observation_period", "analyzer.", p.observation_period);
        p.idle_timeout = field<double>(a, "idle_timeout", "analyzer.", p.idle_timeout);
        p.f_cap = field<std::uint64_t>(a, "f_cap", "analyzer.", p.f_cap);
        c.scheme = SchemeSpec::parse(field<std::string>(a, "mode", "analyzer.", c.scheme.token()));
    }
    if (j.contains("traffic")) {
        const auto& t = j["traffic"];
        auto& p = c.traffic;
        p.rate = field<double>(t, "rate", "traffic.", p.rate);
        if (t.contains("mix")) {
            const auto& m = t["mix"];
            p.mix.client_to_server = field<double>(m, "client_to_server", "traffic.mix.", p.mix.client_to_server);
            p.mix.client_to_client = field<double>(m, "client_to_client", "traffic.mix.", p.mix.client_to_client);
            p.mix.internet_to_server =
                field<double>(m, "internet_to_server", "traffic.mix.", p.mix.internet_to_server);
        }
        p.min_packets = field<std::uint32_t>(t, "min_packets", "traffic.", p.min_packets);
        p.max_packets = field<std::uint32_t>(t, "max_packets", "traffic.", p.max_packets);
        p.packet_gap = field<double>(t, "packet_gap", "traffic.", p.packet_gap);
        p.responses = field<bool>(t, "responses", "traffic.", p.responses);
    }
    c.traffic.seed = c.sim.seed;

    const Topology topo(c.sim.topology);
    if (j.contains("attack") && !j["attack"].is_null()) {
        const auto& a = j["attack"];
        AttackProfile p = default_attack(topo);
        if (a.contains("attackers")) {
            p.attackers.clear();
            for (const auto& s : field<std::vector<std::string>>(a, "attackers", "attack.", {}))
                p.attackers.push_back(parse_host_ref(s, topo));
        }
        if (a.contains("victims")) {
            p.victims.clear();
            for (const auto& s : field<std::vector<std::string>>(a, "victims", "attack.", {}))
                p.victims.push_back(parse_host_ref(s, topo));
        }
        p.syn_rate = field<double>(a, "syn_rate", "attack.", p.syn_rate);
        p.start = field<double>(a, "start", "attack.", p.start);
        p.duration = field<double>(a, "duration", "attack.", p.duration);
        c.attack = p;
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        c.sweep_rates = field<std::vector<double>>(s, "rates", "sweep.", c.sweep_rates);
        if (s.contains("schemes")) {
            c.sweep_schemes.clear();
            for (const auto& name : field<std::vector<std::string>>(s, "schemes", "sweep.", {}))
                c.sweep_schemes.push_back(SchemeSpec::parse(name));
        }
        c.sweep_seeds = field<std::size_t>(s, "seeds", "sweep.", c.sweep_seeds);
    }
    c.finalise();
    return c;
}

inline json to_json(const ExperimentConfig& c) {
    const Topology topo(c.sim.topology);
    json j;
    j["seed"] = c.sim.seed;
    j["duration"] = c.sim.duration;
    j["ctrl_latency"] = c.sim.ctrl_latency;
    j["eviction_interval"] = c.sim.eviction_interval;
    j["disconnect_delay_min"] = c.sim.disconnect_delay_min;
    j["disconnect_delay_max"] = c.sim.disconnect_delay_max;
    j["ids_window_periods"] = c.sim.ids_window_periods;
    j["ids_scope"] = to_string(c.sim.ids_scope);
    j["response_scheme"] = c.sim.response_scheme ? json(to_string(*c.sim.response_scheme)) : json(nullptr);
    j["output"] = c.output_dir;
    if (c.svm_model) j["svm_model"] = *c.svm_model;
    if (c.ids_model) j["ids_model"] = *c.ids_model;
    const auto& tp = c.sim.topology;
    j["topology"] = {{"offices", tp.offices}, {"hosts_per_office", tp.hosts_per_office},
                     {"servers", tp.servers}, {"internet_hosts", tp.internet_hosts}};
    const auto& a = c.sim.analyzer;
    j["analyzer"] = {{"mode", c.scheme.token()}, {"observation_period", a.observation_period},
                     {"idle_timeout", a.idle_timeout}, {"f_cap", a.f_cap}};
    const auto& t = c.traffic;
    j["traffic"] = {{"rate", t.rate},
                    {"mix", {{"client_to_server", t.mix.client_to_server},
                             {"client_to_client", t.mix.client_to_client},
                             {"internet_to_server", t.mix.internet_to_server}}},
                    {"min_packets", t.min_packets}, {"max_packets", t.max_packets},
                    {"packet_gap", t.packet_gap}, {"responses", t.responses}};
    if (c.attack) {
        json att, vic;
        for (auto h : c.attack->attackers) att.push_back(host_ref(h, topo));
        for (auto h : c.attack->victims) vic.push_back(host_ref(h, topo));
        j["attack"] = {{"attackers", att}, {"victims", vic}, {"syn_rate", c.attack->syn_rate},
                       {"start", c.attack->start}, {"duration", c.attack->duration}};
    }
    json schemes;
    for (const auto& s : c.sweep_schemes) schemes.push_back(s.token());
    j["sweep"] = {{"rates", c.sweep_rates}, {"schemes", schemes}, {"seeds", c.sweep_seeds}};
    return j;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigInvalid("cannot read config " + path);
    try {
        return parse_config(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigInvalid(path + ": " + e.what());
    }
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Hash of the experiment definition; the output location is not part of it.
inline std::string config_hash(const ExperimentConfig& c) {
    json j = to_json(c);
    j.erase("output");
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

//------------------------------------------------------------------------------
// experiments

struct Models {
    std::shared_ptr<const SvmModel> svm;
    std::shared_ptr<const SomGrid> som;
};

struct MetricsReport {
    std::string scheme;
    double rate = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<std::size_t> entries_series;
    std::vector<std::vector<std::size_t>> switch_series;
    std::vector<std::uint64_t> packet_in_series;
    double packet_in_rate = 0.0;         // per second while the controller is operational
    double run_packet_in_rate = 0.0;     // per second over the whole run
    double steady_packet_in_rate = 0.0;  // per second over the second half of the run
    std::optional<double> suspended_at;
    std::vector<SwitchReport> switches;
    std::size_t disconnections = 0;
    std::size_t table_full_errors = 0;
    std::size_t flow_rule_exceptions = 0;
    std::optional<double> first_error;
    std::optional<double> detection_rate;
    std::vector<IdsWindow> ids_windows;
    std::vector<AnalyzerLogRecord> analyzer_log;
    std::uint64_t trace_digest = 0;
    SimResult raw;
};

inline Schedule build_schedule(const ExperimentConfig& cfg, const Topology& topo) {
    Schedule s = generate_schedule(cfg.traffic, topo);
    if (cfg.attack) {
        AttackProfile a = *cfg.attack;
        a.seed = cfg.sim.seed * 31 + 7;
        s = merge(std::move(s), generate_attack(a, topo));
    }
    return s;
}

/// Runs `cfg` over a given packet schedule instead of a generated one.
inline MetricsReport run_schedule(ExperimentConfig cfg, const Models& models, Schedule schedule,
                                  std::ostream* trace = nullptr) {
    cfg.finalise();
    std::optional<std::pair<SimTime, SimTime>> interval;
    if (cfg.attack && !cfg.attack->attackers.empty())
        interval = std::make_pair(cfg.attack->start, cfg.attack->start + cfg.attack->duration);
    Simulator sim(cfg.sim, std::move(schedule), models.svm, models.som, interval);
    sim.set_trace(trace);
    SimResult r = sim.run();

    MetricsReport m;
    m.scheme = cfg.scheme.name();
    m.rate = cfg.traffic.rate;
    m.seed = cfg.sim.seed;
    m.config_hash = config_hash(cfg);
    m.entries_series = r.entries_series;
    m.switch_series = r.switch_series;
    m.packet_in_series = r.packet_in_series;
    m.suspended_at = r.controller_suspended_at;
    m.run_packet_in_rate = static_cast<double>(r.total_packet_in) / cfg.sim.duration;
    m.packet_in_rate = m.run_packet_in_rate;
    if (r.controller_suspended_at) {
        // whole seconds before suspension
        const auto n = std::min(r.packet_in_series.size(),
                                static_cast<std::size_t>(std::floor(*r.controller_suspended_at)));
        std::uint64_t before = 0;
        for (std::size_t i = 0; i < n; ++i)
            before += r.packet_in_series[i];
        m.packet_in_rate = n ? static_cast<double>(before) / static_cast<double>(n) : 0.0;
    }
    const std::size_t half = r.packet_in_series.size() / 2;
    std::uint64_t tail = 0;
    for (std::size_t i = half; i < r.packet_in_series.size(); ++i)
        tail += r.packet_in_series[i];
    const std::size_t tail_len = r.packet_in_series.size() - half;
    m.steady_packet_in_rate = tail_len ? static_cast<double>(tail) / static_cast<double>(tail_len) : 0.0;
    m.switches = r.switches;
    for (const auto& s : r.switches) {
        m.disconnections += s.disconnected_at.has_value();
        m.table_full_errors += s.table_full_errors;
        m.flow_rule_exceptions += s.flow_rule_exceptions;
        if (s.first_error && (!m.first_error || *s.first_error < *m.first_error))
            m.first_error = s.first_error;
    }
    if (interval && models.som) {
        std::vector<std::optional<Verdict>> verdicts;
        for (const auto& w : r.ids_windows)
            if (w.attack_truth)
                verdicts.push_back(w.verdict);
        m.detection_rate = detection_rate(verdicts);
    }
    m.ids_windows = r.ids_windows;
    m.analyzer_log = r.analyzer_log;
    m.trace_digest = r.trace_digest;
    m.raw = std::move(r);
    return m;
}

inline MetricsReport run_experiment(ExperimentConfig cfg, const Models& models,
                                    std::ostream* trace = nullptr) {
    cfg.finalise();
    const Topology topo(cfg.sim.topology);
    Schedule s = build_schedule(cfg, topo);
    return run_schedule(std::move(cfg), models, std::move(s), trace);
}

//------------------------------------------------------------------------------
// training data

struct TrainingSets {
    std::vector<ObservationSample> svm;
    std::vector<LabeledFeatures> ids;
};

/// Switch observations from FMS runs at rates around the saturation point,
/// labelled -1 when errors follow, plus SOM windows from unsaturated FMS runs
/// with the attack active for part of the run.
inline TrainingSets generate_training(const ExperimentConfig& base, std::size_t seeds = 3) {
    TrainingSets out;
    const double r_sat = static_cast<double>(base.sim.analyzer.f_cap) / base.sim.analyzer.idle_timeout;
    const Topology topo(base.sim.topology);
    for (std::size_t s = 0; s < seeds; ++s) {
        for (double frac : {0.33, 0.5, 0.67, 0.83, 1.0, 1.17, 1.33, 1.67}) {
            ExperimentConfig c = base;
            c.scheme = {AnalyzerMode::FMS_only, 1.0};
            c.attack.reset();
            c.sim.seed = 1000 + s * 97 + static_cast<std::uint64_t>(frac * 100);
            c.traffic.seed = c.sim.seed;
            c.traffic.rate = frac * r_sat;
            c.sim.duration = std::min(base.sim.duration, 60.0);
            auto r = run_experiment(c, {});
            out.svm.insert(out.svm.end(), r.raw.svm_samples.begin(), r.raw.svm_samples.end());
        }
        // SOM windows at full detail: unsaturated FMS with the attack active
        for (double frac : {0.33, 0.67, 1.0}) {
            ExperimentConfig c = base;
            c.scheme = {AnalyzerMode::FMS_only, 1.0};
            c.sim.analyzer.f_cap = 1000000;
            if (!c.attack)
                c.attack = default_attack(topo);
            c.sim.seed = 5000 + s * 131 + static_cast<std::uint64_t>(frac * 100);
            c.traffic.seed = c.sim.seed;
            c.traffic.rate = frac * r_sat;
            auto r = run_experiment(c, {});
            out.ids.insert(out.ids.end(), r.raw.ids_samples.begin(), r.raw.ids_samples.end());
        }
    }
    return out;
}

inline SvmFit train_svm_default(std::span<const ObservationSample> samples, double f_cap) {
    SvmParams p;
    p.scale = {f_cap, f_cap};
    p.f_cap = f_cap;
    return train(samples, p);
}

inline SomFit train_som_default(std::span<const LabeledFeatures> samples, std::uint64_t seed = 1) {
    SomParams p;
    p.seed = seed;
    return som_train(samples, p);
}

/// Loads the configured models, training whichever is missing.
inline Models prepare_models(const ExperimentConfig& cfg) {
    Models m;
    std::optional<TrainingSets> data;
    auto need_data = [&]() -> TrainingSets& {
        if (!data)
            data = generate_training(cfg);
        return *data;
    };
    if (cfg.svm_model)
        m.svm = std::make_shared<SvmModel>(load_svm(*cfg.svm_model));
    else
        m.svm = std::make_shared<SvmModel>(
            train_svm_default(need_data().svm, static_cast<double>(cfg.sim.analyzer.f_cap)).model);
    if (cfg.ids_model)
        m.som = std::make_shared<SomGrid>(load_som(*cfg.ids_model));
    else
        m.som = std::make_shared<SomGrid>(train_som_default(need_data().ids, cfg.sim.seed).grid);
    return m;
}

//------------------------------------------------------------------------------
// CSV output

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : ""; }

/// Flow-entry time series: `second,total_entries,sw0..swN`, one row per second.
inline void emit_csv(const MetricsReport& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << "second,total_entries";
    for (std::size_t s = 0; s < r.switch_series.size(); ++s)
        out << ",sw" << s;
    out << '\n';
    for (std::size_t i = 0; i < r.entries_series.size(); ++i) {
        out << (i + 1) << ',' << r.entries_series[i];
        for (const auto& series : r.switch_series)
            out << ',' << series[i];
        out << '\n';
    }
    if (!out)
        throw Error("write failed: " + path.string());
}

inline void emit_switch_csv(const MetricsReport& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << "switch,max_entries,packet_in,offered,forwarded,dropped,table_full_errors,"
           "flow_rule_exceptions,first_error,first_table_full,disconnected_at\n";
    for (const auto& s : r.switches)
        out << s.id << ',' << s.max_entries << ',' << s.packet_in << ',' << s.offered << ','
            << s.forwarded << ',' << s.dropped << ',' << s.table_full_errors << ','
            << s.flow_rule_exceptions << ',' << fmt_opt(s.first_error) << ','
            << fmt_opt(s.first_table_full) << ',' << fmt_opt(s.disconnected_at) << '\n';
}

inline void emit_analyzer_csv(const MetricsReport& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << "time,switch,f,delta_f,verdict,demoted,promoted\n";
    for (const auto& a : r.analyzer_log)
        out << fmt_double(a.time) << ',' << a.switch_id << ',' << a.f << ',' << a.delta_f << ','
            << a.verdict << ',' << a.demoted << ',' << a.promoted << '\n';
}

inline void emit_ids_csv(const MetricsReport& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << "start,end,attack_window,verdict\n";
    for (const auto& w : r.ids_windows)
        out << fmt_double(w.start) << ',' << fmt_double(w.end) << ',' << (w.attack_truth ? 1 : 0)
            << ',' << (w.verdict ? to_string(*w.verdict) : "unavailable") << '\n';
}

inline void emit_summary_json(const MetricsReport& r, const std::filesystem::path& path) {
    json j;
    j["scheme"] = r.scheme;
    j["rate"] = r.rate;
    j["seed"] = r.seed;
    j["config_hash"] = r.config_hash;
    j["packet_in_rate"] = r.packet_in_rate;
    j["run_packet_in_rate"] = r.run_packet_in_rate;
    j["controller_suspended_at"] = r.suspended_at ? json(*r.suspended_at) : json(nullptr);
    j["steady_packet_in_rate"] = r.steady_packet_in_rate;
    j["disconnections"] = r.disconnections;
    j["table_full_errors"] = r.table_full_errors;
    j["first_error"] = r.first_error ? json(*r.first_error) : json(nullptr);
    j["detection_rate"] = r.detection_rate ? json(*r.detection_rate) : json(nullptr);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline void write_report(const MetricsReport& r, const std::filesystem::path& dir,
                         const std::string& prefix) {
    std::filesystem::create_directories(dir);
    emit_csv(r, dir / (prefix + "entries.csv"));
    emit_switch_csv(r, dir / (prefix + "switches.csv"));
    emit_analyzer_csv(r, dir / (prefix + "analyzer.csv"));
    emit_ids_csv(r, dir / (prefix + "ids.csv"));
    emit_summary_json(r, dir / (prefix + "summary.json"));
}

//------------------------------------------------------------------------------
// sweep

struct SweepCell {
    SchemeSpec scheme;
    double rate = 0.0;
    std::vector<MetricsReport> background;  // one per seed
    std::vector<MetricsReport> attack;
    std::optional<std::string> error;

    double mean_packet_in_rate() const {
        double s = 0;
        for (const auto& r : background) s += r.packet_in_rate;
        return background.empty() ? 0.0 : s / static_cast<double>(background.size());
    }

    std::optional<double> mean_detection_rate() const {
        if (attack.empty()) return std::nullopt;
        double s = 0;
        for (const auto& r : attack) s += r.detection_rate.value_or(0.0);
        return s / static_cast<double>(attack.size());
    }

    std::size_t disconnections() const {
        std::size_t n = 0;
        for (const auto& r : background) n += r.disconnections;
        return n;
    }
};

struct SweepResult {
    std::vector<SweepCell> cells;  // rates outer, schemes inner

    const SweepCell* find(AnalyzerMode mode, double threshold, double rate) const {
        for (const auto& c : cells)
            if (c.scheme.mode == mode && c.rate == rate &&
                (mode != AnalyzerMode::Threshold || c.scheme.threshold == threshold))
                return &c;
        return nullptr;
    }
};

/// Runs every (scheme, rate) cell. All schemes at one load share the traffic
/// seeds, so they see identical background and attack traces.
inline SweepResult sweep(const ExperimentConfig& base, const Models& models, unsigned jobs = 0) {
    SweepResult out;
    for (double rate : base.sweep_rates)
        for (const auto& scheme : base.sweep_schemes)
            out.cells.push_back({scheme, rate, {}, {}, {}});

    auto run_cell = [&](SweepCell& cell, std::size_t rate_index) {
        try {
            for (std::size_t s = 0; s < base.sweep_seeds; ++s) {
                ExperimentConfig c = base;
                c.scheme = cell.scheme;
                c.traffic.rate = cell.rate;
                c.sim.seed = base.sim.seed + 1000 * rate_index + s;
                c.traffic.seed = c.sim.seed;
                ExperimentConfig bg = c;
                bg.attack.reset();
                cell.background.push_back(run_experiment(bg, models));
                if (base.attack)
                    cell.attack.push_back(run_experiment(c, models));
            }
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    };

    if (jobs == 0)
        jobs = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t per_rate = base.sweep_schemes.size();
    std::vector<std::future<void>> running;
    for (std::size_t i = 0; i < out.cells.size(); ++i) {
        if (running.size() >= jobs) {
            running.front().get();
            running.erase(running.begin());
        }
        running.push_back(std::async(std::launch::async, run_cell, std::ref(out.cells[i]), i / per_rate));
    }
    for (auto& f : running)
        f.get();
    return out;
}

/// table1.csv (packet_in rate) and table2.csv (detection rate): one row per
/// load, one column per scheme; plus per-cell flow-entry series.
inline void write_sweep(const ExperimentConfig& base, const SweepResult& res,
                        const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto table = [&](const std::string& name, auto value) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out)
            throw Error("cannot write " + (dir / name).string());
        out << "R";
        for (const auto& s : base.sweep_schemes)
            out << ',' << s.name();
        out << '\n';
        for (double rate : base.sweep_rates) {
            out << rate;
            for (const auto& s : base.sweep_schemes) {
                const SweepCell* c = res.find(s.mode, s.threshold, rate);
                out << ',' << (c && !c->error ? value(*c) : std::string("error"));
            }
            out << '\n';
        }
    };
    table("table1.csv", [](const SweepCell& c) { return fmt_double(c.mean_packet_in_rate()); });
    table("table2.csv", [](const SweepCell& c) {
        auto d = c.mean_detection_rate();
        return d ? fmt_double(*d) : std::string("");
    });

    std::ofstream errors(dir / "errors.csv", std::ios::binary);
    errors << "scheme,R,disconnections,table_full_errors,first_error,cell_error\n";
    for (const auto& c : res.cells) {
        std::size_t tf = 0;
        std::optional<double> first;
        for (const auto& r : c.background) {
            tf += r.table_full_errors;
            if (r.first_error && (!first || *r.first_error < *first))
                first = r.first_error;
        }
        errors << c.scheme.name() << ',' << c.rate << ',' << c.disconnections() << ',' << tf << ','
               << fmt_opt(first) << ',' << (c.error ? *c.error : "") << '\n';
        if (!c.background.empty()) {
            char prefix[96];
            std::snprintf(prefix, sizeof prefix, "fig5_%s_R%g_", c.scheme.token().c_str(), c.rate);
            emit_csv(c.background.front(), dir / (std::string(prefix) + "entries.csv"));
        }
    }
}

//------------------------------------------------------------------------------
// sample CSVs consumed by the training subcommands

inline void write_svm_samples(std::span<const ObservationSample> s, std::ostream& out) {
    out << "f,delta_f,sign\n";
    for (const auto& x : s)
        out << x.f << ',' << x.delta_f << ',' << x.sign.value_or(0) << '\n';
}

inline std::vector<ObservationSample> read_svm_samples(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "f,delta_f,sign")
        throw FormatError("svm samples: expected header f,delta_f,sign");
    std::vector<ObservationSample> out;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        double f, df;
        int sign;
        if (std::sscanf(line.c_str(), "%lf,%lf,%d", &f, &df, &sign) != 3 || (sign != 1 && sign != -1))
            throw FormatError("svm samples: malformed line " + std::to_string(n));
        out.push_back({f, df, sign});
    }
    return out;
}

inline void write_ids_samples(std::span<const LabeledFeatures> s, std::ostream& out) {
    out << "avg_packets,avg_bytes,avg_duration,pair_ratio,label\n";
    char buf[160];
    for (const auto& x : s) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%s\n", x.x.avg_packets_per_flow,
                      x.x.avg_bytes_per_flow, x.x.avg_duration_per_flow, x.x.pair_flow_ratio,
                      to_string(x.label));
        out << buf;
    }
}

inline std::vector<LabeledFeatures> read_ids_samples(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "avg_packets,avg_bytes,avg_duration,pair_ratio,label")
        throw FormatError("ids samples: unexpected header");
    std::vector<LabeledFeatures> out;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        double a, b, c, d;
        char label[16] = {0};
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%15s", &a, &b, &c, &d, label) != 5)
            throw FormatError("ids samples: malformed line " + std::to_string(n));
        const std::string l(label);
        if (l != "attack" && l != "normal")
            throw FormatError("ids samples: bad label on line " + std::to_string(n));
        out.push_back({{a, b, c, d}, l == "attack" ? Verdict::Attack : Verdict::Normal});
    }
    return out;
}

} // namespace datasim

#endif // DATASIM_HARNESS_HPP
