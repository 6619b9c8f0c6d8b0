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

#ifndef DATASIM_DATA_APP_HPP
#define DATASIM_DATA_APP_HPP

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "datasim/controller.hpp"
#include "datasim/svm.hpp"

namespace datasim {

/// Verdict function over (f, delta_f): +1 the switch copes, -1 it degrades.
using Classifier = std::function<int(const ObservationSample&)>;

inline Classifier svm_classifier(std::shared_ptr<const SvmModel> model) {
    return [model = std::move(model)](const ObservationSample& x) { return model->classify(x); };
}

/// The threshold baseline: +1 iff the entry count stays below `f_thres`.
inline Classifier threshold_classifier(double f_thres) {
    return [f_thres](const ObservationSample& x) { return x.f < f_thres ? +1 : -1; };
}

struct HostRate {
    HostId host;
    double r_pkt = 0.0;  // packets per second over the last window
    bool operator==(const HostRate&) const = default;
};

struct DestFlowStats {
    SwitchId switch_id = 0;
    std::vector<DestCount> pairs;   // (h_c, f_c), sum equals f_i
    std::vector<HostRate> mmos;     // (h_s, R_pkt_s) for hosts under an MMOS override
    std::uint64_t f_i = 0;
};

//------------------------------------------------------------------------------
// host selection

/// Which destinations to aggregate so the switch copes again.
///
/// Walks the hosts by descending entry count (ascending id on ties). After
/// appending host p it asks the classifier about the table that would remain,
/// x = (1 + sum of the counts after p, f_i - that), and stops on +1. If the
/// classifier never agrees every host is returned.
inline std::vector<HostId> select_mmos_hosts(std::span<const DestCount> pairs, std::uint64_t f_i,
                                             const Classifier& classifier) {
    std::vector<DestCount> sorted(pairs.begin(), pairs.end());
    std::sort(sorted.begin(), sorted.end(), [](const DestCount& a, const DestCount& b) {
        return a.count != b.count ? a.count > b.count : a.host < b.host;
    });
    std::vector<std::uint64_t> suffix(sorted.size() + 1, 0);
    for (std::size_t i = sorted.size(); i-- > 0;)
        suffix[i] = suffix[i + 1] + sorted[i].count;

    std::vector<HostId> selected;
    for (std::size_t p = 0; p < sorted.size(); ++p) {
        selected.push_back(sorted[p].host);
        const double f_remaining = 1.0 + static_cast<double>(suffix[p + 1]);
        const double delta_f = static_cast<double>(f_i) - f_remaining;
        if (classifier({f_remaining, delta_f, std::nullopt}) == +1)
            break;
    }
    return selected;
}

inline std::vector<HostId> select_mmos_hosts(const DestFlowStats& stats, const Classifier& c) {
    return select_mmos_hosts(stats.pairs, stats.f_i, c);
}

/// MMOS destinations that can return to FMS: those whose worst-case entry
/// growth idle_timeout * R_pkt still keeps the table strictly below f_cap.
/// Ascending by rate, ties by host id.
inline std::vector<HostId> select_fms_candidates(std::span<const HostRate> mmos, std::uint64_t f_i,
                                                 std::uint64_t f_cap, double idle_timeout) {
    std::vector<HostRate> feasible;
    for (const auto& h : mmos) {
        const double f_extra = idle_timeout * h.r_pkt;
        if (f_extra + static_cast<double>(f_i) < static_cast<double>(f_cap))
            feasible.push_back(h);
    }
    std::sort(feasible.begin(), feasible.end(), [](const HostRate& a, const HostRate& b) {
        return a.r_pkt != b.r_pkt ? a.r_pkt < b.r_pkt : a.host < b.host;
    });
    std::vector<HostId> out;
    out.reserve(feasible.size());
    for (const auto& h : feasible)
        out.push_back(h.host);
    return out;
}

//------------------------------------------------------------------------------
// analyzer

enum class AnalyzerMode : std::uint8_t { MMOS_only, FMS_only, Threshold, DATA };

inline const char* to_string(AnalyzerMode m) {
    switch (m) {
    case AnalyzerMode::MMOS_only: return "MMOS";
    case AnalyzerMode::FMS_only: return "FMS";
    case AnalyzerMode::Threshold: return "Threshold";
    case AnalyzerMode::DATA: return "DATA";
    }
    return "?";
}

struct AnalyzerConfig {
    double observation_period = 3.0;
    double idle_timeout = 10.0;
    std::uint64_t f_cap = 300;
    AnalyzerMode mode = AnalyzerMode::DATA;
    double f_thres = 0.0;  // Threshold mode only

    void validate() const {
        if (!(observation_period > 0))
            throw ConfigInvalid("analyzer.observation_period: must be > 0");
        if (!(idle_timeout > 0))
            throw ConfigInvalid("analyzer.idle_timeout: must be > 0");
        if (f_cap == 0)
            throw ConfigInvalid("analyzer.f_cap: must be > 0");
        if (mode == AnalyzerMode::Threshold &&
            !(f_thres > 0 && f_thres <= static_cast<double>(f_cap)))
            throw ConfigInvalid("analyzer.f_thres: must lie in (0, f_cap]");
    }

    MatchScheme default_scheme() const {
        return mode == AnalyzerMode::MMOS_only ? MatchScheme::MMOS : MatchScheme::FMS;
    }
};

struct StoredSample {
    std::uint64_t period = 0;
    ObservationSample sample;
};

class SharedDatabase {
public:
    static constexpr std::size_t kRingSize = 256;

    void store(SwitchId sw, std::uint64_t period, const ObservationSample& s) {
        auto& ring = samples_[sw];
        ring.push_back({period, s});
        if (ring.size() > kRingSize)
            ring.pop_front();
        last_f_[sw] = static_cast<std::uint64_t>(s.f);
    }

    void record_gap(SwitchId sw, std::uint64_t period) { gaps_[sw].push_back(period); }

    const std::deque<StoredSample>& samples(SwitchId sw) const {
        static const std::deque<StoredSample> empty;
        auto it = samples_.find(sw);
        return it == samples_.end() ? empty : it->second;
    }

    const std::vector<std::uint64_t>& gaps(SwitchId sw) const {
        static const std::vector<std::uint64_t> empty;
        auto it = gaps_.find(sw);
        return it == gaps_.end() ? empty : it->second;
    }

    std::uint64_t prev_f(SwitchId sw) const {
        auto it = last_f_.find(sw);
        return it == last_f_.end() ? 0 : it->second;
    }

    /// Packet counter of the host's MMOS entry at the previous collection.
    std::map<std::pair<SwitchId, HostId>, std::pair<EntryId, std::uint64_t>>& mmos_counters() {
        return mmos_counters_;
    }

    void set_policy_view(const AggregationPolicy& p) { policy_view_ = p; }
    const AggregationPolicy& policy_view() const { return policy_view_; }

    void set_model(std::shared_ptr<const SvmModel> m) { model_ = std::move(m); }
    std::shared_ptr<const SvmModel> model() const { return model_; }

private:
    std::map<SwitchId, std::deque<StoredSample>> samples_;
    std::map<SwitchId, std::vector<std::uint64_t>> gaps_;
    std::map<SwitchId, std::uint64_t> last_f_;
    std::map<std::pair<SwitchId, HostId>, std::pair<EntryId, std::uint64_t>> mmos_counters_;
    AggregationPolicy policy_view_;
    std::shared_ptr<const SvmModel> model_;
};

struct CollectedStats {
    ObservationSample sample;
    DestFlowStats dest;
};

/// Per-switch statistics for one observation period. Delta f is taken
/// against `prev_f` (0 before the first period). R_pkt is reported for every
/// host the policy keeps under an MMOS override at this switch.
inline CollectedStats collect_stats(const SwitchState& sw, std::uint64_t prev_f,
                                    const AggregationPolicy& policy, SharedDatabase& db,
                                    double observation_period) {
    if (sw.health() == Health::Disconnected)
        throw SwitchUnreachable(sw.id());
    CollectedStats out;
    const auto f_now = sw.table().size();
    out.sample.f = static_cast<double>(f_now);
    out.sample.delta_f = static_cast<double>(f_now) - static_cast<double>(prev_f);
    out.dest.switch_id = sw.id();
    out.dest.pairs = sw.table().dest_flow_counts();
    out.dest.f_i = f_now;

    auto& counters = db.mmos_counters();
    for (const auto& [key, scheme] : policy.overrides()) {
        if (key.first != sw.id() || scheme != MatchScheme::MMOS)
            continue;
        const HostId host = key.second;
        double rate = 0.0;
        if (const FlowEntry* e = sw.table().find(MatchKey::mmos(host))) {
            std::uint64_t prev = 0;
            if (auto it = counters.find(key); it != counters.end() && it->second.first == e->entry_id)
                prev = it->second.second;
            rate = static_cast<double>(e->packet_count - prev) / observation_period;
            counters[key] = {e->entry_id, e->packet_count};
        } else {
            counters.erase(key);
        }
        out.dest.mmos.push_back({host, rate});
    }
    return out;
}

struct PolicyAction {
    SwitchId switch_id = 0;
    HostId host;
    MatchScheme scheme = MatchScheme::FMS;
    std::vector<FlowMod> mods;
};

struct AnalyzerLogRecord {
    SimTime time = 0.0;
    SwitchId switch_id = 0;
    double f = 0.0;
    double delta_f = 0.0;
    int verdict = 0;         // 0: switch unreachable
    std::size_t demoted = 0;
    std::size_t promoted = 0;
};

struct AnalyzerStepResult {
    std::vector<PolicyAction> actions;
    std::vector<AnalyzerLogRecord> log;
};

/// One pass of the analyzer over all switches. `classifier` is consulted in
/// DATA mode and ignored otherwise. Returned actions must be applied to the
/// switches by the caller in order.
inline AnalyzerStepResult analyzer_step(const AnalyzerConfig& config, SharedDatabase& db,
                                        std::span<const SwitchState* const> switches,
                                        Controller& controller, const Classifier& classifier,
                                        SimTime now, std::uint64_t period) {
    AnalyzerStepResult result;
    const bool adaptive =
        config.mode == AnalyzerMode::DATA || config.mode == AnalyzerMode::Threshold;
    const Classifier decide =
        config.mode == AnalyzerMode::Threshold ? threshold_classifier(config.f_thres) : classifier;

    for (const SwitchState* sw : switches) {
        AnalyzerLogRecord rec;
        rec.time = now;
        rec.switch_id = sw->id();
        if (sw->health() == Health::Disconnected) {
            db.record_gap(sw->id(), period);
            result.log.push_back(rec);
            continue;
        }
        const auto stats = collect_stats(*sw, db.prev_f(sw->id()), controller.policy(), db,
                                         config.observation_period);
        db.store(sw->id(), period, stats.sample);
        rec.f = stats.sample.f;
        rec.delta_f = stats.sample.delta_f;

        if (adaptive) {
            rec.verdict = decide(stats.sample);
            if (rec.verdict < 0) {
                for (HostId h : select_mmos_hosts(stats.dest, decide)) {
                    auto mods = controller.set_scheme(sw->table(), sw->id(), h, MatchScheme::MMOS);
                    if (mods.empty())
                        continue;
                    result.actions.push_back({sw->id(), h, MatchScheme::MMOS, std::move(mods)});
                    ++rec.demoted;
                }
            } else if (!stats.dest.mmos.empty()) {
                const auto candidates = select_fms_candidates(stats.dest.mmos, stats.dest.f_i,
                                                              config.f_cap, config.idle_timeout);
                if (!candidates.empty()) {
                    auto mods = controller.set_scheme(sw->table(), sw->id(), candidates.front(),
                                                      MatchScheme::FMS);
                    result.actions.push_back(
                        {sw->id(), candidates.front(), MatchScheme::FMS, std::move(mods)});
                    ++rec.promoted;
                }
            }
        }
        result.log.push_back(rec);
    }
    db.set_policy_view(controller.policy());
    return result;
}

} // namespace datasim

#endif // DATASIM_DATA_APP_HPP
