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

#ifndef DATASIM_IDS_HPP
#define DATASIM_IDS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "datasim/rng.hpp"
#include "datasim/types.hpp"

namespace datasim {

/// Per-window statistics of one flow entry.
struct FlowRecord {
    MatchKey key;
    double packets = 0.0;
    double bytes = 0.0;
    double duration = 0.0;
    bool attack = false;  // ground truth, never read by the detector
};

struct FlowFeatureVector {
    double avg_packets_per_flow = 0.0;
    double avg_bytes_per_flow = 0.0;
    double avg_duration_per_flow = 0.0;
    double pair_flow_ratio = 0.0;

    std::array<double, 4> as_array() const {
        return {avg_packets_per_flow, avg_bytes_per_flow, avg_duration_per_flow, pair_flow_ratio};
    }
    static FlowFeatureVector from_array(const std::array<double, 4>& a) {
        return {a[0], a[1], a[2], a[3]};
    }
    bool operator==(const FlowFeatureVector&) const = default;
};

/// Averages over the window's flows. A flow is paired when the reversed
/// 5-tuple is also present; aggregated (MMOS) records never pair.
inline FlowFeatureVector extract_features(std::span<const FlowRecord> records) {
    if (records.empty())
        throw EmptyWindow();
    std::set<MatchKey> fms_keys;
    for (const auto& r : records)
        if (r.key.scheme == MatchScheme::FMS)
            fms_keys.insert(r.key);
    FlowFeatureVector v;
    std::size_t paired = 0;
    for (const auto& r : records) {
        v.avg_packets_per_flow += r.packets;
        v.avg_bytes_per_flow += r.bytes;
        v.avg_duration_per_flow += r.duration;
        if (r.key.scheme == MatchScheme::FMS && fms_keys.count(r.key.reverse()))
            ++paired;
    }
    const double n = static_cast<double>(records.size());
    v.avg_packets_per_flow /= n;
    v.avg_bytes_per_flow /= n;
    v.avg_duration_per_flow /= n;
    v.pair_flow_ratio = static_cast<double>(paired) / n;
    return v;
}

enum class Verdict : std::uint8_t { Normal, Attack };

inline const char* to_string(Verdict v) { return v == Verdict::Attack ? "attack" : "normal"; }

struct LabeledFeatures {
    FlowFeatureVector x;
    Verdict label = Verdict::Normal;
};

struct SomParams {
    std::size_t grid_size = 8;
    std::size_t epochs = 500;
    double learning_rate = 0.5;
    double final_learning_rate = 0.01;
    std::uint64_t seed = 1;
};

/// Self-organising map used as a labelled nearest-prototype classifier.
/// Inputs are min-max normalised with the training bounds and clamped.
class SomGrid {
public:
    static constexpr std::size_t kDims = 4;
    using Vec = std::array<double, kDims>;

    SomGrid() = default;
    SomGrid(std::size_t m, std::vector<Vec> weights, std::vector<Verdict> labels, Vec lo, Vec hi)
        : m_(m), weights_(std::move(weights)), labels_(std::move(labels)), lo_(lo), hi_(hi) {}

    std::size_t grid_size() const { return m_; }
    const std::vector<Vec>& weights() const { return weights_; }
    const std::vector<Verdict>& labels() const { return labels_; }
    const Vec& lower() const { return lo_; }
    const Vec& upper() const { return hi_; }

    Vec normalise(const FlowFeatureVector& x) const {
        const auto a = x.as_array();
        Vec v{};
        for (std::size_t d = 0; d < kDims; ++d) {
            const double span = hi_[d] - lo_[d];
            v[d] = span > 0 ? std::clamp((a[d] - lo_[d]) / span, 0.0, 1.0) : 0.0;
        }
        return v;
    }

    std::size_t best_matching_unit(const Vec& v) const {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < weights_.size(); ++n) {
            const double d = sq_dist(weights_[n], v);
            if (d < best_d) {
                best_d = d;
                best = n;
            }
        }
        return best;
    }

    Verdict detect(const FlowFeatureVector& x) const {
        return labels_[best_matching_unit(normalise(x))];
    }

    static double sq_dist(const Vec& a, const Vec& b) {
        double s = 0.0;
        for (std::size_t d = 0; d < kDims; ++d)
            s += (a[d] - b[d]) * (a[d] - b[d]);
        return s;
    }

    bool operator==(const SomGrid&) const = default;

private:
    std::size_t m_ = 0;
    std::vector<Vec> weights_;
    std::vector<Verdict> labels_;
    Vec lo_{}, hi_{};
};

inline Verdict detect(const SomGrid& g, const FlowFeatureVector& x) { return g.detect(x); }

struct SomFit {
    SomGrid grid;
    double training_accuracy = 0.0;
    bool separable = false;  // false when accuracy <= 50%
};

inline SomFit som_train(std::span<const LabeledFeatures> samples, const SomParams& params) {
    using Vec = SomGrid::Vec;
    constexpr std::size_t D = SomGrid::kDims;
    bool has_normal = false, has_attack = false;
    for (const auto& s : samples)
        (s.label == Verdict::Attack ? has_attack : has_normal) = true;
    if (!has_normal || !has_attack)
        throw DegenerateData("SOM training needs both normal and attack samples");
    if (params.grid_size == 0 || params.epochs == 0)
        throw ConfigInvalid("som: grid_size and epochs must be > 0");

    Vec lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (const auto& s : samples) {
        const auto a = s.x.as_array();
        for (std::size_t d = 0; d < D; ++d) {
            lo[d] = std::min(lo[d], a[d]);
            hi[d] = std::max(hi[d], a[d]);
        }
    }

    const std::size_t m = params.grid_size;
    const std::size_t nodes = m * m;
    Rng rng(params.seed);
    std::vector<Vec> w(nodes);
    for (auto& v : w)
        for (auto& c : v)
            c = rng.uniform01();

    SomGrid scratch(m, w, std::vector<Verdict>(nodes, Verdict::Normal), lo, hi);
    std::vector<Vec> x(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        x[i] = scratch.normalise(samples[i].x);

    const double r0 = std::max(1.0, static_cast<double>(m) / 2.0);
    const double r_end = 0.5;
    const double total = static_cast<double>(params.epochs * x.size());
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    double step = 0.0;
    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        for (std::size_t idx : order) {
            const double frac = step / total;
            const double lr = params.learning_rate *
                              std::pow(params.final_learning_rate / params.learning_rate, frac);
            const double radius = r0 * std::pow(r_end / r0, frac);
            const double two_r2 = 2.0 * radius * radius;
            step += 1.0;

            std::size_t bmu = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t n = 0; n < nodes; ++n) {
                const double d = SomGrid::sq_dist(w[n], x[idx]);
                if (d < best) {
                    best = d;
                    bmu = n;
                }
            }
            const double br = static_cast<double>(bmu / m), bc = static_cast<double>(bmu % m);
            for (std::size_t n = 0; n < nodes; ++n) {
                const double dr = static_cast<double>(n / m) - br;
                const double dc = static_cast<double>(n % m) - bc;
                const double g2 = dr * dr + dc * dc;
                if (g2 > 9.0 * radius * radius)
                    continue;
                const double h = lr * std::exp(-g2 / two_r2);
                for (std::size_t d = 0; d < D; ++d)
                    w[n][d] += h * (x[idx][d] - w[n][d]);
            }
        }
    }

    // Label nodes by majority of mapped samples (ties -> attack), then give
    // empty nodes the label of the nearest labelled node.
    SomGrid mapped(m, w, std::vector<Verdict>(nodes, Verdict::Normal), lo, hi);
    std::vector<std::array<std::size_t, 2>> votes(nodes, {0, 0});
    for (std::size_t i = 0; i < x.size(); ++i)
        ++votes[mapped.best_matching_unit(x[i])][samples[i].label == Verdict::Attack ? 1 : 0];
    std::vector<Verdict> labels(nodes, Verdict::Normal);
    std::vector<bool> labelled(nodes, false);
    for (std::size_t n = 0; n < nodes; ++n) {
        if (votes[n][0] + votes[n][1] == 0)
            continue;
        labelled[n] = true;
        labels[n] = votes[n][1] >= votes[n][0] ? Verdict::Attack : Verdict::Normal;
    }
    for (std::size_t n = 0; n < nodes; ++n) {
        if (labelled[n])
            continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < nodes; ++k) {
            if (!labelled[k])
                continue;
            const double d = SomGrid::sq_dist(w[n], w[k]);
            if (d < best) {
                best = d;
                labels[n] = labels[k];
            }
        }
    }

    SomFit fit;
    fit.grid = SomGrid(m, std::move(w), std::move(labels), lo, hi);
    std::size_t correct = 0;
    for (const auto& s : samples)
        correct += fit.grid.detect(s.x) == s.label;
    fit.training_accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    fit.separable = fit.training_accuracy > 0.5;
    return fit;
}

/// Percentage of attack windows flagged as attack. Windows without a verdict
/// (statistics unavailable) count as missed.
inline double detection_rate(std::span<const std::optional<Verdict>> attack_windows) {
    if (attack_windows.empty())
        return 0.0;
    std::size_t hit = 0;
    for (const auto& v : attack_windows)
        hit += v && *v == Verdict::Attack;
    return 100.0 * static_cast<double>(hit) / static_cast<double>(attack_windows.size());
}

//------------------------------------------------------------------------------
// grid file

inline nlohmann::json to_json(const SomGrid& g) {
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& v : g.weights())
        for (double c : v)
            weights.push_back(c);
    nlohmann::json labels = nlohmann::json::array();
    for (auto l : g.labels())
        labels.push_back(to_string(l));
    return {{"format", "datasim-som/1"},
            {"dims", SomGrid::kDims},
            {"grid_size", g.grid_size()},
            {"lower", g.lower()},
            {"upper", g.upper()},
            {"weights", weights},
            {"labels", labels}};
}

inline SomGrid som_from_json(const nlohmann::json& j) {
    try {
        if (j.at("dims").get<std::size_t>() != SomGrid::kDims)
            throw FormatError("som grid: dims must be 4");
        const auto m = j.at("grid_size").get<std::size_t>();
        const auto flat = j.at("weights").get<std::vector<double>>();
        const auto names = j.at("labels").get<std::vector<std::string>>();
        if (m == 0 || flat.size() != m * m * SomGrid::kDims || names.size() != m * m)
            throw FormatError("som grid: size mismatch");
        std::vector<SomGrid::Vec> w(m * m);
        for (std::size_t n = 0; n < w.size(); ++n)
            for (std::size_t d = 0; d < SomGrid::kDims; ++d)
                w[n][d] = flat[n * SomGrid::kDims + d];
        std::vector<Verdict> labels;
        for (const auto& s : names) {
            if (s != "attack" && s != "normal")
                throw FormatError("som grid: bad label '" + s + "'");
            labels.push_back(s == "attack" ? Verdict::Attack : Verdict::Normal);
        }
        return SomGrid(m, std::move(w), std::move(labels), j.at("lower").get<SomGrid::Vec>(),
                       j.at("upper").get<SomGrid::Vec>());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("som grid: ") + e.what());
    }
}

inline void save_som(const SomGrid& g, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path);
    out << to_json(g).dump(2) << '\n';
}

inline SomGrid load_som(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot read " + path);
    try {
        return som_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

} // namespace datasim

#endif // DATASIM_IDS_HPP
