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

#ifndef DATASIM_SVM_HPP
#define DATASIM_SVM_HPP

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "datasim/types.hpp"

namespace datasim {

/// Feature tuple (f, delta_f) of one switch in one observation period.
struct ObservationSample {
    double f = 0.0;
    double delta_f = 0.0;
    std::optional<int> sign;  // +1 good state, -1 degradation

    bool operator==(const ObservationSample&) const = default;
};

/// Separating hyperplane w.x + b = 0 in normalised feature space, where
/// x = (f / scale[0], delta_f / scale[1]).
struct SvmModel {
    std::array<double, 2> w{0.0, 0.0};
    double b = 0.0;
    std::array<double, 2> scale{1.0, 1.0};
    double f_cap = 0.0;

    std::array<double, 2> normalise(const ObservationSample& x) const {
        return {x.f / scale[0], x.delta_f / scale[1]};
    }

    double decision(const ObservationSample& x) const {
        const auto v = normalise(x);
        return w[0] * v[0] + w[1] * v[1] + b;
    }

    /// F(x) = sign(w.x + b); the boundary itself maps to -1.
    int classify(const ObservationSample& x) const { return decision(x) > 0.0 ? +1 : -1; }

    double margin() const { return 2.0 / std::hypot(w[0], w[1]); }
};

inline int classify(const SvmModel& m, const ObservationSample& x) { return m.classify(x); }
inline double margin(const SvmModel& m) { return m.margin(); }

struct SvmParams {
    double c = 100.0;
    double tol = 1e-3;
    long max_iter = 100000;
    std::array<double, 2> scale{1.0, 1.0};
    double f_cap = 0.0;
};

struct SvmFit {
    SvmModel model;
    bool converged = false;
    long iterations = 0;
    std::size_t support_vectors = 0;
};

/// Soft-margin linear SVM trained by SMO with maximal-violating-pair working
/// set selection on the dual
///   min 1/2 a'Qa - e'a,  0 <= a_i <= C,  y'a = 0,  Q_ij = y_i y_j <x_i, x_j>.
inline SvmFit train(std::span<const ObservationSample> samples, const SvmParams& params) {
    const std::size_t n = samples.size();
    bool has_pos = false, has_neg = false;
    for (const auto& s : samples) {
        if (!s.sign)
            throw DegenerateData("unlabelled training sample");
        (*s.sign > 0 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg)
        throw DegenerateData("training samples carry a single label");

    SvmFit fit;
    fit.model.scale = params.scale;
    fit.model.f_cap = params.f_cap;

    std::vector<std::array<double, 2>> x(n);
    std::vector<double> y(n), alpha(n, 0.0), grad(n, -1.0);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = fit.model.normalise(samples[i]);
        y[i] = *samples[i].sign > 0 ? 1.0 : -1.0;
    }
    auto dot = [&](std::size_t i, std::size_t j) {
        return x[i][0] * x[j][0] + x[i][1] * x[j][1];
    };
    const double c = params.c;
    const double tau = 1e-12;

    auto in_up = [&](std::size_t t) {
        return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0);
    };
    auto in_low = [&](std::size_t t) {
        return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < c);
    };

    long iter = 0;
    for (; iter < params.max_iter; ++iter) {
        double g_max = -std::numeric_limits<double>::infinity();
        double g_min = std::numeric_limits<double>::infinity();
        std::size_t i = n, j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y[t] * grad[t];
            if (in_up(t) && v > g_max) {
                g_max = v;
                i = t;
            }
            if (in_low(t) && v < g_min) {
                g_min = v;
                j = t;
            }
        }
        if (i == n || j == n || g_max - g_min < params.tol) {
            fit.converged = true;
            break;
        }

        const double old_ai = alpha[i], old_aj = alpha[j];
        double quad = dot(i, i) + dot(j, j) - 2.0 * dot(i, j);
        if (quad <= 0)
            quad = tau;
        if (y[i] != y[j]) {
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
            } else {
                if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
            }
            if (diff > 0) {
                if (alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
            } else {
                if (alpha[j] > c) { alpha[j] = c; alpha[i] = c + diff; }
            }
        } else {
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
            } else {
                if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
            }
            if (sum > c) {
                if (alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
            } else {
                if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
            }
        }

        const double di = alpha[i] - old_ai, dj = alpha[j] - old_aj;
        for (std::size_t t = 0; t < n; ++t)
            grad[t] += y[t] * (y[i] * dot(t, i) * di + y[j] * dot(t, j) * dj);
    }
    fit.iterations = iter;

    // Bias from the free support vectors, else the midpoint of the feasible
    // interval.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (alpha[t] >= c) {
            if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0) {
            if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] > 0) {
            ++fit.support_vectors;
            fit.model.w[0] += alpha[t] * y[t] * x[t][0];
            fit.model.w[1] += alpha[t] * y[t] * x[t][1];
        }
    }
    fit.model.b = -rho;
    return fit;
}

//------------------------------------------------------------------------------
// model file: {"w1", "w2", "b", "scale1", "scale2", "f_cap"}

inline nlohmann::json to_json(const SvmModel& m) {
    return {{"format", "datasim-svm/1"},
            {"w1", m.w[0]}, {"w2", m.w[1]}, {"b", m.b},
            {"scale1", m.scale[0]}, {"scale2", m.scale[1]},
            {"f_cap", m.f_cap}};
}

inline SvmModel svm_from_json(const nlohmann::json& j) {
    try {
        SvmModel m;
        m.w = {j.at("w1").get<double>(), j.at("w2").get<double>()};
        m.b = j.at("b").get<double>();
        m.scale = {j.at("scale1").get<double>(), j.at("scale2").get<double>()};
        m.f_cap = j.at("f_cap").get<double>();
        if (m.scale[0] <= 0 || m.scale[1] <= 0 || (m.w[0] == 0 && m.w[1] == 0))
            throw FormatError("svm model: degenerate parameters");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("svm model: ") + e.what());
    }
}

inline void save_svm(const SvmModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path);
    out << to_json(m).dump(2) << '\n';
}

inline SvmModel load_svm(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot read " + path);
    try {
        return svm_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

} // namespace datasim

#endif // DATASIM_SVM_HPP
