#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdemand/pipeline.hpp"
#include "stdemand/tensor.hpp"

namespace stdemand {

/// Historical average: per (day-type, hour-of-day) mean cube over the
/// training split, falling back to the hour-of-day mean over both day types,
/// then to zero. Day-type conditioning can be disabled to match the plain
/// hour-of-day average.
class HAModel {
public:
    HAModel() = default;

    static HAModel fit(const std::vector<DemandCube>& train_cubes, bool by_day_type = true) {
        if (train_cubes.empty()) throw std::runtime_error("ha_fit: empty training split");
        HAModel m;
        m.by_day_type_ = by_day_type;
        m.shape_ = train_cubes.front().values.shape();
        std::map<std::pair<int, int>, std::pair<Tensor, int>> acc;     // (daytype,hour) -> (sum, n)
        std::map<int, std::pair<Tensor, int>> acc_hour;                // hour -> (sum, n)
        for (const DemandCube& c : train_cubes) {
            int hod = static_cast<int>(((c.hour % 24) + 24) % 24);
            int dt = by_day_type && is_weekend(c.hour) ? 1 : 0;
            auto add = [&](Tensor& sum, int& n) {
                for (std::int64_t i = 0; i < sum.size(); ++i) sum[i] += c.values[i];
                ++n;
            };
            auto& slot = acc.try_emplace({dt, hod}, Tensor(m.shape_), 0).first->second;
            add(slot.first, slot.second);
            auto& hslot = acc_hour.try_emplace(hod, Tensor(m.shape_), 0).first->second;
            add(hslot.first, hslot.second);
        }
        auto mean_of = [](const std::pair<Tensor, int>& s) {
            Tensor t = s.first;
            for (std::int64_t i = 0; i < t.size(); ++i) t[i] /= s.second;
            return t;
        };
        for (const auto& [key, s] : acc) m.bucket_means_[key] = mean_of(s);
        for (const auto& [key, s] : acc_hour) m.hour_means_[key] = mean_of(s);
        return m;
    }

    Tensor predict(std::int64_t hour) const {
        int hod = static_cast<int>(((hour % 24) + 24) % 24);
        int dt = by_day_type_ && is_weekend(hour) ? 1 : 0;
        auto it = bucket_means_.find({dt, hod});
        if (it != bucket_means_.end()) return it->second;
        auto hit = hour_means_.find(hod);
        if (hit != hour_means_.end()) return hit->second;
        return Tensor(shape_);
    }

private:
    bool by_day_type_ = true;
    Shape shape_;
    std::map<std::pair<int, int>, Tensor> bucket_means_;
    std::map<int, Tensor> hour_means_;
};

constexpr int kMovingAverageWindow = 6;

/// Element-wise mean of the previous 6 hourly cubes.
inline Tensor ma_predict(const std::vector<Tensor>& history) {
    if (static_cast<int>(history.size()) != kMovingAverageWindow)
        throw std::runtime_error("ma_predict requires exactly " +
                                 std::to_string(kMovingAverageWindow) + " prior cubes, got " +
                                 std::to_string(history.size()));
    Tensor out = history.front();
    for (size_t k = 1; k < history.size(); ++k) {
        if (history[k].shape() != out.shape())
            throw std::runtime_error("ma_predict: mismatched cube shapes");
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] += history[k][i];
    }
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] /= kMovingAverageWindow;
    return out;
}

struct EnsembleModel {
    double w1 = 0.5, w2 = 0.5;
    bool degenerate = false;  // collinear components, fell back to 0.5/0.5
    double fit_rmse = 0.0;    // on the validation split it was fitted on
};

/// Unconstrained least squares over all flattened validation elements:
/// (W1, W2) = argmin ||D - W1 P1 - W2 P2||^2 via the 2x2 normal equations.
inline EnsembleModel ensemble_fit(const std::vector<Tensor>& p1, const std::vector<Tensor>& p2,
                                  const std::vector<Tensor>& truth) {
    if (p1.size() != p2.size() || p1.size() != truth.size() || p1.empty())
        throw std::runtime_error("ensemble_fit: mismatched or empty collections");
    double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
    std::int64_t n = 0;
    for (size_t s = 0; s < p1.size(); ++s) {
        if (p1[s].shape() != truth[s].shape() || p2[s].shape() != truth[s].shape())
            throw std::runtime_error("ensemble_fit: shape mismatch in sample " +
                                     std::to_string(s));
        for (std::int64_t i = 0; i < truth[s].size(); ++i) {
            double x1 = p1[s][i], x2 = p2[s][i], y = truth[s][i];
            a11 += x1 * x1;
            a12 += x1 * x2;
            a22 += x2 * x2;
            b1 += x1 * y;
            b2 += x2 * y;
            ++n;
        }
    }
    EnsembleModel m;
    double det = a11 * a22 - a12 * a12;
    double scale = std::max({std::abs(a11), std::abs(a22), 1.0});
    if (std::abs(det) < 1e-12 * scale * scale) {
        m.degenerate = true;  // collinear predictors
        m.w1 = m.w2 = 0.5;
    } else {
        m.w1 = (a22 * b1 - a12 * b2) / det;
        m.w2 = (a11 * b2 - a12 * b1) / det;
    }
    double sq = 0.0;
    for (size_t s = 0; s < p1.size(); ++s)
        for (std::int64_t i = 0; i < truth[s].size(); ++i) {
            double e = truth[s][i] - m.w1 * p1[s][i] - m.w2 * p2[s][i];
            sq += e * e;
        }
    m.fit_rmse = std::sqrt(sq / static_cast<double>(n));
    return m;
}

inline Tensor ensemble_predict(const EnsembleModel& m, const Tensor& p1, const Tensor& p2) {
    if (p1.shape() != p2.shape())
        throw std::runtime_error("ensemble_predict: shape mismatch " + p1.shape().str() +
                                 " vs " + p2.shape().str());
    Tensor out = p1;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = m.w1 * p1[i] + m.w2 * p2[i];
    return out;
}

inline void save_ensemble(const EnsembleModel& m, const std::string& path) {
    nlohmann::ordered_json j{{"w1", m.w1}, {"w2", m.w2}, {"fit_rmse", m.fit_rmse},
                             {"degenerate", m.degenerate}};
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << j.dump(2) << "\n";
}

inline EnsembleModel load_ensemble(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    nlohmann::json j = nlohmann::json::parse(is);
    EnsembleModel m;
    m.w1 = j.at("w1");
    m.w2 = j.at("w2");
    m.fit_rmse = j.value("fit_rmse", 0.0);
    m.degenerate = j.value("degenerate", false);
    return m;
}

}  // namespace stdemand
