#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdemand/pipeline.hpp"
#include "stdemand/tensor.hpp"

namespace stdemand {

/// Per-channel error summary. MAPE averages |y - yhat| / y over elements
/// with y > 0 only; when no such element exists it is reported missing.
struct MetricReport {
    std::array<double, kChannels> rmse{};
    std::array<double, kChannels> mae{};
    std::array<std::optional<double>, kChannels> mape{};
    std::array<std::int64_t, kChannels> n{};
    std::array<std::int64_t, kChannels> n_mape{};

    double rmse_overall() const {
        double sq = 0.0;
        std::int64_t total = 0;
        for (int c = 0; c < kChannels; ++c) {
            sq += rmse[static_cast<size_t>(c)] * rmse[static_cast<size_t>(c)] *
                  static_cast<double>(n[static_cast<size_t>(c)]);
            total += n[static_cast<size_t>(c)];
        }
        return std::sqrt(sq / static_cast<double>(total));
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        const char* names[kChannels] = {"rent", "return"};
        for (int c = 0; c < kChannels; ++c) {
            auto idx = static_cast<size_t>(c);
            nlohmann::ordered_json cj{{"rmse", rmse[idx]}, {"mae", mae[idx]}};
            if (mape[idx]) cj["mape"] = *mape[idx];
            else cj["mape"] = nullptr;
            cj["n"] = n[idx];
            cj["n_mape"] = n_mape[idx];
            j[names[c]] = cj;
        }
        j["rmse_overall"] = rmse_overall();
        return j;
    }
};

/// Channel-resolved metrics over equally shaped truth/prediction pairs whose
/// last axis is the channel.
inline MetricReport metrics(const std::vector<Tensor>& truth,
                            const std::vector<Tensor>& prediction) {
    if (truth.empty() || truth.size() != prediction.size())
        throw std::runtime_error("metrics: empty or mismatched collections");
    std::array<double, kChannels> sq{}, ab{}, pe{};
    MetricReport r;
    for (size_t s = 0; s < truth.size(); ++s) {
        if (truth[s].shape() != prediction[s].shape())
            throw std::runtime_error("metrics: shape mismatch at sample " + std::to_string(s));
        const Shape& sh = truth[s].shape();
        int ch_extent = sh[sh.rank() - 1];
        if (ch_extent != kChannels)
            throw std::runtime_error("metrics: last axis must be the channel axis");
        for (std::int64_t i = 0; i < truth[s].size(); ++i) {
            auto c = static_cast<size_t>(i % kChannels);
            double y = truth[s][i], yh = prediction[s][i];
            sq[c] += (y - yh) * (y - yh);
            ab[c] += std::abs(y - yh);
            ++r.n[c];
            if (y > 0.0) {
                pe[c] += std::abs(y - yh) / y;
                ++r.n_mape[c];
            }
        }
    }
    for (size_t c = 0; c < kChannels; ++c) {
        r.rmse[c] = std::sqrt(sq[c] / static_cast<double>(r.n[c]));
        r.mae[c] = ab[c] / static_cast<double>(r.n[c]);
        if (r.n_mape[c] > 0) r.mape[c] = pe[c] / static_cast<double>(r.n_mape[c]);
    }
    return r;
}

/// Product-moment coefficient; missing when either series has zero variance.
inline std::optional<double> pearson(const std::vector<double>& x,
                                     const std::vector<double>& y) {
    if (x.size() != y.size())
        throw std::runtime_error("pearson: length mismatch " + std::to_string(x.size()) + " vs " +
                                 std::to_string(y.size()));
    size_t n = x.size();
    if (n < 2) throw std::runtime_error("pearson: need length >= 2");
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

/// Hourly series of one cell/channel: segment sums per cube, in cube order.
inline std::vector<double> cell_hour_series(const std::vector<DemandCube>& cubes, int i, int j,
                                            int channel) {
    std::vector<double> out;
    out.reserve(cubes.size());
    for (const DemandCube& c : cubes) {
        const Shape& s = c.values.shape();
        double total = 0.0;
        for (int n = 0; n < s[0]; ++n) total += c.values.at({n, i, j, channel});
        out.push_back(total);
    }
    return out;
}

enum class DiagonalMode {
    SingleDiagonal,  // offset cell (i+k, j+k) only
    FourDiagonals,   // average over (i+-k, j+-k), skipping out-of-bounds
};

struct CorrelationGrid {
    std::vector<int> offsets;  // k values (rows)
    std::vector<int> lags;     // h values (columns)
    std::vector<std::vector<std::optional<double>>> values;  // [k index][h index]

    std::optional<double> at(int k, int h) const {
        for (size_t ki = 0; ki < offsets.size(); ++ki)
            if (offsets[ki] == k)
                for (size_t hi = 0; hi < lags.size(); ++hi)
                    if (lags[hi] == h) return values[ki][hi];
        throw std::runtime_error("correlation grid has no entry (" + std::to_string(k) + "," +
                                 std::to_string(h) + ")");
    }
};

/// Correlation of the center cell's hourly demand at t with diagonal-offset
/// cells at t - h. Entries whose offset cells all fall outside the grid are
/// missing.
inline CorrelationGrid lagged_correlation(const std::vector<DemandCube>& cubes,
                                          int center_i, int center_j, int channel,
                                          const std::vector<int>& offsets,
                                          const std::vector<int>& lags,
                                          DiagonalMode mode = DiagonalMode::FourDiagonals) {
    if (cubes.empty()) throw std::runtime_error("lagged_correlation: no cubes");
    const Shape& s = cubes.front().values.shape();
    int gi = s[1], gj = s[2];
    int max_lag = 0;
    for (int h : lags) max_lag = std::max(max_lag, h);
    if (static_cast<int>(cubes.size()) < max_lag + 2)
        throw std::runtime_error("lagged_correlation: series of " +
                                 std::to_string(cubes.size()) + " hours too short for lag " +
                                 std::to_string(max_lag));

    std::vector<double> center = cell_hour_series(cubes, center_i, center_j, channel);
    CorrelationGrid grid;
    grid.offsets = offsets;
    grid.lags = lags;
    for (int k : offsets) {
        std::vector<std::optional<double>> row;
        for (int h : lags) {
            std::vector<std::array<int, 2>> cells;
            if (mode == DiagonalMode::SingleDiagonal) {
                cells = {{center_i + k, center_j + k}};
            } else {
                cells = {{center_i + k, center_j + k},
                         {center_i + k, center_j - k},
                         {center_i - k, center_j + k},
                         {center_i - k, center_j - k}};
                if (k == 0) cells = {{center_i, center_j}};
            }
            double acc = 0.0;
            int used = 0;
            for (auto [ci, cj] : cells) {
                if (ci < 0 || ci >= gi || cj < 0 || cj >= gj) continue;
                std::vector<double> neigh = cell_hour_series(cubes, ci, cj, channel);
                // center at t against neighbor at t - h
                std::vector<double> xc(center.begin() + h, center.end());
                std::vector<double> xn(neigh.begin(), neigh.end() - h);
                auto p = pearson(xc, xn);
                if (p) {
                    acc += *p;
                    ++used;
                }
            }
            if (used > 0) row.emplace_back(acc / used);
            else row.emplace_back(std::nullopt);
        }
        grid.values.push_back(std::move(row));
    }
    return grid;
}

inline void write_correlation_csv(const CorrelationGrid& grid, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "k,h,value\n";
    os.precision(12);
    for (size_t ki = 0; ki < grid.offsets.size(); ++ki)
        for (size_t hi = 0; hi < grid.lags.size(); ++hi) {
            os << grid.offsets[ki] << ',' << grid.lags[hi] << ',';
            if (grid.values[ki][hi]) os << *grid.values[ki][hi];
            os << '\n';
        }
}

/// I x J grid of hourly totals for one channel, for external plotting.
inline void export_heatmap(const Tensor& cube_values, int channel, const std::string& path) {
    const Shape& s = cube_values.shape();
    if (s.rank() != 4) throw std::runtime_error("export_heatmap expects an (N,I,J,C) cube");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.precision(12);
    for (int i = 0; i < s[1]; ++i) {
        for (int j = 0; j < s[2]; ++j) {
            double total = 0.0;
            for (int n = 0; n < s[0]; ++n) total += cube_values.at({n, i, j, channel});
            os << (j ? "," : "") << total;
        }
        os << '\n';
    }
}

}  // namespace stdemand
