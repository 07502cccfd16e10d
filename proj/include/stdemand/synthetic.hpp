#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stdemand/pipeline.hpp"
#include "stdemand/tensor.hpp"

namespace stdemand {

/// Desk-scale city simulator. Mean demand per (hour, cell) follows a weekday
/// double-peak / weekend single-late-peak profile, decays away from a set of
/// hotspots, and is dampened on cloudy/rainy half-days; trip records and the
/// weather table it emits are mutually consistent.
struct SyntheticConfig {
    GridSpec grid;
    std::int64_t start_day = days_from_civil(2016, 8, 1);
    int days = 14;
    double base_intensity = 1.2;  // scale of mean trips per cell-hour

    struct Hotspot {
        double lon, lat;      // center
        double strength;      // peak multiplier
        double sigma_cells;   // gaussian radius in cell widths
    };
    std::vector<Hotspot> hotspots;

    double cloudy_prob = 0.3, rain_prob = 0.2;
    double cloudy_factor = 0.85, rain_factor = 0.55;
    double weekend_factor = 0.85;
    bool modifiers_active = true;  // weather/weekend effects on demand

    /// Two hotspots on the box diagonal unless the caller supplies their own.
    void default_hotspots() {
        hotspots = {{grid.lon_min + 0.35 * (grid.lon_max - grid.lon_min),
                     grid.lat_min + 0.40 * (grid.lat_max - grid.lat_min), 2.5, 1.8},
                    {grid.lon_min + 0.70 * (grid.lon_max - grid.lon_min),
                     grid.lat_min + 0.65 * (grid.lat_max - grid.lat_min), 1.8, 2.2}};
    }
};

struct SyntheticData {
    std::vector<TripRecord> trips;
    WeatherTable weather;
};

namespace detail {

inline double gauss_bump(double x, double mu, double sigma) {
    double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z);
}

inline double time_profile(int hour, bool weekend) {
    if (weekend)
        return 0.18 + 1.0 * gauss_bump(hour, 14.0, 3.2);
    return 0.15 + 1.0 * gauss_bump(hour, 8.0, 1.3) + 0.95 * gauss_bump(hour, 18.0, 1.6) +
           0.25 * gauss_bump(hour, 13.0, 3.0);
}

}  // namespace detail

inline SyntheticData generate_synthetic(SyntheticConfig cfg, std::uint64_t seed) {
    cfg.grid.validate();
    if (cfg.hotspots.empty()) cfg.default_hotspots();
    Rng rng(seed);
    SyntheticData out;

    const GridSpec& g = cfg.grid;
    double cw = g.cell_width(), chh = g.cell_height();

    // per-cell spatial intensity
    std::vector<double> spatial(static_cast<size_t>(g.cols_i * g.rows_j));
    for (int i = 0; i < g.cols_i; ++i)
        for (int j = 0; j < g.rows_j; ++j) {
            double lon = g.lon_min + (i + 0.5) * cw;
            double lat = g.lat_min + (j + 0.5) * chh;
            double s = 0.12;
            for (const auto& hs : cfg.hotspots) {
                double dx = (lon - hs.lon) / cw;
                double dy = (lat - hs.lat) / chh;
                s += hs.strength * std::exp(-0.5 * (dx * dx + dy * dy) /
                                            (hs.sigma_cells * hs.sigma_cells));
            }
            spatial[static_cast<size_t>(i * g.rows_j + j)] = s;
        }

    // weather first so demand can respond to it
    for (int d = 0; d < cfg.days; ++d)
        for (int half = 0; half < 2; ++half) {
            double u = rng.uniform();
            int cond = u < cfg.rain_prob ? 2 : (u < cfg.rain_prob + cfg.cloudy_prob ? 1 : 0);
            out.weather[{cfg.start_day + d, half}] = cond;
        }

    std::int64_t order = 0;
    for (int d = 0; d < cfg.days; ++d) {
        std::int64_t day = cfg.start_day + d;
        bool weekend = weekday_of_day(day) >= 5;
        for (int h = 0; h < 24; ++h) {
            std::int64_t hidx = day * 24 + h;
            double wf = 1.0;
            if (cfg.modifiers_active) {
                int cond = out.weather[{day, half_of_hour(hidx)}];
                wf = cond == 2 ? cfg.rain_factor : (cond == 1 ? cfg.cloudy_factor : 1.0);
                if (weekend) wf *= cfg.weekend_factor;
            }
            double prof = detail::time_profile(h, weekend);
            for (int i = 0; i < g.cols_i; ++i)
                for (int j = 0; j < g.rows_j; ++j) {
                    double lambda = cfg.base_intensity * prof * wf *
                                    spatial[static_cast<size_t>(i * g.rows_j + j)];
                    int count = rng.poisson(lambda);
                    for (int n = 0; n < count; ++n) {
                        TripRecord t;
                        t.order_id = "o" + std::to_string(order);
                        t.user_id = "u" + std::to_string(order % 499);
                        ++order;

                        int minute = static_cast<int>(rng.uniform_int(60));
                        int second = static_cast<int>(rng.uniform_int(60));
                        std::int64_t start_total =
                            hidx * 3600 + minute * 60 + second;
                        int dur = 300 + static_cast<int>(rng.uniform_int(1200));  // 5-25 min
                        std::int64_t end_total = start_total + dur;

                        auto to_dt = [](std::int64_t sec) {
                            DateTime dt;
                            civil_from_days(sec / 86400, dt.year, dt.month, dt.day);
                            std::int64_t rem = sec % 86400;
                            dt.hour = static_cast<int>(rem / 3600);
                            dt.minute = static_cast<int>((rem % 3600) / 60);
                            dt.second = static_cast<int>(rem % 60);
                            return dt;
                        };
                        t.start_time = to_dt(start_total);
                        t.end_time = to_dt(end_total);

                        t.start_lon = g.lon_min + (i + rng.uniform()) * cw;
                        t.start_lat = g.lat_min + (j + rng.uniform()) * chh;
                        int di = static_cast<int>(rng.uniform_int(5)) - 2;
                        int dj = static_cast<int>(rng.uniform_int(5)) - 2;
                        int ei = std::min(std::max(i + di, 0), g.cols_i - 1);
                        int ej = std::min(std::max(j + dj, 0), g.rows_j - 1);
                        t.end_lon = g.lon_min + (ei + rng.uniform()) * cw;
                        t.end_lat = g.lat_min + (ej + rng.uniform()) * chh;
                        out.trips.push_back(std::move(t));
                    }
                }
        }
    }
    return out;
}

}  // namespace stdemand
