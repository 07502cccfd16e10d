#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdemand/tensor.hpp"

namespace stdemand {

// ---------------------------------------------------------------------------
// Civil time. Hours are counted from 1970-01-01T00:00 local; no timezone
// arithmetic anywhere.
// ---------------------------------------------------------------------------

struct DateTime {
    int year = 1970, month = 1, day = 1;
    int hour = 0, minute = 0, second = 0;
};

inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = static_cast<unsigned>(y - era * 400);
    unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    unsigned doe = static_cast<unsigned>(z - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

inline std::int64_t hour_index(const DateTime& dt) {
    return days_from_civil(dt.year, dt.month, dt.day) * 24 + dt.hour;
}

/// 0 = Monday .. 6 = Sunday.
inline int weekday_of_day(std::int64_t days) {
    return static_cast<int>(((days % 7) + 10) % 7);  // 1970-01-01 was a Thursday
}

inline bool is_weekend(std::int64_t hour_idx) {
    return weekday_of_day(hour_idx / 24) >= 5;
}

inline std::optional<DateTime> parse_datetime(const std::string& s) {
    DateTime dt;
    char sep;
    if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &dt.year, &dt.month, &dt.day, &sep,
                    &dt.hour, &dt.minute, &dt.second) != 7)
        return std::nullopt;
    if (sep != 'T' && sep != ' ') return std::nullopt;
    if (dt.month < 1 || dt.month > 12 || dt.day < 1 || dt.day > 31 || dt.hour > 23 ||
        dt.minute > 59 || dt.second > 60)
        return std::nullopt;
    return dt;
}

inline std::string format_hour(std::int64_t hour_idx) {
    int y, m, d;
    civil_from_days(hour_idx >= 0 ? hour_idx / 24 : (hour_idx - 23) / 24, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:00:00", y, m, d,
                  static_cast<int>(((hour_idx % 24) + 24) % 24));
    return buf;
}

inline std::string format_date(std::int64_t days) {
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
    return buf;
}

inline std::optional<std::int64_t> parse_date(const std::string& s) {
    int y, m, d;
    if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d) != 3) return std::nullopt;
    return days_from_civil(y, m, d);
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct TripRecord {
    std::string order_id;
    std::string user_id;
    DateTime start_time, end_time;
    double start_lon = 0, start_lat = 0, end_lon = 0, end_lat = 0;
};

struct GridSpec {
    double lon_min = 121.14, lon_max = 121.37;
    double lat_min = 31.20, lat_max = 31.24;
    int cols_i = 16, rows_j = 16;       // I along longitude, J along latitude
    int segment_minutes = 10;
    int segments_per_hour = 6;

    void validate() const {
        if (!(lon_max > lon_min) || !(lat_max > lat_min))
            throw std::runtime_error("grid bounding box is degenerate");
        if (cols_i < 1 || rows_j < 1) throw std::runtime_error("grid extents must be >= 1");
        if (segments_per_hour * segment_minutes != 60)
            throw std::runtime_error("segments_per_hour * segment_minutes must be 60");
    }

    double cell_width() const { return (lon_max - lon_min) / cols_i; }
    double cell_height() const { return (lat_max - lat_min) / rows_j; }
};

constexpr int kChannels = 2;  // 0 = rent (trip starts), 1 = return (trip ends)

/// One hour's (N, I, J, C) count tensor.
struct DemandCube {
    std::int64_t hour = 0;
    Tensor values;

    DemandCube() = default;
    DemandCube(std::int64_t h, const GridSpec& g)
        : hour(h), values(Shape{g.segments_per_hour, g.cols_i, g.rows_j, kChannels}) {}
};

struct ExternalFactors {
    std::array<double, 3> weather{};  // sunny, cloudy, rainy
    std::array<double, 2> holiday{};  // workday, weekend
    std::array<double, 4> period{};   // morning rush, day, evening rush, night

    /// Concatenated [w, h, p] feature vector.
    Tensor encode() const {
        Tensor t(Shape{9});
        for (int i = 0; i < 3; ++i) t[i] = weather[static_cast<size_t>(i)];
        for (int i = 0; i < 2; ++i) t[3 + i] = holiday[static_cast<size_t>(i)];
        for (int i = 0; i < 4; ++i) t[5 + i] = period[static_cast<size_t>(i)];
        return t;
    }
};

enum class WeatherKind { Sunny = 0, Cloudy = 1, Rainy = 2 };

inline const char* weather_name(int w) {
    switch (w) {
        case 0: return "sunny";
        case 1: return "cloudy";
        default: return "rainy";
    }
}

/// (date, half) -> condition, half 0 = day (06-18), 1 = night.
using WeatherTable = std::map<std::pair<std::int64_t, int>, int>;

inline int half_of_hour(std::int64_t hour_idx) {
    int h = static_cast<int>(((hour_idx % 24) + 24) % 24);
    return (h >= 6 && h < 18) ? 0 : 1;
}

struct PeriodBoundaries {
    int morning_start = 7, day_start = 10, evening_start = 15, night_start = 21;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

struct CellIndex {
    int i = 0, j = 0;
};

/// Uniform partition of the bounding box; coordinates on or past the upper
/// edge clamp into the last cell. Returns nullopt when the point lies more
/// than one cell width/height outside the box.
inline std::optional<CellIndex> map_to_cell(double lon, double lat, const GridSpec& g) {
    if (!std::isfinite(lon) || !std::isfinite(lat)) return std::nullopt;
    if (lon < g.lon_min - g.cell_width() || lon > g.lon_max + g.cell_width()) return std::nullopt;
    if (lat < g.lat_min - g.cell_height() || lat > g.lat_max + g.cell_height()) return std::nullopt;
    auto clamp = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    // the 1e-9 nudge keeps points on an exact gridline in the upper cell
    // despite rounding in the coordinate subtraction
    int i = clamp(static_cast<int>(std::floor((lon - g.lon_min) / (g.lon_max - g.lon_min) *
                                                  g.cols_i +
                                              1e-9)),
                  g.cols_i - 1);
    int j = clamp(static_cast<int>(std::floor((lat - g.lat_min) / (g.lat_max - g.lat_min) *
                                                  g.rows_j +
                                              1e-9)),
                  g.rows_j - 1);
    return CellIndex{i, j};
}

struct IngestReport {
    std::int64_t trips = 0;
    std::int64_t starts_counted = 0, ends_counted = 0;
    std::int64_t starts_dropped_coord = 0, ends_dropped_coord = 0;
    std::int64_t starts_out_of_range = 0, ends_out_of_range = 0;
};

/// Pure aggregation of trip events into hourly cubes over [hour_begin,
/// hour_end). Each event lands at its own timestamp; a trip spanning an hour
/// boundary contributes to two different cubes.
inline std::vector<DemandCube> build_demand(const std::vector<TripRecord>& trips,
                                            const GridSpec& grid, std::int64_t hour_begin,
                                            std::int64_t hour_end, IngestReport* report = nullptr) {
    grid.validate();
    if (hour_end <= hour_begin) throw std::runtime_error("empty time range");
    std::vector<DemandCube> cubes;
    cubes.reserve(static_cast<size_t>(hour_end - hour_begin));
    for (std::int64_t h = hour_begin; h < hour_end; ++h) cubes.emplace_back(h, grid);

    IngestReport rep;
    rep.trips = static_cast<std::int64_t>(trips.size());
    auto place = [&](const DateTime& when, double lon, double lat, int channel,
                     std::int64_t& counted, std::int64_t& dropped, std::int64_t& out_of_range) {
        auto cell = map_to_cell(lon, lat, grid);
        if (!cell) {
            ++dropped;
            return;
        }
        std::int64_t h = hour_index(when);
        if (h < hour_begin || h >= hour_end) {
            ++out_of_range;
            return;
        }
        int seg = when.minute / grid.segment_minutes;
        cubes[static_cast<size_t>(h - hour_begin)].values.at(
            {seg, cell->i, cell->j, channel}) += 1.0;
        ++counted;
    };
    for (const TripRecord& t : trips) {
        place(t.start_time, t.start_lon, t.start_lat, 0, rep.starts_counted,
              rep.starts_dropped_coord, rep.starts_out_of_range);
        place(t.end_time, t.end_lon, t.end_lat, 1, rep.ends_counted, rep.ends_dropped_coord,
              rep.ends_out_of_range);
    }
    if (report) *report = rep;
    return cubes;
}

inline ExternalFactors encode_externals(std::int64_t hour_idx, const WeatherTable& weather,
                                        PeriodBoundaries pb = {}) {
    auto it = weather.find({hour_idx / 24, half_of_hour(hour_idx)});
    if (it == weather.end())
        throw std::runtime_error("no weather entry for " + format_date(hour_idx / 24) +
                                 (half_of_hour(hour_idx) == 0 ? " day" : " night"));
    ExternalFactors f;
    f.weather[static_cast<size_t>(it->second)] = 1.0;
    f.holiday[is_weekend(hour_idx) ? 1 : 0] = 1.0;
    int h = static_cast<int>(((hour_idx % 24) + 24) % 24);
    int code;
    if (h >= pb.morning_start && h < pb.day_start) code = 0;
    else if (h >= pb.day_start && h < pb.evening_start) code = 1;
    else if (h >= pb.evening_start && h < pb.night_start) code = 2;
    else code = 3;
    f.period[static_cast<size_t>(code)] = 1.0;
    return f;
}

struct DataSplit {
    std::vector<DemandCube> train, val, test;
};

/// Chronological partition at day boundaries: train < val_start_day <= val <
/// test_start_day <= test. Every split must hold at least min_hours hours so
/// at least one look-back window fits.
inline DataSplit split_by_date(const std::vector<DemandCube>& cubes, std::int64_t val_start_day,
                               std::int64_t test_start_day, int min_hours) {
    DataSplit out;
    for (const DemandCube& c : cubes) {
        std::int64_t day = c.hour / 24;
        if (day < val_start_day) out.train.push_back(c);
        else if (day < test_start_day) out.val.push_back(c);
        else out.test.push_back(c);
    }
    auto check = [&](const std::vector<DemandCube>& v, const char* name) {
        if (static_cast<int>(v.size()) < min_hours)
            throw std::runtime_error(std::string(name) + " split has " +
                                     std::to_string(v.size()) + " hours, need >= " +
                                     std::to_string(min_hours));
    };
    check(out.train, "train");
    check(out.val, "val");
    check(out.test, "test");
    return out;
}

// ---------------------------------------------------------------------------
// CSV / archive formats
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline void write_trips_csv(const std::vector<TripRecord>& trips, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "order_id,user_id,start_time,end_time,start_lon,start_lat,end_lon,end_lat\n";
    char buf[64];
    auto fmt = [&](const DateTime& dt) {
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d", dt.year, dt.month, dt.day,
                      dt.hour, dt.minute, dt.second);
        return std::string(buf);
    };
    os.precision(17);  // round-trips doubles exactly
    for (const TripRecord& t : trips)
        os << t.order_id << ',' << t.user_id << ',' << fmt(t.start_time) << ','
           << fmt(t.end_time) << ',' << t.start_lon << ',' << t.start_lat << ',' << t.end_lon
           << ',' << t.end_lat << '\n';
}

inline std::vector<TripRecord> read_trips_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty trips file " + path);
    std::vector<TripRecord> out;
    size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 8)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 8 fields");
        TripRecord t;
        t.order_id = f[0];
        t.user_id = f[1];
        auto st = parse_datetime(f[2]);
        auto et = parse_datetime(f[3]);
        if (!st || !et)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad timestamp");
        t.start_time = *st;
        t.end_time = *et;
        t.start_lon = std::stod(f[4]);
        t.start_lat = std::stod(f[5]);
        t.end_lon = std::stod(f[6]);
        t.end_lat = std::stod(f[7]);
        out.push_back(std::move(t));
    }
    return out;
}

inline void write_weather_csv(const WeatherTable& table, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "date,half,condition\n";
    for (const auto& [key, cond] : table)
        os << format_date(key.first) << ',' << (key.second == 0 ? "day" : "night") << ','
           << weather_name(cond) << '\n';
}

inline WeatherTable read_weather_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty weather file " + path);
    WeatherTable out;
    size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 3)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 3 fields");
        auto day = parse_date(f[0]);
        if (!day) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad date");
        int half = f[1] == "day" ? 0 : 1;
        int cond;
        if (f[2] == "sunny") cond = 0;
        else if (f[2] == "cloudy") cond = 1;
        else if (f[2] == "rainy") cond = 2;
        else throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad condition");
        out[{*day, half}] = cond;
    }
    return out;
}

// Cube archive: <prefix>.json index (grid spec + ordered hour list) and
// <prefix>.bin with each cube's N*I*J*C counts as little-endian doubles, in
// hour order.
inline void save_cube_archive(const std::vector<DemandCube>& cubes, const GridSpec& grid,
                              const std::string& prefix) {
    nlohmann::ordered_json idx;
    idx["format"] = "stdemand-cubes-v1";
    idx["grid"] = {{"lon_min", grid.lon_min}, {"lon_max", grid.lon_max},
                   {"lat_min", grid.lat_min}, {"lat_max", grid.lat_max},
                   {"I", grid.cols_i},        {"J", grid.rows_j},
                   {"segment_minutes", grid.segment_minutes},
                   {"segments_per_hour", grid.segments_per_hour}};
    std::vector<std::string> hours;
    hours.reserve(cubes.size());
    for (const DemandCube& c : cubes) hours.push_back(format_hour(c.hour));
    idx["hours"] = hours;

    std::ofstream js(prefix + ".json");
    if (!js) throw std::runtime_error("cannot write " + prefix + ".json");
    js << idx.dump(2) << "\n";
    std::ofstream bin(prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write " + prefix + ".bin");
    for (const DemandCube& c : cubes)
        bin.write(reinterpret_cast<const char*>(c.values.data()),
                  static_cast<std::streamsize>(c.values.size() * 8));
}

inline std::vector<DemandCube> load_cube_archive(const std::string& prefix, GridSpec& grid_out) {
    std::ifstream js(prefix + ".json");
    if (!js) throw std::runtime_error("cannot read " + prefix + ".json");
    nlohmann::json idx = nlohmann::json::parse(js);
    const auto& g = idx.at("grid");
    grid_out.lon_min = g.at("lon_min");
    grid_out.lon_max = g.at("lon_max");
    grid_out.lat_min = g.at("lat_min");
    grid_out.lat_max = g.at("lat_max");
    grid_out.cols_i = g.at("I");
    grid_out.rows_j = g.at("J");
    grid_out.segment_minutes = g.at("segment_minutes");
    grid_out.segments_per_hour = g.at("segments_per_hour");
    grid_out.validate();

    std::ifstream bin(prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot read " + prefix + ".bin");
    std::vector<DemandCube> cubes;
    for (const auto& hs : idx.at("hours")) {
        auto dt = parse_datetime(hs.get<std::string>());
        if (!dt) throw std::runtime_error("bad hour in archive index: " + hs.get<std::string>());
        DemandCube c(hour_index(*dt), grid_out);
        bin.read(reinterpret_cast<char*>(c.values.data()),
                 static_cast<std::streamsize>(c.values.size() * 8));
        if (!bin) throw std::runtime_error("cube archive blob truncated");
        cubes.push_back(std::move(c));
    }
    return cubes;
}

/// Long-form export: hour, segment, i, j, channel, count (zero rows omitted).
inline void export_cubes_csv(const std::vector<DemandCube>& cubes, const GridSpec& grid,
                             const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "hour,segment,i,j,channel,count\n";
    for (const DemandCube& c : cubes)
        for (int n = 0; n < grid.segments_per_hour; ++n)
            for (int i = 0; i < grid.cols_i; ++i)
                for (int j = 0; j < grid.rows_j; ++j)
                    for (int ch = 0; ch < kChannels; ++ch) {
                        double v = c.values.at({n, i, j, ch});
                        if (v != 0.0)
                            os << format_hour(c.hour) << ',' << n << ',' << i << ',' << j << ','
                               << ch << ',' << static_cast<std::int64_t>(v) << '\n';
                    }
}

}  // namespace stdemand
