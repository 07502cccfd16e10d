// stdemand command-line front end. One JSON config drives every command;
// --set key=value overrides config fields by dotted path. Exit codes:
// 0 success, 2 invalid config (message names the field), 3 missing file.
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stdemand/analysis.hpp"
#include "stdemand/baselines.hpp"
#include "stdemand/checkpoint.hpp"
#include "stdemand/metrics.hpp"
#include "stdemand/network.hpp"
#include "stdemand/pipeline.hpp"
#include "stdemand/synthetic.hpp"
#include "stdemand/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stdemand;

namespace {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& field, const std::string& why)
        : std::runtime_error("invalid config at '" + field + "': " + why) {}
};

struct MissingFile : std::runtime_error {
    explicit MissingFile(const std::string& path)
        : std::runtime_error("missing file: " + path) {}
};

// ---- config access helpers -----------------------------------------------

const json* find_path(const json& root, const std::string& dotted) {
    const json* cur = &root;
    size_t pos = 0;
    while (pos <= dotted.size()) {
        size_t dot = dotted.find('.', pos);
        std::string key = dotted.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (!cur->is_object() || !cur->contains(key)) return nullptr;
        cur = &(*cur)[key];
        if (dot == std::string::npos) return cur;
        pos = dot + 1;
    }
    return nullptr;
}

template <typename T>
T get_or(const json& root, const std::string& dotted, T fallback) {
    const json* v = find_path(root, dotted);
    if (!v) return fallback;
    try {
        return v->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(dotted, "wrong type, found " + v->dump());
    }
}

std::string require_string(const json& root, const std::string& dotted) {
    const json* v = find_path(root, dotted);
    if (!v) throw ConfigError(dotted, "required field is absent");
    if (!v->is_string()) throw ConfigError(dotted, "expected a string, found " + v->dump());
    return v->get<std::string>();
}

std::int64_t require_date(const json& root, const std::string& dotted) {
    auto d = parse_date(require_string(root, dotted));
    if (!d) throw ConfigError(dotted, "expected YYYY-MM-DD");
    return *d;
}

void apply_override(json& root, const std::string& kv) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set " + kv, "expected key=value");
    std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;  // unquoted strings pass through verbatim
    }
    json* cur = &root;
    size_t pos = 0;
    while (true) {
        size_t dot = key.find('.', pos);
        std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (part.empty()) throw ConfigError(key, "empty path segment");
        if (dot == std::string::npos) {
            (*cur)[part] = value;
            return;
        }
        cur = &(*cur)[part];
        pos = dot + 1;
    }
}

// ---- typed views over the config document --------------------------------

GridSpec grid_from(const json& cfg) {
    GridSpec g;
    g.lon_min = get_or(cfg, "grid.lon_min", g.lon_min);
    g.lon_max = get_or(cfg, "grid.lon_max", g.lon_max);
    g.lat_min = get_or(cfg, "grid.lat_min", g.lat_min);
    g.lat_max = get_or(cfg, "grid.lat_max", g.lat_max);
    g.cols_i = get_or(cfg, "grid.cols_i", g.cols_i);
    g.rows_j = get_or(cfg, "grid.rows_j", g.rows_j);
    g.segment_minutes = get_or(cfg, "grid.segment_minutes", g.segment_minutes);
    g.segments_per_hour = get_or(cfg, "grid.segments_per_hour", g.segments_per_hour);
    try {
        g.validate();
    } catch (const std::exception& e) {
        throw ConfigError("grid", e.what());
    }
    return g;
}

NetworkConfig network_from(const json& cfg, const GridSpec& grid) {
    NetworkConfig n;
    n.lookback = get_or(cfg, "network.lookback", n.lookback);
    n.encoder_layers = get_or(cfg, "network.encoder_layers", n.encoder_layers);
    n.e3d_layers = get_or(cfg, "network.e3d_layers", n.e3d_layers);
    n.decoder_layers = get_or(cfg, "network.decoder_layers", n.decoder_layers);
    n.fc_layers = get_or(cfg, "network.fc_layers", n.fc_layers);
    n.fusion_layers = get_or(cfg, "network.fusion_layers", n.fusion_layers);
    n.filters = get_or(cfg, "network.filters", n.filters);
    auto kern = get_or<std::vector<int>>(cfg, "network.kernel",
                                         {n.kernel[0], n.kernel[1], n.kernel[2]});
    if (kern.size() != 3) throw ConfigError("network.kernel", "expected 3 extents");
    n.kernel = {kern[0], kern[1], kern[2]};
    n.fc_width = get_or(cfg, "network.fc_width", n.fc_width);
    n.fusion_width = get_or(cfg, "network.fusion_width", n.fusion_width);
    n.tau = get_or(cfg, "network.tau", n.tau);
    n.use_externals = get_or(cfg, "network.use_externals", n.use_externals);
    n.decode_all_steps = get_or(cfg, "network.decode_all_steps", n.decode_all_steps);
    n.m_flow = get_or(cfg, "network.m_flow", n.m_flow);
    n.normalize = get_or(cfg, "network.normalize", n.normalize);
    n.segments = grid.segments_per_hour;
    n.grid_i = grid.cols_i;
    n.grid_j = grid.rows_j;
    try {
        n.validate();
    } catch (const std::exception& e) {
        throw ConfigError("network", e.what());
    }
    return n;
}

TrainConfig train_from(const json& cfg) {
    TrainConfig t;
    t.batch_size = get_or(cfg, "train.batch_size", t.batch_size);
    t.max_epochs = get_or(cfg, "train.max_epochs", t.max_epochs);
    t.patience = get_or(cfg, "train.patience", t.patience);
    t.seed = get_or<std::uint64_t>(cfg, "seed", 1);
    t.optimizer.kind = get_or(cfg, "train.optimizer.kind", t.optimizer.kind);
    t.optimizer.lr = get_or(cfg, "train.optimizer.lr", t.optimizer.lr);
    t.optimizer.beta1 = get_or(cfg, "train.optimizer.beta1", t.optimizer.beta1);
    t.optimizer.beta2 = get_or(cfg, "train.optimizer.beta2", t.optimizer.beta2);
    t.optimizer.eps = get_or(cfg, "train.optimizer.eps", t.optimizer.eps);
    if (t.batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (t.max_epochs < 1) throw ConfigError("train.max_epochs", "must be >= 1");
    if (t.optimizer.kind != "adam" && t.optimizer.kind != "sgd")
        throw ConfigError("train.optimizer.kind", "expected adam or sgd");
    return t;
}

std::string require_path(const json& cfg, const std::string& field) {
    std::string p = require_string(cfg, field);
    if (p.empty()) throw ConfigError(field, "empty path");
    return p;
}

void need_file(const std::string& path) {
    if (!fs::exists(path)) throw MissingFile(path);
}

fs::path ensure_run_dir(const json& cfg) {
    fs::path dir = get_or<std::string>(cfg, "run_dir", "run");
    fs::create_directories(dir);
    return dir;
}

void echo_config(const json& cfg, const fs::path& run_dir) {
    std::ofstream os(run_dir / "config.json");
    os << cfg.dump(2) << "\n";
}

// ---- shared data loading ---------------------------------------------------

struct LoadedData {
    GridSpec grid;
    std::vector<DemandCube> cubes;
    WeatherTable weather;
};

LoadedData load_cubes_weather(const json& cfg) {
    LoadedData d;
    std::string prefix = require_path(cfg, "paths.cubes");
    need_file(prefix + ".json");
    need_file(prefix + ".bin");
    d.cubes = load_cube_archive(prefix, d.grid);
    std::string wpath = require_path(cfg, "paths.weather");
    need_file(wpath);
    d.weather = read_weather_csv(wpath);
    if (d.cubes.empty()) throw ConfigError("paths.cubes", "archive holds no cubes");
    return d;
}

struct SplitWindows {
    DataSplit split;
    std::vector<Sample> train, val, test;
};

SplitWindows make_split(const LoadedData& d, const json& cfg, int lookback) {
    std::int64_t val_start = require_date(cfg, "split.val_start");
    std::int64_t test_start = require_date(cfg, "split.test_start");
    SplitWindows w;
    try {
        w.split = split_by_date(d.cubes, val_start, test_start, lookback + 1);
    } catch (const std::exception& e) {
        throw ConfigError("split", e.what());
    }
    PeriodBoundaries pb;
    w.train = make_windows(w.split.train, d.weather, lookback, pb);
    w.val = make_windows(w.split.val, d.weather, lookback, pb);
    w.test = make_windows(w.split.test, d.weather, lookback, pb);
    if (w.train.empty() || w.val.empty() || w.test.empty())
        throw ConfigError("split", "a split yields no look-back windows");
    return w;
}

/// Test samples whose hour also has a full 6-hour history inside the test
/// split, so the network, HA, MA and the ensemble score the same hours.
std::vector<Sample> comparable_test_samples(const SplitWindows& w) {
    std::int64_t first_hour = w.split.test.front().hour;
    std::vector<Sample> out;
    for (const Sample& s : w.test)
        if (s.hour - first_hour >= kMovingAverageWindow) out.push_back(s);
    return out;
}

// ---- commands --------------------------------------------------------------

int cmd_synth(const json& cfg) {
    SyntheticConfig s;
    s.grid = grid_from(cfg);
    s.start_day = require_date(cfg, "synth.start_date");
    s.days = get_or(cfg, "synth.days", s.days);
    if (s.days < 1) throw ConfigError("synth.days", "must be >= 1");
    s.base_intensity = get_or(cfg, "synth.base_intensity", s.base_intensity);
    s.cloudy_prob = get_or(cfg, "synth.cloudy_prob", s.cloudy_prob);
    s.rain_prob = get_or(cfg, "synth.rain_prob", s.rain_prob);
    s.modifiers_active = get_or(cfg, "synth.modifiers_active", s.modifiers_active);
    std::uint64_t seed = get_or<std::uint64_t>(cfg, "seed", 1);

    SyntheticData data = generate_synthetic(s, seed);
    std::string trips = require_path(cfg, "paths.trips");
    std::string weather = require_path(cfg, "paths.weather");
    for (const std::string& p : {trips, weather})
        if (fs::path(p).has_parent_path()) fs::create_directories(fs::path(p).parent_path());
    write_trips_csv(data.trips, trips);
    write_weather_csv(data.weather, weather);
    std::cout << "synth: " << data.trips.size() << " trips over " << s.days << " days -> "
              << trips << ", " << weather << "\n";
    return 0;
}

int cmd_build(const json& cfg) {
    GridSpec grid = grid_from(cfg);
    std::string trips_path = require_path(cfg, "paths.trips");
    need_file(trips_path);
    auto trips = read_trips_csv(trips_path);
    if (trips.empty()) throw ConfigError("paths.trips", "no trip records");

    std::int64_t lo = hour_index(trips.front().start_time), hi = lo;
    for (const TripRecord& t : trips) {
        lo = std::min(lo, hour_index(t.start_time));
        hi = std::max(hi, hour_index(t.start_time));
    }
    // whole days, derived from start times only: returns spilling past the
    // final midnight would need weather for a day the corpus does not cover,
    // so they are reported as out-of-range instead of extending the series
    std::int64_t hour_begin = (lo / 24) * 24;
    std::int64_t hour_end = (hi / 24 + 1) * 24;

    IngestReport rep;
    auto cubes = build_demand(trips, grid, hour_begin, hour_end, &rep);
    std::string prefix = require_path(cfg, "paths.cubes");
    if (fs::path(prefix).has_parent_path()) fs::create_directories(fs::path(prefix).parent_path());
    save_cube_archive(cubes, grid, prefix);
    std::cout << "build: " << cubes.size() << " hourly cubes [" << format_hour(hour_begin)
              << ", " << format_hour(hour_end) << ") -> " << prefix << ".{json,bin}\n"
              << "  starts counted " << rep.starts_counted << ", dropped "
              << rep.starts_dropped_coord << "; ends counted " << rep.ends_counted
              << ", dropped " << rep.ends_dropped_coord << ", out of range "
              << rep.ends_out_of_range << "\n";
    return 0;
}

int cmd_train(const json& cfg) {
    LoadedData d = load_cubes_weather(cfg);
    NetworkConfig ncfg = network_from(cfg, d.grid);
    TrainConfig tcfg = train_from(cfg);
    SplitWindows w = make_split(d, cfg, ncfg.lookback);
    fs::path run_dir = ensure_run_dir(cfg);
    echo_config(cfg, run_dir);

    Network net(ncfg, tcfg.seed);
    net.fit_scale(w.split.train);
    TrainResult r = train(net, w.train, w.val, tcfg);
    write_history_csv(r, (run_dir / "history.csv").string());
    save_checkpoint(net.params(), (run_dir / "checkpoint").string());

    if (get_or(cfg, "train.ensemble_with_ha", true)) {
        HAModel ha = HAModel::fit(w.split.train, get_or(cfg, "train.ha_by_day_type", true));
        std::vector<Tensor> p1, p2, truth;
        for (const Sample& s : w.val) {
            p1.push_back(net.predict(s.seq, s.externals));
            p2.push_back(ha.predict(s.hour));
            truth.push_back(s.target);
        }
        EnsembleModel ens = ensemble_fit(p1, p2, truth);
        save_ensemble(ens, (run_dir / "ensemble.json").string());
        std::cout << "ensemble: w1 " << ens.w1 << ", w2 " << ens.w2 << ", fit rmse "
                  << ens.fit_rmse << (ens.degenerate ? " (degenerate fallback)" : "") << "\n";
    }
    std::cout << "train: " << r.history.size() << " epochs, best val rmse " << r.best_val_rmse
              << " at epoch " << r.best_epoch << (r.early_stopped ? " (early stop)" : "")
              << " -> " << run_dir.string() << "\n";
    return 0;
}

/// Rebuilds the network exactly as `train` configured it and loads the
/// checkpoint from the run directory.
Network restore_network(const json& cfg, const LoadedData& d, const SplitWindows& w,
                        const fs::path& run_dir) {
    NetworkConfig ncfg = network_from(cfg, d.grid);
    TrainConfig tcfg = train_from(cfg);
    Network net(ncfg, tcfg.seed);
    net.fit_scale(w.split.train);  // scale is a pure function of the train split
    std::string prefix = (run_dir / "checkpoint").string();
    need_file(prefix + ".json");
    need_file(prefix + ".bin");
    load_checkpoint(net.params(), prefix);
    return net;
}

int cmd_predict(const json& cfg) {
    LoadedData d = load_cubes_weather(cfg);
    NetworkConfig ncfg = network_from(cfg, d.grid);
    SplitWindows w = make_split(d, cfg, ncfg.lookback);
    fs::path run_dir = ensure_run_dir(cfg);
    Network net = restore_network(cfg, d, w, run_dir);

    auto hour_dt = parse_datetime(require_string(cfg, "predict.hour"));
    if (!hour_dt) throw ConfigError("predict.hour", "expected YYYY-MM-DDThh:00:00");
    std::int64_t hour = hour_index(*hour_dt);

    // the d preceding cubes must exist contiguously in the archive
    std::vector<Tensor> seq;
    for (int k = ncfg.lookback; k >= 1; --k) {
        auto it = std::find_if(d.cubes.begin(), d.cubes.end(),
                               [&](const DemandCube& c) { return c.hour == hour - k; });
        if (it == d.cubes.end())
            throw ConfigError("predict.hour", "archive lacks hour " + format_hour(hour - k) +
                                                  " needed for the look-back window");
        seq.push_back(it->values);
    }
    Tensor ext = encode_externals(hour - 1, d.weather).encode();
    DemandCube pred(hour, d.grid);
    pred.values = net.predict(seq, ext);
    for (std::int64_t i = 0; i < pred.values.size(); ++i)  // counts cannot go negative
        pred.values[i] = std::max(0.0, pred.values[i]);

    std::string out = (run_dir / ("prediction_" + std::to_string(hour) + ".csv")).string();
    std::ofstream os(out);
    os << "segment,i,j,channel,value\n";
    os.precision(12);
    const Shape& s = pred.values.shape();
    for (int n = 0; n < s[0]; ++n)
        for (int i = 0; i < s[1]; ++i)
            for (int j = 0; j < s[2]; ++j)
                for (int c = 0; c < s[3]; ++c)
                    os << n << ',' << i << ',' << j << ',' << c << ','
                       << pred.values.at({n, i, j, c}) << '\n';
    std::cout << "predict: " << format_hour(hour) << " -> " << out << "\n";
    return 0;
}

int cmd_evaluate(const json& cfg) {
    LoadedData d = load_cubes_weather(cfg);
    NetworkConfig ncfg = network_from(cfg, d.grid);
    SplitWindows w = make_split(d, cfg, ncfg.lookback);
    fs::path run_dir = ensure_run_dir(cfg);
    Network net = restore_network(cfg, d, w, run_dir);
    HAModel ha = HAModel::fit(w.split.train, get_or(cfg, "train.ha_by_day_type", true));

    auto samples = comparable_test_samples(w);
    if (samples.empty()) throw ConfigError("split", "test split too short for a 6-hour history");
    std::int64_t first_hour = w.split.test.front().hour;

    std::vector<Tensor> truth, p_net, p_ha, p_ma;
    for (const Sample& s : samples) {
        truth.push_back(s.target);
        p_net.push_back(net.predict(s.seq, s.externals));
        p_ha.push_back(ha.predict(s.hour));
        std::vector<Tensor> hist;
        for (int k = kMovingAverageWindow; k >= 1; --k)
            hist.push_back(
                w.split.test[static_cast<size_t>(s.hour - first_hour - k)].values);
        p_ma.push_back(ma_predict(hist));
    }

    nlohmann::ordered_json out;
    out["samples"] = samples.size();
    out["net"] = metrics(truth, p_net).to_json();
    out["ha"] = metrics(truth, p_ha).to_json();
    out["ma"] = metrics(truth, p_ma).to_json();
    fs::path ens_path = run_dir / "ensemble.json";
    if (fs::exists(ens_path)) {
        EnsembleModel ens = load_ensemble(ens_path.string());
        std::vector<Tensor> p_ens;
        for (size_t i = 0; i < samples.size(); ++i)
            p_ens.push_back(ensemble_predict(ens, p_net[i], p_ha[i]));
        out["ensemble"] = metrics(truth, p_ens).to_json();
        out["ensemble"]["w1"] = ens.w1;
        out["ensemble"]["w2"] = ens.w2;
    }
    std::ofstream os(run_dir / "metrics.json");
    os << out.dump(2) << "\n";
    std::cout << "evaluate: " << samples.size() << " test hours -> "
              << (run_dir / "metrics.json").string() << "\n"
              << out.dump(2) << "\n";
    return 0;
}

int cmd_correlate(const json& cfg) {
    LoadedData d = load_cubes_weather(cfg);
    fs::path run_dir = ensure_run_dir(cfg);
    int ci = get_or(cfg, "correlate.center_i", d.grid.cols_i / 2);
    int cj = get_or(cfg, "correlate.center_j", d.grid.rows_j / 2);
    int channel = get_or(cfg, "correlate.channel", 0);
    auto offsets = get_or<std::vector<int>>(cfg, "correlate.offsets", {1, 2, 3, 4});
    auto lags = get_or<std::vector<int>>(cfg, "correlate.lags", {1, 2, 3, 4, 5, 6});
    std::string mode_s = get_or<std::string>(cfg, "correlate.mode", "four_diagonals");
    DiagonalMode mode;
    if (mode_s == "four_diagonals") mode = DiagonalMode::FourDiagonals;
    else if (mode_s == "single_diagonal") mode = DiagonalMode::SingleDiagonal;
    else throw ConfigError("correlate.mode", "expected four_diagonals or single_diagonal");
    if (ci < 0 || ci >= d.grid.cols_i || cj < 0 || cj >= d.grid.rows_j)
        throw ConfigError("correlate.center_i", "center outside the grid");

    CorrelationGrid grid = lagged_correlation(d.cubes, ci, cj, channel, offsets, lags, mode);
    std::string out = (run_dir / "correlation.csv").string();
    write_correlation_csv(grid, out);
    std::cout << "correlate: center (" << ci << "," << cj << ") -> " << out << "\n";
    return 0;
}

int cmd_sweep(const json& cfg) {
    LoadedData d = load_cubes_weather(cfg);
    NetworkConfig ncfg = network_from(cfg, d.grid);
    TrainConfig tcfg = train_from(cfg);
    std::string axis = get_or<std::string>(cfg, "sweep.axis", "lookback");
    auto values = get_or<std::vector<int>>(cfg, "sweep.values", {1, 3, 6});
    if (values.empty()) throw ConfigError("sweep.values", "need at least one value");
    int max_lookback = ncfg.lookback;
    for (int v : values)
        if (axis == "lookback") max_lookback = std::max(max_lookback, v);

    std::int64_t val_start = require_date(cfg, "split.val_start");
    std::int64_t test_start = require_date(cfg, "split.test_start");
    DataSplit split;
    try {
        split = split_by_date(d.cubes, val_start, test_start, max_lookback + 1);
    } catch (const std::exception& e) {
        throw ConfigError("split", e.what());
    }
    fs::path run_dir = ensure_run_dir(cfg);
    auto rows = sweep(ncfg, tcfg, axis, values, split, d.weather);
    std::string out = (run_dir / "sweep.csv").string();
    write_sweep_csv(rows, out);
    for (const SweepRow& r : rows)
        std::cout << "  " << r.axis << "=" << r.value << ": rent rmse " << r.rmse_rent
                  << ", return rmse " << r.rmse_return << "\n";
    std::cout << "sweep -> " << out << "\n";
    return 0;
}

int cmd_heatmap(const json& cfg) {
    LoadedData d = load_cubes_weather(cfg);
    fs::path run_dir = ensure_run_dir(cfg);
    auto hour_dt = parse_datetime(require_string(cfg, "heatmap.hour"));
    if (!hour_dt) throw ConfigError("heatmap.hour", "expected YYYY-MM-DDThh:00:00");
    std::int64_t hour = hour_index(*hour_dt);
    auto it = std::find_if(d.cubes.begin(), d.cubes.end(),
                           [&](const DemandCube& c) { return c.hour == hour; });
    if (it == d.cubes.end())
        throw ConfigError("heatmap.hour", "archive lacks hour " + format_hour(hour));
    for (int c = 0; c < kChannels; ++c) {
        std::string out = (run_dir / ("heatmap_" + std::to_string(c) + "_" +
                                      std::to_string(hour) + ".csv"))
                              .string();
        export_heatmap(it->values, c, out);
        std::cout << "heatmap: channel " << c << " at " << format_hour(hour) << " -> " << out
                  << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hourly bike-sharing demand forecasting pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    const std::vector<std::string> names = {"synth",    "build", "train", "predict",
                                            "evaluate", "correlate", "sweep", "heatmap"};
    const std::vector<std::string> descs = {
        "generate synthetic trips and weather",
        "aggregate trips into the hourly cube archive",
        "train the forecasting network (and fit the HA ensemble)",
        "predict one hour from its look-back window",
        "score network, HA, MA and ensemble on the test split",
        "spatio-temporal lagged correlation study",
        "hyperparameter sensitivity sweep",
        "export hourly demand heatmaps"};
    for (size_t i = 0; i < names.size(); ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descs[i]);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--set", overrides, "override a config field by dotted path, key=value");
    }

    CLI11_PARSE(app, argc, argv);
    std::string command = app.get_subcommands().front()->get_name();

    try {
        if (!fs::exists(config_path)) throw MissingFile(config_path);
        std::ifstream is(config_path);
        json cfg;
        try {
            cfg = json::parse(is);
        } catch (const json::exception& e) {
            throw ConfigError(config_path, e.what());
        }
        for (const std::string& kv : overrides) apply_override(cfg, kv);

        if (command == "synth") return cmd_synth(cfg);
        if (command == "build") return cmd_build(cfg);
        if (command == "train") return cmd_train(cfg);
        if (command == "predict") return cmd_predict(cfg);
        if (command == "evaluate") return cmd_evaluate(cfg);
        if (command == "correlate") return cmd_correlate(cfg);
        if (command == "sweep") return cmd_sweep(cfg);
        if (command == "heatmap") return cmd_heatmap(cfg);
        std::cerr << "unknown command " << command << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const MissingFile& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
