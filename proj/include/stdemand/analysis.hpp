#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "stdemand/metrics.hpp"
#include "stdemand/network.hpp"
#include "stdemand/training.hpp"

namespace stdemand {

struct SweepRow {
    std::string axis;
    int value = 0;
    double rmse_rent = 0.0;
    double rmse_return = 0.0;
};

inline NetworkConfig apply_sweep_value(NetworkConfig cfg, const std::string& axis, int value) {
    if (axis == "lookback") {
        cfg.lookback = value;
        cfg.tau = 0;  // keep tau tied to lookback
    } else if (axis == "layers") {
        cfg.e3d_layers = value;
    } else if (axis == "filters") {
        cfg.filters = value;
    } else {
        throw std::runtime_error("unknown sweep axis: " + axis +
                                 " (expected lookback, layers, or filters)");
    }
    return cfg;
}

/// Trains one seeded model per value (seed = base seed + index) and reports
/// per-channel test RMSE.
inline std::vector<SweepRow> sweep(const NetworkConfig& base_net, const TrainConfig& base_train,
                                   const std::string& axis, const std::vector<int>& values,
                                   const DataSplit& split, const WeatherTable& weather,
                                   PeriodBoundaries pb = {}) {
    std::vector<SweepRow> rows;
    for (size_t idx = 0; idx < values.size(); ++idx) {
        NetworkConfig net_cfg = apply_sweep_value(base_net, axis, values[idx]);
        net_cfg.validate();
        TrainConfig train_cfg = base_train;
        train_cfg.seed = base_train.seed + idx;

        auto train_w = make_windows(split.train, weather, net_cfg.lookback, pb);
        auto val_w = make_windows(split.val, weather, net_cfg.lookback, pb);
        auto test_w = make_windows(split.test, weather, net_cfg.lookback, pb);

        Network net(net_cfg, train_cfg.seed);
        net.fit_scale(split.train);
        train(net, train_w, val_w, train_cfg);

        std::vector<Tensor> truth, pred;
        for (const Sample& s : test_w) {
            truth.push_back(s.target);
            pred.push_back(net.predict(s.seq, s.externals));
        }
        MetricReport rep = metrics(truth, pred);
        rows.push_back({axis, values[idx], rep.rmse[0], rep.rmse[1]});
    }
    return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "axis,value,rmse_rent,rmse_return\n";
    os.precision(12);
    for (const SweepRow& r : rows)
        os << r.axis << ',' << r.value << ',' << r.rmse_rent << ',' << r.rmse_return << '\n';
}

}  // namespace stdemand
