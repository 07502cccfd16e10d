#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "stdemand/network.hpp"
#include "stdemand/optimizer.hpp"
#include "stdemand/pipeline.hpp"

namespace stdemand {

/// One supervised window: d past cubes, externals at t-1, truth at t.
struct Sample {
    std::vector<Tensor> seq;
    Tensor externals;
    Tensor target;
    std::int64_t hour = 0;  // predicted hour t
};

/// Sliding windows entirely inside one chronological split; m hours yield
/// m - d samples. Hours must be consecutive.
inline std::vector<Sample> make_windows(const std::vector<DemandCube>& cubes,
                                        const WeatherTable& weather, int lookback,
                                        PeriodBoundaries pb = {}) {
    if (lookback < 1) throw std::runtime_error("lookback must be >= 1");
    std::vector<Sample> out;
    for (size_t t = static_cast<size_t>(lookback); t < cubes.size(); ++t) {
        bool contiguous = true;
        for (int k = 0; k <= lookback; ++k)
            if (cubes[t - static_cast<size_t>(lookback) + static_cast<size_t>(k)].hour !=
                cubes[t].hour - lookback + k) {
                contiguous = false;
                break;
            }
        if (!contiguous) continue;
        Sample s;
        s.hour = cubes[t].hour;
        for (int k = lookback; k >= 1; --k)
            s.seq.push_back(cubes[t - static_cast<size_t>(k)].values);
        s.externals = encode_externals(cubes[t].hour - 1, weather, pb).encode();
        s.target = cubes[t].values;
        out.push_back(std::move(s));
    }
    return out;
}

struct TrainConfig {
    int batch_size = 32;
    int max_epochs = 50;
    int patience = 5;
    std::uint64_t seed = 0;
    OptimizerConfig optimizer;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_rmse = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    double best_val_rmse = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    bool early_stopped = false;
};

/// Overall RMSE of the network's predictions against raw truth cubes.
inline double eval_rmse(Network& net, const std::vector<Sample>& samples) {
    if (samples.empty()) throw std::runtime_error("eval on empty sample set");
    double sq = 0.0;
    std::int64_t n = 0;
    for (const Sample& s : samples) {
        Tensor pred = net.predict(s.seq, s.externals);
        for (std::int64_t i = 0; i < pred.size(); ++i) {
            double d = pred[i] - s.target[i];
            sq += d * d;
        }
        n += pred.size();
    }
    return std::sqrt(sq / static_cast<double>(n));
}

/// Seeded shuffled mini-batch optimization of the MSE objective with early
/// stopping on validation RMSE; the network is left holding the
/// best-validation parameters.
inline TrainResult train(Network& net, const std::vector<Sample>& train_samples,
                         const std::vector<Sample>& val_samples, const TrainConfig& cfg) {
    if (train_samples.empty() || val_samples.empty())
        throw std::runtime_error("train: empty dataset");
    if (cfg.batch_size < 1) throw std::runtime_error("train: batch_size must be >= 1");

    Rng rng(cfg.seed ^ 0x7261696e64656dULL);
    Optimizer opt(net.params(), cfg.optimizer);
    TrainResult result;
    std::vector<size_t> order(train_samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<Tensor> best_params;
    int epochs_without_improvement = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t pos = 0;
        while (pos < order.size()) {
            size_t bend = std::min(pos + static_cast<size_t>(cfg.batch_size), order.size());
            net.params().zero_grad();
            for (size_t b = pos; b < bend; ++b) {
                const Sample& s = train_samples[order[b]];
                Graph g;
                Value out = net.forward(g, s.seq, s.externals);
                Value l = net.loss(g, out, s.target);
                double lv = g.value(l)[0];
                if (!std::isfinite(lv))
                    throw std::runtime_error("train: non-finite loss at epoch " +
                                             std::to_string(epoch));
                epoch_loss += lv;
                g.backward(l);
            }
            net.params().scale_grads(1.0 / static_cast<double>(bend - pos));
            opt.step();
            pos = bend;
        }
        epoch_loss /= static_cast<double>(order.size());

        double val_rmse = eval_rmse(net, val_samples);
        result.history.push_back({epoch, epoch_loss, val_rmse});

        if (val_rmse < result.best_val_rmse) {
            result.best_val_rmse = val_rmse;
            result.best_epoch = epoch;
            best_params = net.params().snapshot();
            epochs_without_improvement = 0;
        } else {
            ++epochs_without_improvement;
            if (epochs_without_improvement >= std::max(1, cfg.patience)) {
                result.early_stopped = true;
                break;
            }
        }
    }
    if (!best_params.empty()) net.params().restore(best_params);
    return result;
}

inline void write_history_csv(const TrainResult& r, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "epoch,train_loss,val_rmse\n";
    os.precision(12);
    for (const EpochRecord& e : r.history)
        os << e.epoch << ',' << e.train_loss << ',' << e.val_rmse << '\n';
}

}  // namespace stdemand
