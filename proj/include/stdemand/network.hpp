#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "stdemand/autodiff.hpp"
#include "stdemand/e3dlstm.hpp"
#include "stdemand/optimizer.hpp"
#include "stdemand/pipeline.hpp"
#include "stdemand/tensor.hpp"

namespace stdemand {

struct NetworkConfig {
    int lookback = 6;
    int encoder_layers = 2;
    int e3d_layers = 2;
    int decoder_layers = 2;
    int fc_layers = 1;
    int fusion_layers = 3;
    int filters = 32;
    std::array<int, 3> kernel = {3, 3, 3};
    int fc_width = 32;
    int fusion_width = 256;
    int tau = 0;  // 0 means: equal to lookback

    // demand cube extents
    int segments = 6;
    int grid_i = 16;
    int grid_j = 16;
    int channels = kChannels;

    bool use_externals = true;
    bool decode_all_steps = false;       // channel-concat every step before decoding
    std::string m_flow = "per_layer";    // "per_layer" | "cross_layer"
    bool normalize = false;              // per-channel max scaling of demand values

    int effective_tau() const { return tau > 0 ? tau : lookback; }
    std::int64_t cube_elems() const {
        return static_cast<std::int64_t>(segments) * grid_i * grid_j * channels;
    }
    Shape cube_shape() const { return Shape{segments, grid_i, grid_j, channels}; }

    void validate() const {
        if (lookback < 1 || encoder_layers < 1 || e3d_layers < 1 || decoder_layers < 1 ||
            fc_layers < 1 || fusion_layers < 1 || filters < 1 || fc_width < 1 ||
            fusion_width < 1)
            throw ShapeError("network config counts must all be >= 1");
        if (m_flow != "per_layer" && m_flow != "cross_layer")
            throw ShapeError("m_flow must be per_layer or cross_layer");
        for (int k : kernel)
            if (k < 1 || k % 2 == 0) throw ShapeError("kernel extents must be odd");
    }
};

/// FM-E3DCL-Net: 3D conv encoder, stacked eidetic 3D-LSTM, 3D conv decoder,
/// FC branch over external factors, fusion FC head emitting the demand cube.
class Network {
public:
    static constexpr int kExternalDim = 9;

    Network(NetworkConfig cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed);
        int kvol = cfg_.kernel[0] * cfg_.kernel[1] * cfg_.kernel[2];

        auto conv_param = [&](const std::string& name, int cin, int cout) {
            params_.add(name + "/kernel",
                        uniform_init(Shape{cfg_.kernel[0], cfg_.kernel[1], cfg_.kernel[2], cin,
                                           cout},
                                     kvol * cin, rng));
            params_.add(name + "/bias", Tensor(Shape{cout}));
        };
        auto dense_param = [&](const std::string& name, int nin, int nout) {
            params_.add(name + "/weight", uniform_init(Shape{nin, nout}, nin, rng));
            params_.add(name + "/bias", Tensor(Shape{nout}));
        };

        for (int l = 0; l < cfg_.encoder_layers; ++l)
            conv_param("encoder-" + std::to_string(l), l == 0 ? cfg_.channels : cfg_.filters,
                       cfg_.filters);

        CellConfig cc;
        cc.tau = cfg_.effective_tau();
        cc.in_channels = cfg_.filters;
        cc.hidden_channels = cfg_.filters;
        cc.kernel = cfg_.kernel;
        cc.block = {cfg_.segments, cfg_.grid_i, cfg_.grid_j};
        for (int l = 0; l < cfg_.e3d_layers; ++l)
            cells_.emplace_back(cc, params_, "layer-" + std::to_string(l) + "/", rng);

        int dec_in = cfg_.decode_all_steps ? cfg_.filters * cfg_.lookback : cfg_.filters;
        for (int l = 0; l < cfg_.decoder_layers; ++l)
            conv_param("decoder-" + std::to_string(l), l == 0 ? dec_in : cfg_.filters,
                       l == cfg_.decoder_layers - 1 ? cfg_.channels : cfg_.filters);

        if (cfg_.use_externals)
            for (int l = 0; l < cfg_.fc_layers; ++l)
                dense_param("fc-" + std::to_string(l), l == 0 ? kExternalDim : cfg_.fc_width,
                            cfg_.fc_width);

        int fusion_in = static_cast<int>(cfg_.cube_elems()) +
                        (cfg_.use_externals ? cfg_.fc_width : 0);
        int fusion_out = static_cast<int>(cfg_.cube_elems());
        for (int l = 0; l < cfg_.fusion_layers; ++l) {
            int nin = l == 0 ? fusion_in : cfg_.fusion_width;
            int nout = l == cfg_.fusion_layers - 1 ? fusion_out : cfg_.fusion_width;
            dense_param("fusion-" + std::to_string(l), nin, nout);
        }
    }

    const NetworkConfig& config() const { return cfg_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

    /// Per-channel divisor for demand values; identity unless normalization
    /// is enabled and fitted on the training split.
    std::array<double, kChannels> channel_scale{1.0, 1.0};

    void fit_scale(const std::vector<DemandCube>& train_cubes) {
        if (!cfg_.normalize) return;
        std::array<double, kChannels> mx{1.0, 1.0};
        for (const DemandCube& c : train_cubes)
            for (std::int64_t i = 0; i < c.values.size(); ++i) {
                int ch = static_cast<int>(i % kChannels);
                mx[static_cast<size_t>(ch)] =
                    std::max(mx[static_cast<size_t>(ch)], c.values[i]);
            }
        channel_scale = mx;
    }

    Tensor scale_cube(const Tensor& cube) const {
        Tensor out = cube;
        if (cfg_.normalize)
            for (std::int64_t i = 0; i < out.size(); ++i)
                out[i] /= channel_scale[static_cast<size_t>(i % kChannels)];
        return out;
    }

    Tensor unscale_cube(const Tensor& cube) const {
        Tensor out = cube;
        if (cfg_.normalize)
            for (std::int64_t i = 0; i < out.size(); ++i)
                out[i] *= channel_scale[static_cast<size_t>(i % kChannels)];
        return out;
    }

    /// Differentiable forward pass for one sample. demand_seq holds the d
    /// raw cubes oldest first; externals is the length-9 encoded [w,h,p]
    /// vector for hour t-1. Output lives in scaled space when normalization
    /// is on.
    Value forward(Graph& g, const std::vector<Tensor>& demand_seq, const Tensor& externals) {
        if (static_cast<int>(demand_seq.size()) != cfg_.lookback)
            throw ShapeError("forward expects " + std::to_string(cfg_.lookback) +
                             " demand cubes, got " + std::to_string(demand_seq.size()));
        Shape cube5{1, cfg_.segments, cfg_.grid_i, cfg_.grid_j, cfg_.channels};
        std::array<int, 3> pad = {cfg_.kernel[0] / 2, cfg_.kernel[1] / 2, cfg_.kernel[2] / 2};

        auto conv_layer = [&](Value x, const std::string& name) {
            return g.conv3d(x, g.leaf(params_.get(name + "/kernel")),
                            g.leaf(params_.get(name + "/bias")), pad);
        };

        // 3D encoder, shared across the d hour-blocks
        std::vector<Value> encoded;
        encoded.reserve(demand_seq.size());
        for (const Tensor& cube : demand_seq) {
            if (cube.shape() != cfg_.cube_shape())
                throw ShapeError("demand cube shape " + cube.shape().str() +
                                 " inconsistent with config " + cfg_.cube_shape().str());
            Value x = g.constant(scale_cube(cube).reshaped(cube5));
            for (int l = 0; l < cfg_.encoder_layers; ++l)
                x = g.relu(conv_layer(x, "encoder-" + std::to_string(l)));
            encoded.push_back(x);
        }

        // stacked E3D-LSTM
        std::vector<CellState> states;
        states.reserve(cells_.size());
        for (const E3dLstmCell& c : cells_) states.push_back(c.initial_state(g));
        std::vector<Value> top_hidden;
        Value m_top_prev{};
        bool have_m_top = false;
        for (int t = 0; t < cfg_.lookback; ++t) {
            Value x = encoded[static_cast<size_t>(t)];
            for (size_t k = 0; k < cells_.size(); ++k) {
                CellState prev = states[k];
                if (cfg_.m_flow == "cross_layer") {
                    // spatio-temporal memory zigzags: up through the stack at
                    // time t, then from the top back to layer 0 at t+1
                    if (k == 0) {
                        if (have_m_top) prev.M = m_top_prev;
                    } else {
                        prev.M = states[k - 1].M;
                    }
                }
                states[k] = cells_[k].step(g, x, prev);
                x = states[k].H;
            }
            if (cfg_.m_flow == "cross_layer") {
                m_top_prev = states.back().M;
                have_m_top = true;
            }
            top_hidden.push_back(g.relu(x));
        }

        // 3D decoder on the final step (or a channel concat of every step)
        Value dec = cfg_.decode_all_steps ? g.concat(top_hidden, 4) : top_hidden.back();
        for (int l = 0; l < cfg_.decoder_layers; ++l) {
            dec = conv_layer(dec, "decoder-" + std::to_string(l));
            if (l + 1 < cfg_.decoder_layers) dec = g.relu(dec);
        }

        // fusion head
        Value flat = g.reshape(dec, Shape{1, static_cast<int>(cfg_.cube_elems())});
        Value fused = flat;
        if (cfg_.use_externals) {
            if (externals.shape().rank() != 1 || externals.shape()[0] != kExternalDim)
                throw ShapeError("externals must be a length-9 vector, got " +
                                 externals.shape().str());
            Value v = g.reshape(g.constant(externals), Shape{1, kExternalDim});
            for (int l = 0; l < cfg_.fc_layers; ++l) {
                const std::string name = "fc-" + std::to_string(l);
                v = g.relu(g.add_rowwise(g.matmul(v, g.leaf(params_.get(name + "/weight"))),
                                         g.leaf(params_.get(name + "/bias"))));
            }
            fused = g.concat({flat, v}, 1);
        }
        for (int l = 0; l < cfg_.fusion_layers; ++l) {
            const std::string name = "fusion-" + std::to_string(l);
            fused = g.add_rowwise(g.matmul(fused, g.leaf(params_.get(name + "/weight"))),
                                  g.leaf(params_.get(name + "/bias")));
            if (l + 1 < cfg_.fusion_layers) fused = g.relu(fused);
        }
        return g.reshape(fused, cfg_.cube_shape());
    }

    /// Mean squared error between a forward output and a raw truth cube
    /// (scaled to match when normalization is on).
    Value loss(Graph& g, Value d_hat, const Tensor& d_true) {
        if (g.value(d_hat).shape() != d_true.shape())
            throw ShapeError("loss shape mismatch: " + g.value(d_hat).shape().str() + " vs " +
                             d_true.shape().str());
        return g.mse(d_hat, g.constant(scale_cube(d_true)));
    }

    /// Pure inference; identical to forward, with scaling inverted.
    Tensor predict(const std::vector<Tensor>& demand_seq, const Tensor& externals) {
        Graph g;
        Value out = forward(g, demand_seq, externals);
        return unscale_cube(g.value(out));
    }

    /// Convenience batch inference; returns [B, N, I, J, C].
    Tensor predict_batch(const std::vector<std::vector<Tensor>>& seqs,
                         const std::vector<Tensor>& externals) {
        if (seqs.empty() || seqs.size() != externals.size())
            throw ShapeError("predict_batch input size mismatch");
        int b = static_cast<int>(seqs.size());
        Tensor out(Shape{b, cfg_.segments, cfg_.grid_i, cfg_.grid_j, cfg_.channels});
        std::int64_t stride = cfg_.cube_elems();
        for (int s = 0; s < b; ++s) {
            Tensor one = predict(seqs[static_cast<size_t>(s)], externals[static_cast<size_t>(s)]);
            std::copy(one.data(), one.data() + stride, out.data() + s * stride);
        }
        return out;
    }

private:
    NetworkConfig cfg_;
    ParameterSet params_;
    std::vector<E3dLstmCell> cells_;
};

}  // namespace stdemand
