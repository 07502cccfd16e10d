#pragma once

#include <array>
#include <string>
#include <vector>

#include "stdemand/autodiff.hpp"
#include "stdemand/optimizer.hpp"
#include "stdemand/tensor.hpp"

namespace stdemand {

struct CellConfig {
    int tau = 1;                           // retained temporal memories
    int in_channels = 1;
    int hidden_channels = 1;
    std::array<int, 3> kernel = {3, 3, 3};
    std::array<int, 3> block = {1, 1, 1};  // (N', I', J') extents of one block

    void validate() const {
        if (tau < 1) throw ShapeError("cell tau must be >= 1");
        if (in_channels < 1 || hidden_channels < 1)
            throw ShapeError("cell channel extents must be >= 1");
        for (int k : kernel)
            if (k < 1 || k % 2 == 0) throw ShapeError("cell kernel extents must be odd and >= 1");
    }

    Shape block_shape() const { return Shape{1, block[0], block[1], block[2], hidden_channels}; }
};

/// Attention of a gate block over the retained temporal memories. Each
/// spatial position's channel vector is a query; the keys/values at that
/// position are the corresponding vectors of the history memories, softmax
/// over the memory axis. A single retained memory is therefore returned
/// exactly, and tau=1 degenerates to the previous temporal memory.
inline Value recall(Graph& g, Value gate, const std::vector<Value>& c_history) {
    if (c_history.empty())
        throw ShapeError("recall requires at least one history memory (seed with zeros at t=0)");
    // copied: pushing nodes below may reallocate the graph's storage
    Shape s = g.value(gate).shape();
    int ch = s[s.rank() - 1];
    int positions = static_cast<int>(g.value(gate).size() / ch);

    Value q = g.reshape(gate, Shape{positions, ch});
    std::vector<Value> keys, score_cols;
    keys.reserve(c_history.size());
    for (Value c : c_history) {
        if (g.value(c).shape() != s)
            throw ShapeError("recall history shape mismatch: " + g.value(c).shape().str() +
                             " vs gate " + s.str());
        Value k = g.reshape(c, Shape{positions, ch});
        keys.push_back(k);
        score_cols.push_back(g.reshape(g.sum_axis1(g.mul(q, k)), Shape{positions, 1}));
    }
    Value attn = g.softmax(score_cols.size() == 1 ? score_cols[0] : g.concat(score_cols, 1), 1);
    Value out{};
    for (size_t m = 0; m < keys.size(); ++m) {
        Value term = g.rowwise_scale(keys[m], g.column(attn, static_cast<int>(m)));
        out = m == 0 ? term : g.add(out, term);
    }
    return g.reshape(out, s);
}

/// Differentiable per-step state; history holds the <= tau most recent
/// temporal memories, newest last.
struct CellState {
    Value H;
    Value M;
    std::vector<Value> c_history;
};

/// One eidetic 3D-conv LSTM layer. Parameters are registered into the shared
/// ParameterSet under `prefix` and the cell itself is immutable afterwards.
class E3dLstmCell {
public:
    E3dLstmCell(CellConfig cfg, ParameterSet& params, const std::string& prefix, Rng& rng)
        : cfg_(cfg) {
        cfg_.validate();
        auto kshape = [&](int cin) {
            return Shape{cfg_.kernel[0], cfg_.kernel[1], cfg_.kernel[2], cin, cfg_.hidden_channels};
        };
        int kvol = cfg_.kernel[0] * cfg_.kernel[1] * cfg_.kernel[2];
        int fan_x = kvol * cfg_.in_channels;
        int fan_h = kvol * cfg_.hidden_channels;

        auto kernel = [&](const char* name, int cin, int fan) {
            return &params.add(prefix + name, uniform_init(kshape(cin), fan, rng));
        };
        auto bias = [&](const char* name) {
            return &params.add(prefix + name, Tensor(Shape{cfg_.hidden_channels}));
        };

        W_xr_ = kernel("W_xr", cfg_.in_channels, fan_x);
        W_hr_ = kernel("W_hr", cfg_.hidden_channels, fan_h);
        b_r_ = bias("b_r");
        W_xi_ = kernel("W_xi", cfg_.in_channels, fan_x);
        W_hi_ = kernel("W_hi", cfg_.hidden_channels, fan_h);
        b_i_ = bias("b_i");
        W_xg_ = kernel("W_xg", cfg_.in_channels, fan_x);
        W_hg_ = kernel("W_hg", cfg_.hidden_channels, fan_h);
        b_g_ = bias("b_g");
        W_xi2_ = kernel("W_xi2", cfg_.in_channels, fan_x);
        W_mi_ = kernel("W_mi", cfg_.hidden_channels, fan_h);
        b_i2_ = bias("b_i2");
        W_xf2_ = kernel("W_xf2", cfg_.in_channels, fan_x);
        W_mf_ = kernel("W_mf", cfg_.hidden_channels, fan_h);
        b_f2_ = bias("b_f2");
        W_xg2_ = kernel("W_xg2", cfg_.in_channels, fan_x);
        W_mg_ = kernel("W_mg", cfg_.hidden_channels, fan_h);
        b_g2_ = bias("b_g2");
        W_xo_ = kernel("W_xo", cfg_.in_channels, fan_x);
        W_ho_ = kernel("W_ho", cfg_.hidden_channels, fan_h);
        W_co_ = kernel("W_co", cfg_.hidden_channels, fan_h);
        W_mo_ = kernel("W_mo", cfg_.hidden_channels, fan_h);
        b_o_ = bias("b_o");

        W_out_ = &params.add(prefix + "W_out",
                             uniform_init(Shape{1, 1, 1, 2 * cfg_.hidden_channels,
                                                cfg_.hidden_channels},
                                          2 * cfg_.hidden_channels, rng));
        ln_gamma_ = &params.add(prefix + "ln_gamma", Tensor(Shape{cfg_.hidden_channels}, 1.0));
        ln_beta_ = &params.add(prefix + "ln_beta", Tensor(Shape{cfg_.hidden_channels}));
    }

    const CellConfig& config() const { return cfg_; }

    /// Zero hidden/memory blocks and a single zero history memory so recall
    /// is defined at t=0.
    CellState initial_state(Graph& g) const {
        Shape bs = cfg_.block_shape();
        CellState s;
        s.H = g.constant(Tensor(bs));
        s.M = g.constant(Tensor(bs));
        s.c_history = {g.constant(Tensor(bs))};
        return s;
    }

    /// One recurrence step; X is a [1,N',I',J',in_channels] block.
    CellState step(Graph& g, Value x, const CellState& prev) const {
        const Shape& xs = g.value(x).shape();
        if (xs.rank() != 5 || xs[4] != cfg_.in_channels || xs[1] != cfg_.block[0] ||
            xs[2] != cfg_.block[1] || xs[3] != cfg_.block[2])
            throw ShapeError("cell_step input shape " + xs.str() + " inconsistent with config");
        if (g.value(prev.H).shape() != cfg_.block_shape())
            throw ShapeError("cell_step state shape " + g.value(prev.H).shape().str() +
                             " inconsistent with config");

        std::array<int, 3> pad = {cfg_.kernel[0] / 2, cfg_.kernel[1] / 2, cfg_.kernel[2] / 2};
        Value zero_b = g.constant(Tensor(Shape{cfg_.hidden_channels}));
        auto conv = [&](Value in, Parameter* w) {
            return g.conv3d(in, g.leaf(*w), zero_b, pad);
        };
        auto conv_b = [&](Value in, Parameter* w, Parameter* b) {
            return g.conv3d(in, g.leaf(*w), g.leaf(*b), pad);
        };

        Value r = g.sigmoid(g.add(conv_b(x, W_xr_, b_r_), conv(prev.H, W_hr_)));
        Value i = g.sigmoid(g.add(conv_b(x, W_xi_, b_i_), conv(prev.H, W_hi_)));
        Value cand = g.tanh(g.add(conv_b(x, W_xg_, b_g_), conv(prev.H, W_hg_)));

        Value c_prev = prev.c_history.back();
        Value recalled = recall(g, r, prev.c_history);
        Value c = g.add(g.mul(i, cand),
                        g.layer_norm(g.add(c_prev, recalled), g.leaf(*ln_gamma_),
                                     g.leaf(*ln_beta_)));

        Value i2 = g.sigmoid(g.add(conv_b(x, W_xi2_, b_i2_), conv(prev.M, W_mi_)));
        Value f2 = g.sigmoid(g.add(conv_b(x, W_xf2_, b_f2_), conv(prev.M, W_mf_)));
        Value cand2 = g.tanh(g.add(conv_b(x, W_xg2_, b_g2_), conv(prev.M, W_mg_)));
        Value m = g.add(g.mul(i2, cand2), g.mul(f2, prev.M));

        Value o = g.sigmoid(g.add(g.add(conv_b(x, W_xo_, b_o_), conv(prev.H, W_ho_)),
                                  g.add(conv(c, W_co_), conv(m, W_mo_))));

        Value cm = g.concat({c, m}, 4);
        Value zero_out_b = g.constant(Tensor(Shape{cfg_.hidden_channels}));
        Value h = g.mul(o, g.tanh(g.conv3d(cm, g.leaf(*W_out_), zero_out_b, {0, 0, 0})));

        CellState next;
        next.H = h;
        next.M = m;
        next.c_history = prev.c_history;
        next.c_history.push_back(c);
        while (static_cast<int>(next.c_history.size()) > cfg_.tau)
            next.c_history.erase(next.c_history.begin());
        return next;
    }

private:
    CellConfig cfg_;
    Parameter *W_xr_, *W_hr_, *b_r_;
    Parameter *W_xi_, *W_hi_, *b_i_;
    Parameter *W_xg_, *W_hg_, *b_g_;
    Parameter *W_xi2_, *W_mi_, *b_i2_;
    Parameter *W_xf2_, *W_mf_, *b_f2_;
    Parameter *W_xg2_, *W_mg_, *b_g2_;
    Parameter *W_xo_, *W_ho_, *W_co_, *W_mo_, *b_o_;
    Parameter* W_out_;
    Parameter *ln_gamma_, *ln_beta_;
};

}  // namespace stdemand
