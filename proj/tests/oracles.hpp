// Independent reference implementations used only by tests. These stay
// deliberately naive (explicit loops, no reshaping or im2col) so they share
// no code path with the library.
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "stdemand/autodiff.hpp"
#include "stdemand/optimizer.hpp"
#include "stdemand/tensor.hpp"

namespace oracles {

using stdemand::Graph;
using stdemand::Parameter;
using stdemand::ParameterSet;
using stdemand::Rng;
using stdemand::Shape;
using stdemand::Tensor;
using stdemand::Value;

/// Six-nested-loop 3D convolution.
inline Tensor conv3d_naive(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                           std::array<int, 3> pad = {1, 1, 1},
                           std::array<int, 3> stride = {1, 1, 1}) {
    const Shape& is = input.shape();
    const Shape& ks = kernel.shape();
    int B = is[0], D = is[1], H = is[2], W = is[3], Cin = is[4];
    int kd = ks[0], kh = ks[1], kw = ks[2], Cout = ks[4];
    int Do = (D + 2 * pad[0] - kd) / stride[0] + 1;
    int Ho = (H + 2 * pad[1] - kh) / stride[1] + 1;
    int Wo = (W + 2 * pad[2] - kw) / stride[2] + 1;
    Tensor out(Shape{B, Do, Ho, Wo, Cout});
    for (int b = 0; b < B; ++b)
        for (int od = 0; od < Do; ++od)
            for (int oh = 0; oh < Ho; ++oh)
                for (int ow = 0; ow < Wo; ++ow)
                    for (int co = 0; co < Cout; ++co) {
                        double acc = bias[co];
                        for (int zd = 0; zd < kd; ++zd)
                            for (int zh = 0; zh < kh; ++zh)
                                for (int zw = 0; zw < kw; ++zw)
                                    for (int ci = 0; ci < Cin; ++ci) {
                                        int id = od * stride[0] - pad[0] + zd;
                                        int ih = oh * stride[1] - pad[1] + zh;
                                        int iw = ow * stride[2] - pad[2] + zw;
                                        if (id < 0 || id >= D || ih < 0 || ih >= H || iw < 0 ||
                                            iw >= W)
                                            continue;
                                        acc += input.at({b, id, ih, iw, ci}) *
                                               kernel.at({zd, zh, zw, ci, co});
                                    }
                        out.at({b, od, oh, ow, co}) = acc;
                    }
    return out;
}

/// Brute-force recall attention: for every spatial position, softmax of the
/// gate/memory dot products over the history, then the weighted memory sum.
inline Tensor recall_naive(const Tensor& gate, const std::vector<Tensor>& history) {
    const Shape& s = gate.shape();
    int ch = s[s.rank() - 1];
    std::int64_t positions = gate.size() / ch;
    size_t m = history.size();
    Tensor out(s);
    for (std::int64_t p = 0; p < positions; ++p) {
        std::vector<double> scores(m);
        for (size_t k = 0; k < m; ++k) {
            double dot = 0.0;
            for (int c = 0; c < ch; ++c) dot += gate[p * ch + c] * history[k][p * ch + c];
            scores[k] = dot;
        }
        double mx = scores[0];
        for (double v : scores) mx = std::max(mx, v);
        double z = 0.0;
        for (size_t k = 0; k < m; ++k) {
            scores[k] = std::exp(scores[k] - mx);
            z += scores[k];
        }
        for (int c = 0; c < ch; ++c) {
            double acc = 0.0;
            for (size_t k = 0; k < m; ++k) acc += scores[k] / z * history[k][p * ch + c];
            out[p * ch + c] = acc;
        }
    }
    return out;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Builds the scalar, backpropagates it, then compares analytic grads to
/// central differences. `build` must record the full forward pass on the
/// supplied graph from the current parameter values.
inline double grad_check_full(ParameterSet& ps,
                              const std::function<Value(Graph&)>& build,
                              double step = 1e-5) {
    ps.zero_grad();
    {
        Graph g;
        Value loss = build(g);
        g.backward(loss);
    }
    auto eval = [&]() {
        Graph g;
        return g.value(build(g))[0];
    };
    double worst = 0.0;
    for (size_t pi = 0; pi < ps.size(); ++pi) {
        Parameter& p = ps[pi];
        for (std::int64_t i = 0; i < p.value.size(); ++i) {
            double saved = p.value[i];
            p.value[i] = saved + step;
            double up = eval();
            p.value[i] = saved - step;
            double down = eval();
            p.value[i] = saved;
            double numeric = (up - down) / (2.0 * step);
            worst = std::max(worst, rel_err(numeric, p.grad[i]));
        }
    }
    return worst;
}

inline Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(s));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

}  // namespace oracles
