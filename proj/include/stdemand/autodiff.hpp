#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "stdemand/tensor.hpp"

namespace stdemand {

/// Named trainable tensor with a persistent gradient buffer. Gradients
/// accumulate across backward passes until zero_grad().
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool grad_set = false;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

    void zero_grad() {
        grad.fill(0.0);
        grad_set = false;
    }
};

/// Handle into a Graph's tape.
struct Value {
    int id = -1;
};

namespace detail {

// C[m,n] += A[m,k] * B[k,n]
inline void gemm_acc(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<std::int64_t>(i) * k;
        double* c = C + static_cast<std::int64_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double av = a[p];
            if (av == 0.0) continue;
            const double* b = B + static_cast<std::int64_t>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[m,n] += A[k,m]^T * B[k,n]
inline void gemm_tn_acc(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int p = 0; p < k; ++p) {
        const double* a = A + static_cast<std::int64_t>(p) * m;
        const double* b = B + static_cast<std::int64_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            double av = a[i];
            if (av == 0.0) continue;
            double* c = C + static_cast<std::int64_t>(i) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[m,n] += A[m,k] * B[n,k]^T
inline void gemm_nt_acc(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<std::int64_t>(i) * k;
        double* c = C + static_cast<std::int64_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* b = B + static_cast<std::int64_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[p] * b[p];
            c[j] += acc;
        }
    }
}

struct ConvDims {
    int B, D, H, W, Cin, kd, kh, kw, Cout;
    int pd, ph, pw, sd, sh, sw;
    int Do, Ho, Wo;
    std::int64_t rows() const { return static_cast<std::int64_t>(B) * Do * Ho * Wo; }
    int cols() const { return kd * kh * kw * Cin; }
};

inline ConvDims conv_dims(const Shape& in, const Shape& ker, std::array<int, 3> pad,
                          std::array<int, 3> stride) {
    if (in.rank() != 5) throw ShapeError("conv3d input must be rank 5, got " + in.str());
    if (ker.rank() != 5) throw ShapeError("conv3d kernel must be rank 5, got " + ker.str());
    if (ker[3] != in[4])
        throw ShapeError("conv3d channel mismatch: input " + in.str() + " kernel " + ker.str());
    for (int s : stride)
        if (s < 1) throw ShapeError("conv3d stride must be >= 1");
    ConvDims d{};
    d.B = in[0]; d.D = in[1]; d.H = in[2]; d.W = in[3]; d.Cin = in[4];
    d.kd = ker[0]; d.kh = ker[1]; d.kw = ker[2]; d.Cout = ker[4];
    d.pd = pad[0]; d.ph = pad[1]; d.pw = pad[2];
    d.sd = stride[0]; d.sh = stride[1]; d.sw = stride[2];
    if (d.kd > d.D + 2 * d.pd || d.kh > d.H + 2 * d.ph || d.kw > d.W + 2 * d.pw)
        throw ShapeError("conv3d kernel " + ker.str() + " exceeds padded input " + in.str());
    d.Do = (d.D + 2 * d.pd - d.kd) / d.sd + 1;
    d.Ho = (d.H + 2 * d.ph - d.kh) / d.sh + 1;
    d.Wo = (d.W + 2 * d.pw - d.kw) / d.sw + 1;
    return d;
}

inline void im2col(const double* in, const ConvDims& d, double* col) {
    std::int64_t r = 0;
    for (int b = 0; b < d.B; ++b)
        for (int od = 0; od < d.Do; ++od)
            for (int oh = 0; oh < d.Ho; ++oh)
                for (int ow = 0; ow < d.Wo; ++ow, ++r) {
                    double* dst = col + r * d.cols();
                    std::int64_t c = 0;
                    for (int zd = 0; zd < d.kd; ++zd) {
                        int id = od * d.sd - d.pd + zd;
                        for (int zh = 0; zh < d.kh; ++zh) {
                            int ih = oh * d.sh - d.ph + zh;
                            for (int zw = 0; zw < d.kw; ++zw, c += d.Cin) {
                                int iw = ow * d.sw - d.pw + zw;
                                if (id < 0 || id >= d.D || ih < 0 || ih >= d.H || iw < 0 ||
                                    iw >= d.W) {
                                    for (int ci = 0; ci < d.Cin; ++ci) dst[c + ci] = 0.0;
                                } else {
                                    const double* src =
                                        in + (((static_cast<std::int64_t>(b) * d.D + id) * d.H + ih) *
                                                  d.W + iw) * d.Cin;
                                    for (int ci = 0; ci < d.Cin; ++ci) dst[c + ci] = src[ci];
                                }
                            }
                        }
                    }
                }
}

// scatter-add of a column matrix back onto the input layout
inline void col2im_acc(const double* col, const ConvDims& d, double* in) {
    std::int64_t r = 0;
    for (int b = 0; b < d.B; ++b)
        for (int od = 0; od < d.Do; ++od)
            for (int oh = 0; oh < d.Ho; ++oh)
                for (int ow = 0; ow < d.Wo; ++ow, ++r) {
                    const double* src = col + r * d.cols();
                    std::int64_t c = 0;
                    for (int zd = 0; zd < d.kd; ++zd) {
                        int id = od * d.sd - d.pd + zd;
                        for (int zh = 0; zh < d.kh; ++zh) {
                            int ih = oh * d.sh - d.ph + zh;
                            for (int zw = 0; zw < d.kw; ++zw, c += d.Cin) {
                                int iw = ow * d.sw - d.pw + zw;
                                if (id < 0 || id >= d.D || ih < 0 || ih >= d.H || iw < 0 ||
                                    iw >= d.W)
                                    continue;
                                double* dst =
                                    in + (((static_cast<std::int64_t>(b) * d.D + id) * d.H + ih) *
                                              d.W + iw) * d.Cin;
                                for (int ci = 0; ci < d.Cin; ++ci) dst[ci] += src[c + ci];
                            }
                        }
                    }
                }
}

}  // namespace detail

/// Reverse-mode tape. Single-threaded per training context; records forward
/// operations in order and replays them backwards exactly once.
class Graph {
public:
    Value constant(Tensor t) { return push(std::move(t), nullptr, {}); }

    /// Leaf backed by a Parameter; backward accumulates into p.grad.
    Value leaf(Parameter& p) {
        Parameter* pp = &p;
        Value v = push(p.value, nullptr, {});
        node(v).back = [this, v, pp]() {
            const Tensor& g = node(v).grad;
            for (std::int64_t i = 0; i < g.size(); ++i) pp->grad[i] += g[i];
            pp->grad_set = true;
        };
        return v;
    }

    const Tensor& value(Value v) const { return nodes_[static_cast<size_t>(v.id)].value; }
    const Tensor& grad(Value v) const { return nodes_[static_cast<size_t>(v.id)].grad; }
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // ---- elementwise ----

    Value add(Value a, Value b) {
        check_same(a, b, "add");
        Tensor out = value(a);
        const Tensor& tb = value(b);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] += tb[i];
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, a, b]() {
            const Tensor& g = node(v).grad;
            acc(a, [&](std::int64_t i) { return g[i]; });
            acc(b, [&](std::int64_t i) { return g[i]; });
        };
        return v;
    }

    Value sub(Value a, Value b) {
        check_same(a, b, "sub");
        Tensor out = value(a);
        const Tensor& tb = value(b);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, a, b]() {
            const Tensor& g = node(v).grad;
            acc(a, [&](std::int64_t i) { return g[i]; });
            acc(b, [&](std::int64_t i) { return -g[i]; });
        };
        return v;
    }

    Value mul(Value a, Value b) {
        check_same(a, b, "mul");
        Tensor out = value(a);
        const Tensor& tb = value(b);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, a, b]() {
            const Tensor& g = node(v).grad;
            const Tensor& ta = node(a).value;
            const Tensor& tb2 = node(b).value;
            acc(a, [&](std::int64_t i) { return g[i] * tb2[i]; });
            acc(b, [&](std::int64_t i) { return g[i] * ta[i]; });
        };
        return v;
    }

    Value scale(Value a, double c) {
        Tensor out = value(a);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= c;
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, a, c]() {
            const Tensor& g = node(v).grad;
            acc(a, [&](std::int64_t i) { return g[i] * c; });
        };
        return v;
    }

    Value sigmoid(Value a) {
        Tensor out = value(a);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, a]() {
            const Tensor& g = node(v).grad;
            const Tensor& y = node(v).value;
            acc(a, [&](std::int64_t i) { return g[i] * y[i] * (1.0 - y[i]); });
        };
        return v;
    }

    Value tanh(Value a) {
        Tensor out = value(a);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, a]() {
            const Tensor& g = node(v).grad;
            const Tensor& y = node(v).value;
            acc(a, [&](std::int64_t i) { return g[i] * (1.0 - y[i] * y[i]); });
        };
        return v;
    }

    Value relu(Value a) {
        Tensor out = value(a);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, a]() {
            const Tensor& g = node(v).grad;
            const Tensor& x = node(a).value;
            acc(a, [&](std::int64_t i) { return x[i] > 0.0 ? g[i] : 0.0; });
        };
        return v;
    }

    // ---- reductions ----

    Value sum(Value a) {
        Value v = push(Tensor::scalar(value(a).sum()), nullptr, {});
        node(v).back = [this, v, a]() {
            double g = node(v).grad[0];
            acc(a, [&](std::int64_t) { return g; });
        };
        return v;
    }

    Value mean(Value a) {
        double inv = 1.0 / static_cast<double>(value(a).size());
        Value v = push(Tensor::scalar(value(a).sum() * inv), nullptr, {});
        node(v).back = [this, v, a, inv]() {
            double g = node(v).grad[0] * inv;
            acc(a, [&](std::int64_t) { return g; });
        };
        return v;
    }

    /// Mean of elementwise squared differences.
    Value mse(Value a, Value b) {
        check_same(a, b, "mse");
        return mean(mul(sub(a, b), sub(a, b)));
    }

    // ---- structural ----

    Value reshape(Value a, Shape s) {
        Tensor out = value(a).reshaped(s);
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, a]() {
            const Tensor& g = node(v).grad;
            acc(a, [&](std::int64_t i) { return g[i]; });
        };
        return v;
    }

    /// Concatenate along an axis; all other extents must agree.
    Value concat(const std::vector<Value>& parts, int axis) {
        if (parts.empty()) throw ShapeError("concat of zero tensors");
        const Shape& s0 = value(parts[0]).shape();
        if (axis < 0 || axis >= s0.rank()) throw ShapeError("concat axis out of range");
        std::vector<int> dims = s0.dims();
        int total = 0;
        for (Value p : parts) {
            const Shape& s = value(p).shape();
            if (s.rank() != s0.rank()) throw ShapeError("concat rank mismatch");
            for (int i = 0; i < s.rank(); ++i)
                if (i != axis && s[i] != s0[i])
                    throw ShapeError("concat extent mismatch: " + s.str() + " vs " + s0.str());
            total += s[axis];
        }
        dims[static_cast<size_t>(axis)] = total;
        Shape out_shape(dims);

        std::int64_t outer = 1, inner = 1;
        for (int i = 0; i < axis; ++i) outer *= s0[i];
        for (int i = axis + 1; i < s0.rank(); ++i) inner *= s0[i];

        Tensor out(out_shape);
        std::int64_t row_out = static_cast<std::int64_t>(total) * inner;
        std::int64_t off = 0;
        for (Value p : parts) {
            const Tensor& t = value(p);
            std::int64_t row_in = static_cast<std::int64_t>(t.shape()[axis]) * inner;
            for (std::int64_t o = 0; o < outer; ++o)
                std::copy(t.data() + o * row_in, t.data() + (o + 1) * row_in,
                          out.data() + o * row_out + off);
            off += row_in;
        }

        Value v = push(std::move(out), nullptr, {});
        std::vector<Value> ps = parts;
        node(v).back = [this, v, ps, outer, inner, row_out]() {
            const Tensor& g = node(v).grad;
            std::int64_t off2 = 0;
            for (Value p : ps) {
                Node& np = node(p);
                std::int64_t rin = np.value.size() / outer;
                for (std::int64_t o = 0; o < outer; ++o) {
                    const double* src = g.data() + o * row_out + off2;
                    double* dst = np.grad.data() + o * rin;
                    for (std::int64_t i = 0; i < rin; ++i) dst[i] += src[i];
                }
                off2 += rin;
            }
        };
        return v;
    }

    // ---- linear algebra ----

    Value matmul(Value a, Value b) {
        const Shape& sa = value(a).shape();
        const Shape& sb = value(b).shape();
        if (sa.rank() != 2 || sb.rank() != 2 || sa[1] != sb[0])
            throw ShapeError("matmul shape mismatch: " + sa.str() + " x " + sb.str());
        int m = sa[0], k = sa[1], n = sb[1];
        Tensor out(Shape{m, n});
        detail::gemm_acc(value(a).data(), value(b).data(), out.data(), m, k, n);
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, a, b, m, k, n]() {
            const Tensor& g = node(v).grad;
            // dA += dC * B^T ; dB += A^T * dC
            detail::gemm_nt_acc(g.data(), node(b).value.data(), node(a).grad.data(), m, n, k);
            detail::gemm_tn_acc(node(a).value.data(), g.data(), node(b).grad.data(), k, m, n);
        };
        return v;
    }

    /// A[m,k] * B[n,k]^T -> [m,n]
    Value matmul_nt(Value a, Value b) {
        const Shape& sa = value(a).shape();
        const Shape& sb = value(b).shape();
        if (sa.rank() != 2 || sb.rank() != 2 || sa[1] != sb[1])
            throw ShapeError("matmul_nt shape mismatch: " + sa.str() + " x " + sb.str());
        int m = sa[0], k = sa[1], n = sb[0];
        Tensor out(Shape{m, n});
        detail::gemm_nt_acc(value(a).data(), value(b).data(), out.data(), m, k, n);
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, a, b, m, k, n]() {
            const Tensor& g = node(v).grad;
            // dA += dC * B ; dB += dC^T * A
            detail::gemm_acc(g.data(), node(b).value.data(), node(a).grad.data(), m, n, k);
            detail::gemm_tn_acc(g.data(), node(a).value.data(), node(b).grad.data(), n, m, k);
        };
        return v;
    }

    /// x[m,n] + row vector b[n] broadcast over rows.
    Value add_rowwise(Value x, Value b) {
        const Shape& sx = value(x).shape();
        const Shape& sb = value(b).shape();
        if (sx.rank() != 2 || sb.rank() != 1 || sb[0] != sx[1])
            throw ShapeError("add_rowwise shape mismatch: " + sx.str() + " + " + sb.str());
        int m = sx[0], n = sx[1];
        Tensor out = value(x);
        const Tensor& tb = value(b);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out[static_cast<std::int64_t>(i) * n + j] += tb[j];
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, x, b, m, n]() {
            const Tensor& g = node(v).grad;
            acc(x, [&](std::int64_t i) { return g[i]; });
            Tensor& gb = node(b).grad;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) gb[j] += g[static_cast<std::int64_t>(i) * n + j];
        };
        return v;
    }

    /// Row sums of a [m,n] matrix -> [m].
    Value sum_axis1(Value a) {
        const Shape& s = value(a).shape();
        if (s.rank() != 2) throw ShapeError("sum_axis1 expects rank 2, got " + s.str());
        int m = s[0], n = s[1];
        Tensor out(Shape{m});
        const Tensor& t = value(a);
        for (int i = 0; i < m; ++i) {
            double acc_v = 0.0;
            for (int j = 0; j < n; ++j) acc_v += t[static_cast<std::int64_t>(i) * n + j];
            out[i] = acc_v;
        }
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, a, m, n]() {
            const Tensor& g = node(v).grad;
            Tensor& ga = node(a).grad;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) ga[static_cast<std::int64_t>(i) * n + j] += g[i];
        };
        return v;
    }

    /// Column j of a [m,n] matrix -> [m].
    Value column(Value a, int j) {
        const Shape& s = value(a).shape();
        if (s.rank() != 2 || j < 0 || j >= s[1])
            throw ShapeError("column index out of range for " + s.str());
        int m = s[0], n = s[1];
        Tensor out(Shape{m});
        const Tensor& t = value(a);
        for (int i = 0; i < m; ++i) out[i] = t[static_cast<std::int64_t>(i) * n + j];
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, a, m, n, j]() {
            const Tensor& g = node(v).grad;
            Tensor& ga = node(a).grad;
            for (int i = 0; i < m; ++i) ga[static_cast<std::int64_t>(i) * n + j] += g[i];
        };
        return v;
    }

    /// Scale each row of x[m,n] by s[m].
    Value rowwise_scale(Value x, Value s) {
        const Shape& sx = value(x).shape();
        const Shape& ss = value(s).shape();
        if (sx.rank() != 2 || ss.rank() != 1 || ss[0] != sx[0])
            throw ShapeError("rowwise_scale shape mismatch: " + sx.str() + " * " + ss.str());
        int m = sx[0], n = sx[1];
        Tensor out = value(x);
        const Tensor& ts = value(s);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out[static_cast<std::int64_t>(i) * n + j] *= ts[i];
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, x, s, m, n]() {
            const Tensor& g = node(v).grad;
            const Tensor& tx = node(x).value;
            const Tensor& ts2 = node(s).value;
            Tensor& gx = node(x).grad;
            Tensor& gs = node(s).grad;
            for (int i = 0; i < m; ++i) {
                double acc_v = 0.0;
                for (int j = 0; j < n; ++j) {
                    std::int64_t idx = static_cast<std::int64_t>(i) * n + j;
                    gx[idx] += g[idx] * ts2[i];
                    acc_v += g[idx] * tx[idx];
                }
                gs[i] += acc_v;
            }
        };
        return v;
    }

    // ---- softmax / layer norm / conv ----

    /// Numerically stable softmax along one axis.
    Value softmax(Value a, int axis) {
        const Shape& s = value(a).shape();
        if (axis < 0 || axis >= s.rank()) throw ShapeError("softmax axis out of range");
        std::int64_t outer = 1, inner = 1;
        int len = s[axis];
        for (int i = 0; i < axis; ++i) outer *= s[i];
        for (int i = axis + 1; i < s.rank(); ++i) inner *= s[i];

        Tensor out = value(a);
        for (std::int64_t o = 0; o < outer; ++o)
            for (std::int64_t in = 0; in < inner; ++in) {
                double* base = out.data() + o * len * inner + in;
                double mx = base[0];
                for (int j = 1; j < len; ++j) mx = std::max(mx, base[static_cast<std::int64_t>(j) * inner]);
                double z = 0.0;
                for (int j = 0; j < len; ++j) {
                    double e = std::exp(base[static_cast<std::int64_t>(j) * inner] - mx);
                    base[static_cast<std::int64_t>(j) * inner] = e;
                    z += e;
                }
                for (int j = 0; j < len; ++j) base[static_cast<std::int64_t>(j) * inner] /= z;
            }
        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, a, outer, inner, len]() {
            const Tensor& g = node(v).grad;
            const Tensor& y = node(v).value;
            Tensor& ga = node(a).grad;
            for (std::int64_t o = 0; o < outer; ++o)
                for (std::int64_t in = 0; in < inner; ++in) {
                    std::int64_t base = o * len * inner + in;
                    double dot = 0.0;
                    for (int j = 0; j < len; ++j) {
                        std::int64_t idx = base + static_cast<std::int64_t>(j) * inner;
                        dot += g[idx] * y[idx];
                    }
                    for (int j = 0; j < len; ++j) {
                        std::int64_t idx = base + static_cast<std::int64_t>(j) * inner;
                        ga[idx] += y[idx] * (g[idx] - dot);
                    }
                }
        };
        return v;
    }

    /// Normalizes each sample (axis 0 slice; the whole tensor when rank 1)
    /// to zero mean, unit variance, then applies gamma/beta. gamma and beta
    /// may be scalar, last-axis sized, or full per-sample shaped.
    Value layer_norm(Value x, Value gamma, Value beta, double eps = 1e-5) {
        const Shape& s = value(x).shape();
        std::int64_t batch = s.rank() >= 2 ? s[0] : 1;
        std::int64_t rest = value(x).size() / batch;
        std::int64_t glen = value(gamma).size();
        if (value(beta).size() != glen)
            throw ShapeError("layer_norm gamma/beta size mismatch");
        int last = s[s.rank() - 1];
        if (glen != 1 && glen != last && glen != rest)
            throw ShapeError("layer_norm gamma not broadcastable over normalized axes");

        const Tensor& tx = value(x);
        const Tensor& tg = value(gamma);
        const Tensor& tb = value(beta);
        Tensor out(s);
        Tensor xhat(s);  // cached for backward
        std::vector<double> inv_std(static_cast<size_t>(batch));
        for (std::int64_t b = 0; b < batch; ++b) {
            const double* px = tx.data() + b * rest;
            double mu = 0.0;
            for (std::int64_t i = 0; i < rest; ++i) mu += px[i];
            mu /= static_cast<double>(rest);
            double var = 0.0;
            for (std::int64_t i = 0; i < rest; ++i) var += (px[i] - mu) * (px[i] - mu);
            var /= static_cast<double>(rest);
            double is = 1.0 / std::sqrt(var + eps);
            inv_std[static_cast<size_t>(b)] = is;
            for (std::int64_t i = 0; i < rest; ++i) {
                double xh = (px[i] - mu) * is;
                xhat[b * rest + i] = xh;
                std::int64_t gi = glen == 1 ? 0 : (glen == rest ? i : i % last);
                out[b * rest + i] = tg[gi] * xh + tb[gi];
            }
        }
        Value v = push(std::move(out), nullptr, {});
        auto xh_ptr = std::make_shared<Tensor>(std::move(xhat));
        auto is_ptr = std::make_shared<std::vector<double>>(std::move(inv_std));
        node(v).back = [this, v, x, gamma, beta, batch, rest, glen, last, xh_ptr, is_ptr]() {
            const Tensor& g = node(v).grad;
            const Tensor& tg = node(gamma).value;
            Tensor& gx = node(x).grad;
            Tensor& gg = node(gamma).grad;
            Tensor& gb = node(beta).grad;
            const Tensor& xh = *xh_ptr;
            for (std::int64_t b = 0; b < batch; ++b) {
                double is = (*is_ptr)[static_cast<size_t>(b)];
                double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                for (std::int64_t i = 0; i < rest; ++i) {
                    std::int64_t idx = b * rest + i;
                    std::int64_t gi = glen == 1 ? 0 : (glen == rest ? i : i % last);
                    double dxh = g[idx] * tg[gi];
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * xh[idx];
                    gg[gi] += g[idx] * xh[idx];
                    gb[gi] += g[idx];
                }
                double n = static_cast<double>(rest);
                for (std::int64_t i = 0; i < rest; ++i) {
                    std::int64_t idx = b * rest + i;
                    std::int64_t gi = glen == 1 ? 0 : (glen == rest ? i : i % last);
                    double dxh = g[idx] * tg[gi];
                    gx[idx] += is * (dxh - sum_dxh / n - xh[idx] * sum_dxh_xh / n);
                }
            }
        };
        return v;
    }

    /// 3D convolution over [B,D,H,W,Cin] with kernel [kd,kh,kw,Cin,Cout] and
    /// bias [Cout]; im2col + matmul fast path, recomputing the column matrix
    /// in backward instead of caching it.
    Value conv3d(Value input, Value kernel, Value bias, std::array<int, 3> pad = {1, 1, 1},
                 std::array<int, 3> stride = {1, 1, 1}) {
        detail::ConvDims d = detail::conv_dims(value(input).shape(), value(kernel).shape(), pad, stride);
        if (value(bias).shape().rank() != 1 || value(bias).shape()[0] != d.Cout)
            throw ShapeError("conv3d bias must be rank 1 of size Cout, got " +
                             value(bias).shape().str());

        std::int64_t rows = d.rows();
        int cols = d.cols();
        std::vector<double> col(static_cast<size_t>(rows * cols));
        detail::im2col(value(input).data(), d, col.data());

        Tensor out(Shape{d.B, d.Do, d.Ho, d.Wo, d.Cout});
        const Tensor& tb = value(bias);
        for (std::int64_t r = 0; r < rows; ++r)
            for (int c = 0; c < d.Cout; ++c) out[r * d.Cout + c] = tb[c];
        detail::gemm_acc(col.data(), value(kernel).data(), out.data(), static_cast<int>(rows),
                         cols, d.Cout);

        Value v = push(std::move(out), nullptr, {});
        node(v).back = [this, v, input, kernel, bias, d]() {
            const Tensor& g = node(v).grad;
            std::int64_t rows2 = d.rows();
            int cols2 = d.cols();
            // bias grad: per-channel column sums
            Tensor& gb = node(bias).grad;
            for (std::int64_t r = 0; r < rows2; ++r)
                for (int c = 0; c < d.Cout; ++c) gb[c] += g[r * d.Cout + c];
            // kernel grad: col^T * dOut
            std::vector<double> col2(static_cast<size_t>(rows2 * cols2));
            detail::im2col(node(input).value.data(), d, col2.data());
            detail::gemm_tn_acc(col2.data(), g.data(), node(kernel).grad.data(), cols2,
                                static_cast<int>(rows2), d.Cout);
            // input grad: col2im(dOut * kernel^T)
            std::vector<double> dcol(static_cast<size_t>(rows2 * cols2), 0.0);
            detail::gemm_nt_acc(g.data(), node(kernel).value.data(), dcol.data(),
                                static_cast<int>(rows2), d.Cout, cols2);
            detail::col2im_acc(dcol.data(), d, node(input).grad.data());
        };
        return v;
    }

    /// Reverse pass from a scalar loss.
    void backward(Value loss) {
        Node& ln = node(loss);
        if (ln.value.size() != 1)
            throw ShapeError("backward requires a scalar loss, got shape " + ln.value.shape().str());
        ln.grad[0] = 1.0;
        for (std::int64_t i = loss.id; i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (n.back) n.back();
        }
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void()> back;
    };

    Node& node(Value v) { return nodes_[static_cast<size_t>(v.id)]; }

    Value push(Tensor t, void*, std::initializer_list<int>) {
        Node n;
        n.grad = Tensor(t.shape());
        n.value = std::move(t);
        nodes_.push_back(std::move(n));
        return Value{static_cast<int>(nodes_.size()) - 1};
    }

    void check_same(Value a, Value b, const char* op) {
        if (value(a).shape() != value(b).shape())
            throw ShapeError(std::string(op) + " shape mismatch: " + value(a).shape().str() +
                             " vs " + value(b).shape().str());
    }

    template <typename F>
    void acc(Value a, F f) {
        Tensor& g = node(a).grad;
        for (std::int64_t i = 0; i < g.size(); ++i) g[i] += f(i);
    }

    std::vector<Node> nodes_;
};

}  // namespace stdemand
