#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stdemand {

/// Thrown on any tensor shape violation; the message names the offending extents.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<int> d) : dims_(d) { validate(); }
    explicit Shape(std::vector<int> d) : dims_(std::move(d)) { validate(); }

    int rank() const { return static_cast<int>(dims_.size()); }
    int operator[](int i) const { return dims_.at(static_cast<size_t>(i)); }
    const std::vector<int>& dims() const { return dims_; }

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int d : dims_) n *= d;
        return n;
    }

    bool operator==(const Shape& o) const { return dims_ == o.dims_; }
    bool operator!=(const Shape& o) const { return dims_ != o.dims_; }

    std::string str() const {
        std::ostringstream os;
        os << '(';
        for (size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
        os << ')';
        return os.str();
    }

private:
    void validate() const {
        for (int d : dims_)
            if (d < 1) throw ShapeError("non-positive extent in shape " + str());
    }
    std::vector<int> dims_;
};

/// Dense row-major tensor of 64-bit floats.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0)
        : shape_(std::move(s)), data_(static_cast<size_t>(shape_.numel()), fill) {}
    Tensor(Shape s, std::vector<double> values) : shape_(std::move(s)), data_(std::move(values)) {
        if (static_cast<std::int64_t>(data_.size()) != shape_.numel())
            throw ShapeError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_.str());
    }

    static Tensor scalar(double v) { return Tensor(Shape{1}, {v}); }

    const Shape& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

    double& at(std::initializer_list<int> idx) { return data_[static_cast<size_t>(offset(idx))]; }
    double at(std::initializer_list<int> idx) const { return data_[static_cast<size_t>(offset(idx))]; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(Shape s) const {
        if (s.numel() != shape_.numel())
            throw ShapeError("cannot reshape " + shape_.str() + " to " + s.str());
        return Tensor(std::move(s), data_);
    }

    double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

private:
    std::int64_t offset(std::initializer_list<int> idx) const {
        if (static_cast<int>(idx.size()) != shape_.rank())
            throw ShapeError("index rank mismatch for shape " + shape_.str());
        std::int64_t off = 0;
        int axis = 0;
        for (int i : idx) {
            off = off * shape_[axis] + i;
            ++axis;
        }
        return off;
    }

    Shape shape_;
    std::vector<double> data_;
};

/// Deterministic generator used everywhere randomness is needed.
/// splitmix64-seeded xoshiro-style mix; output is identical across platforms,
/// unlike the stdlib distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::int64_t uniform_int(std::int64_t n) {
        return static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(n));
    }

    /// Knuth's product method; fine for the small means used here.
    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        double limit = std::exp(-mean);
        double prod = 1.0;
        int k = 0;
        do {
            ++k;
            prod *= uniform();
        } while (prod > limit);
        return k - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i)
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(uniform_int(i + 1))]);
    }

    /// Derive an independent stream, e.g. per sweep configuration.
    Rng fork(std::uint64_t stream) const { return Rng(state_ ^ (0x517cc1b727220a95ULL * (stream + 1))); }

private:
    std::uint64_t state_;
};

}  // namespace stdemand
