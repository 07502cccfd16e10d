#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "stdemand/autodiff.hpp"
#include "stdemand/tensor.hpp"

namespace stdemand {

/// Ordered collection of named parameters; order is registration order and
/// fixed for the lifetime of the set, so checkpoints and optimizer state
/// line up by index.
class ParameterSet {
public:
    Parameter& add(const std::string& name, Tensor init) {
        if (index_.count(name)) throw std::runtime_error("duplicate parameter name: " + name);
        params_.push_back(std::make_unique<Parameter>(name, std::move(init)));
        index_[name] = params_.size() - 1;
        return *params_.back();
    }

    Parameter& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::runtime_error("unknown parameter: " + name);
        return *params_[it->second];
    }
    const Parameter& get(const std::string& name) const {
        return const_cast<ParameterSet*>(this)->get(name);
    }
    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    size_t size() const { return params_.size(); }
    Parameter& operator[](size_t i) { return *params_[i]; }
    const Parameter& operator[](size_t i) const { return *params_[i]; }

    void zero_grad() {
        for (auto& p : params_) p->zero_grad();
    }

    void scale_grads(double c) {
        for (auto& p : params_)
            for (std::int64_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= c;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(params_.size());
        for (auto& p : params_) out.push_back(p->name);
        return out;
    }

    /// Deep copy of values only (grads reset).
    std::vector<Tensor> snapshot() const {
        std::vector<Tensor> out;
        out.reserve(params_.size());
        for (auto& p : params_) out.push_back(p->value);
        return out;
    }

    void restore(const std::vector<Tensor>& snap) {
        if (snap.size() != params_.size())
            throw std::runtime_error("snapshot size mismatch");
        for (size_t i = 0; i < snap.size(); ++i) params_[i]->value = snap[i];
    }

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::map<std::string, size_t> index_;
};

/// Uniform in +-sqrt(1/fan_in).
inline Tensor uniform_init(Shape s, int fan_in, Rng& rng) {
    double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Tensor t(s);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

struct OptimizerConfig {
    std::string kind = "adam";  // "adam" | "sgd"
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Optimizer {
public:
    Optimizer(ParameterSet& params, OptimizerConfig cfg = {}) : params_(params), cfg_(std::move(cfg)) {
        if (cfg_.kind != "adam" && cfg_.kind != "sgd")
            throw std::runtime_error("unknown optimizer kind: " + cfg_.kind);
        if (cfg_.kind == "adam") {
            m_.resize(params_.size());
            v_.resize(params_.size());
            for (size_t i = 0; i < params_.size(); ++i) {
                m_[i] = Tensor(params_[i].value.shape());
                v_[i] = Tensor(params_[i].value.shape());
            }
        }
    }

    /// In-place update from accumulated gradients; rejects parameters whose
    /// gradient was never populated.
    void step() {
        for (size_t i = 0; i < params_.size(); ++i)
            if (!params_[i].grad_set)
                throw std::runtime_error("optimizer_step: gradient missing for parameter " +
                                         params_[i].name);
        if (cfg_.kind == "sgd") {
            for (size_t i = 0; i < params_.size(); ++i) {
                Parameter& p = params_[i];
                for (std::int64_t j = 0; j < p.value.size(); ++j)
                    p.value[j] -= cfg_.lr * p.grad[j];
            }
            return;
        }
        ++t_;
        double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (size_t i = 0; i < params_.size(); ++i) {
            Parameter& p = params_[i];
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            for (std::int64_t j = 0; j < p.value.size(); ++j) {
                double g = p.grad[j];
                m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
                v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
                double mhat = m[j] / bc1;
                double vhat = v[j] / bc2;
                p.value[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    int steps_taken() const { return t_; }

private:
    ParameterSet& params_;
    OptimizerConfig cfg_;
    int t_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace stdemand
