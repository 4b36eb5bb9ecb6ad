// Dense 64-bit float tensors and the persistent parameter store that the
// autodiff tape and the optimizer operate on.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace m2v {

using Extents = std::vector<std::size_t>;

inline std::size_t numel(const Extents& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

inline std::string shape_str(const Extents& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// Values in row-major order; grad is allocated only where gradients are
// tracked (parameters always, graph nodes during backward).
struct Tensor {
    Extents shape;
    std::vector<double> values;
    std::vector<double> grad;

    Tensor() = default;
    explicit Tensor(Extents s) : shape(std::move(s)), values(numel(shape), 0.0) {}
    Tensor(Extents s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
        if (values.size() != numel(shape)) {
            throw std::invalid_argument("Tensor: " + std::to_string(values.size()) +
                                        " values for shape " + shape_str(shape));
        }
    }

    std::size_t size() const { return values.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    bool is_scalar() const { return shape.size() == 1 && shape[0] == 1; }
    bool is_vector() const { return shape.size() == 1; }
    bool is_matrix() const { return shape.size() == 2; }

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
    void zero_grad() { grad.assign(values.size(), 0.0); }

    bool all_finite() const {
        for (double v : values) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

enum class Init { Zeros, Constant, Uniform, Xavier };

struct InitSpec {
    Init kind = Init::Zeros;
    double value = 0.0;  // Constant: fill value; Uniform: half-width

    static InitSpec zeros() { return {Init::Zeros, 0.0}; }
    static InitSpec constant(double v) { return {Init::Constant, v}; }
    static InitSpec uniform(double half_width) { return {Init::Uniform, half_width}; }
    static InitSpec xavier() { return {Init::Xavier, 0.0}; }
};

// Xavier/Glorot uniform bound. For matrices fan_in = cols, fan_out = rows;
// vectors are treated as [n, 1].
inline double xavier_bound(const Extents& shape) {
    double fan_out = static_cast<double>(shape[0]);
    double fan_in = shape.size() > 1 ? static_cast<double>(shape[1]) : 1.0;
    return std::sqrt(6.0 / (fan_in + fan_out));
}

inline void init_values(Tensor& t, const InitSpec& init, std::mt19937_64& rng) {
    switch (init.kind) {
        case Init::Zeros:
            std::fill(t.values.begin(), t.values.end(), 0.0);
            break;
        case Init::Constant:
            std::fill(t.values.begin(), t.values.end(), init.value);
            break;
        case Init::Uniform: {
            std::uniform_real_distribution<double> d(-init.value, init.value);
            for (double& v : t.values) v = d(rng);
            break;
        }
        case Init::Xavier: {
            double b = xavier_bound(t.shape);
            std::uniform_real_distribution<double> d(-b, b);
            for (double& v : t.values) v = d(rng);
            break;
        }
    }
}

struct Parameter {
    std::string name;
    Tensor tensor;
};

// Named, creation-ordered collection of trainable tensors. Creation order is
// the iteration order everywhere (initialization draws, Adam updates,
// serialization), which keeps runs with the same seed bitwise reproducible.
class ParameterStore {
  public:
    using Ref = std::uint32_t;

    Ref add(const std::string& name, Extents shape, InitSpec init, std::mt19937_64& rng) {
        if (index_.count(name) > 0) {
            throw std::invalid_argument("create_parameter: duplicate name '" + name + "'");
        }
        if (shape.empty()) {
            throw std::invalid_argument("create_parameter: empty shape for '" + name + "'");
        }
        for (std::size_t e : shape) {
            if (e == 0) {
                throw std::invalid_argument("create_parameter: zero extent in shape " +
                                            shape_str(shape) + " for '" + name + "'");
            }
        }
        Parameter p;
        p.name = name;
        p.tensor = Tensor(std::move(shape));
        init_values(p.tensor, init, rng);
        p.tensor.ensure_grad();
        Ref ref = static_cast<Ref>(params_.size());
        index_[name] = ref;
        params_.push_back(std::move(p));
        return ref;
    }

    Parameter& operator[](Ref ref) { return params_[ref]; }
    const Parameter& operator[](Ref ref) const { return params_[ref]; }

    Ref find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) {
            throw std::invalid_argument("parameter store: no parameter named '" + name + "'");
        }
        return it->second;
    }
    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    std::size_t size() const { return params_.size(); }
    std::size_t total_values() const {
        std::size_t n = 0;
        for (const Parameter& p : params_) n += p.tensor.size();
        return n;
    }

    void zero_grads() {
        for (Parameter& p : params_) p.tensor.zero_grad();
    }

    std::vector<std::vector<double>> snapshot_values() const {
        std::vector<std::vector<double>> snap;
        snap.reserve(params_.size());
        for (const Parameter& p : params_) snap.push_back(p.tensor.values);
        return snap;
    }
    void restore_values(const std::vector<std::vector<double>>& snap) {
        if (snap.size() != params_.size()) {
            throw std::invalid_argument("parameter store: snapshot size mismatch");
        }
        for (std::size_t i = 0; i < snap.size(); ++i) params_[i].tensor.values = snap[i];
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

  private:
    std::vector<Parameter> params_;
    std::map<std::string, Ref> index_;
};

}  // namespace m2v
