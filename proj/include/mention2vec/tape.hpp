// Reverse-mode automatic differentiation over a flat tape of nodes.
//
// A Graph is built per sentence: expressions are evaluated eagerly as nodes
// are appended, and backward() walks the tape in reverse creation order.
// Parameter gradients accumulate into the ParameterStore until the caller
// zeroes them, so one graph per SGD step is the intended usage.
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mention2vec/tensor.hpp"

namespace m2v {

enum class Op : std::uint8_t {
    Input,
    Parameter,
    Affine,
    Concat,
    Add,
    Sub,
    MultiplyElementwise,
    Tanh,
    Sigmoid,
    Relu,
    LogSoftmax,
    LogSumExp,
    PickIndex,
    Dropout,
};

struct Expr {
    std::uint32_t index = 0;
};

class Graph {
  public:
    // rng drives dropout masks; it may be null when training is false.
    Graph(ParameterStore& params, std::mt19937_64* rng = nullptr, bool training = false)
        : params_(params), rng_(rng), training_(training) {
        param_nodes_.assign(params.size(), kNoNode);
    }

    bool training() const { return training_; }
    std::size_t num_nodes() const { return nodes_.size(); }

    const Tensor& value(Expr e) const { return nodes_[e.index].out; }
    double scalar(Expr e) const {
        const Tensor& t = value(e);
        if (!t.is_scalar()) {
            throw std::invalid_argument("scalar: node has shape " + shape_str(t.shape));
        }
        return t.values[0];
    }
    std::span<const double> grad_of(Expr e) const {
        const Tensor& t = nodes_[e.index].out;
        return {t.grad.data(), t.grad.size()};
    }

    Expr input(Extents shape, std::vector<double> values) {
        Node n(Op::Input);
        n.out = Tensor(std::move(shape), std::move(values));
        return push(std::move(n));
    }
    Expr constant(double v) { return input({1}, {v}); }

    // One node per distinct parameter per graph; repeated uses share it so
    // gradient accumulation happens naturally on the tape.
    Expr parameter(ParameterStore::Ref ref) {
        if (param_nodes_[ref] != kNoNode) return Expr{param_nodes_[ref]};
        Node n(Op::Parameter);
        n.param = ref;
        n.out = Tensor(params_[ref].tensor.shape, params_[ref].tensor.values);
        Expr e = push(std::move(n));
        param_nodes_[ref] = e.index;
        return e;
    }

    // y = W x + b with W:[m,n], x:[n], b:[m].
    Expr affine(Expr W, Expr x, Expr b) {
        const Tensor& tw = value(W);
        const Tensor& tx = value(x);
        const Tensor& tb = value(b);
        if (!tw.is_matrix() || !tx.is_vector() || !tb.is_vector() ||
            tw.cols() != tx.shape[0] || tw.rows() != tb.shape[0]) {
            throw std::invalid_argument("affine: incompatible shapes W" + shape_str(tw.shape) +
                                        " x" + shape_str(tx.shape) + " b" + shape_str(tb.shape));
        }
        Node n(Op::Affine, {W.index, x.index, b.index});
        std::size_t m = tw.rows(), k = tw.cols();
        n.out = Tensor({m});
        for (std::size_t r = 0; r < m; ++r) {
            double acc = tb.values[r];
            const double* wrow = &tw.values[r * k];
            for (std::size_t c = 0; c < k; ++c) acc += wrow[c] * tx.values[c];
            n.out.values[r] = acc;
        }
        return push(std::move(n));
    }

    Expr concat(std::span<const Expr> parts) {
        if (parts.empty()) throw std::invalid_argument("concat: no inputs");
        Node n(Op::Concat);
        std::size_t total = 0;
        for (Expr p : parts) {
            const Tensor& t = value(p);
            if (!t.is_vector()) {
                throw std::invalid_argument("concat: non-vector input of shape " +
                                            shape_str(t.shape));
            }
            n.inputs.push_back(p.index);
            total += t.shape[0];
        }
        n.out = Tensor({total});
        std::size_t off = 0;
        for (Expr p : parts) {
            const Tensor& t = value(p);
            std::copy(t.values.begin(), t.values.end(), n.out.values.begin() + off);
            off += t.shape[0];
        }
        return push(std::move(n));
    }
    Expr concat(std::initializer_list<Expr> parts) {
        return concat(std::span<const Expr>(parts.begin(), parts.size()));
    }

    Expr add(Expr a, Expr b) { return binary(Op::Add, a, b); }
    Expr sub(Expr a, Expr b) { return binary(Op::Sub, a, b); }
    Expr cmul(Expr a, Expr b) { return binary(Op::MultiplyElementwise, a, b); }

    Expr tanh(Expr x) { return unary(Op::Tanh, x); }
    Expr sigmoid(Expr x) { return unary(Op::Sigmoid, x); }
    Expr relu(Expr x) { return unary(Op::Relu, x); }

    Expr log_softmax(Expr x) {
        const Tensor& t = value(x);
        if (!t.is_vector()) {
            throw std::invalid_argument("log_softmax: expects a vector, got " +
                                        shape_str(t.shape));
        }
        Node n(Op::LogSoftmax, {x.index});
        n.out = Tensor({t.shape[0]});
        double z = logsumexp_values(t.values);
        for (std::size_t i = 0; i < t.size(); ++i) n.out.values[i] = t.values[i] - z;
        return push(std::move(n));
    }

    Expr logsumexp(Expr x) {
        const Tensor& t = value(x);
        if (!t.is_vector()) {
            throw std::invalid_argument("logsumexp: expects a vector, got " +
                                        shape_str(t.shape));
        }
        Node n(Op::LogSumExp, {x.index});
        n.out = Tensor({1});
        n.out.values[0] = logsumexp_values(t.values);
        return push(std::move(n));
    }

    // Matrix input: row `index` as a vector (embedding/transition lookup).
    // Vector input: entry `index` as a scalar.
    Expr pick(Expr x, std::size_t index) {
        const Tensor& t = value(x);
        Node n(Op::PickIndex, {x.index});
        n.pick = index;
        if (t.is_matrix()) {
            if (index >= t.rows()) {
                throw std::out_of_range("pick: row " + std::to_string(index) +
                                        " out of range for " + shape_str(t.shape));
            }
            std::size_t k = t.cols();
            n.out = Tensor({k});
            std::copy_n(t.values.begin() + index * k, k, n.out.values.begin());
        } else if (t.is_vector()) {
            if (index >= t.shape[0]) {
                throw std::out_of_range("pick: index " + std::to_string(index) +
                                        " out of range for " + shape_str(t.shape));
            }
            n.out = Tensor({1});
            n.out.values[0] = t.values[index];
        } else {
            throw std::invalid_argument("pick: unsupported shape " + shape_str(t.shape));
        }
        return push(std::move(n));
    }

    // Inverted dropout: identity at inference time and for rate 0.
    Expr dropout(Expr x, double rate) {
        if (rate < 0.0 || rate >= 1.0) {
            throw std::invalid_argument("dropout: rate " + std::to_string(rate) +
                                        " outside [0,1)");
        }
        if (!training_ || rate == 0.0) return x;
        if (rng_ == nullptr) throw std::logic_error("dropout: no rng bound to training graph");
        const Tensor& t = value(x);
        Node n(Op::Dropout, {x.index});
        n.rate = rate;
        n.mask.resize(t.size());
        n.out = Tensor(t.shape);
        std::bernoulli_distribution keep(1.0 - rate);
        double scale = 1.0 / (1.0 - rate);
        for (std::size_t i = 0; i < t.size(); ++i) {
            n.mask[i] = keep(*rng_) ? 1 : 0;
            n.out.values[i] = n.mask[i] ? t.values[i] * scale : 0.0;
        }
        return push(std::move(n));
    }

    // d(loss)/d(node) for every node, accumulated into parameter grads.
    void backward(Expr loss) {
        Tensor& lt = nodes_[loss.index].out;
        if (!lt.is_scalar()) {
            throw std::invalid_argument("backward: loss has shape " + shape_str(lt.shape) +
                                        ", expected [1]");
        }
        for (Node& n : nodes_) n.out.ensure_grad();
        nodes_[loss.index].out.grad[0] = 1.0;
        for (std::size_t ni = loss.index + 1; ni-- > 0;) {
            backward_node(nodes_[ni]);
        }
    }

    // Sign pattern of every relu input; used by gradient checks to detect
    // kink crossings between perturbed evaluations.
    std::vector<bool> relu_signature() const {
        std::vector<bool> sig;
        for (const Node& n : nodes_) {
            if (n.op != Op::Relu) continue;
            const Tensor& in = nodes_[n.inputs[0]].out;
            for (double v : in.values) sig.push_back(v > 0.0);
        }
        return sig;
    }

  private:
    static constexpr std::uint32_t kNoNode = std::numeric_limits<std::uint32_t>::max();

    struct Node {
        explicit Node(Op o) : op(o) {}
        Node(Op o, std::initializer_list<std::uint32_t> in) : op(o), inputs(in) {}
        Op op;
        std::vector<std::uint32_t> inputs;
        Tensor out;
        ParameterStore::Ref param = 0;
        std::size_t pick = 0;
        double rate = 0.0;
        std::vector<std::uint8_t> mask;
    };

    Expr push(Node&& n) {
        nodes_.push_back(std::move(n));
        return Expr{static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    Expr binary(Op op, Expr a, Expr b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        if (ta.shape != tb.shape) {
            throw std::invalid_argument(op_name(op) + ": shape mismatch " + shape_str(ta.shape) +
                                        " vs " + shape_str(tb.shape));
        }
        Node n(op, {a.index, b.index});
        n.out = Tensor(ta.shape);
        switch (op) {
            case Op::Add:
                for (std::size_t i = 0; i < ta.size(); ++i)
                    n.out.values[i] = ta.values[i] + tb.values[i];
                break;
            case Op::Sub:
                for (std::size_t i = 0; i < ta.size(); ++i)
                    n.out.values[i] = ta.values[i] - tb.values[i];
                break;
            case Op::MultiplyElementwise:
                for (std::size_t i = 0; i < ta.size(); ++i)
                    n.out.values[i] = ta.values[i] * tb.values[i];
                break;
            default:
                throw std::logic_error("binary: bad op");
        }
        return push(std::move(n));
    }

    Expr unary(Op op, Expr x) {
        const Tensor& t = value(x);
        Node n(op, {x.index});
        n.out = Tensor(t.shape);
        switch (op) {
            case Op::Tanh:
                for (std::size_t i = 0; i < t.size(); ++i)
                    n.out.values[i] = std::tanh(t.values[i]);
                break;
            case Op::Sigmoid:
                for (std::size_t i = 0; i < t.size(); ++i)
                    n.out.values[i] = 1.0 / (1.0 + std::exp(-t.values[i]));
                break;
            case Op::Relu:
                for (std::size_t i = 0; i < t.size(); ++i)
                    n.out.values[i] = t.values[i] > 0.0 ? t.values[i] : 0.0;
                break;
            default:
                throw std::logic_error("unary: bad op");
        }
        return push(std::move(n));
    }

    static double logsumexp_values(const std::vector<double>& v) {
        double m = *std::max_element(v.begin(), v.end());
        double s = 0.0;
        for (double x : v) s += std::exp(x - m);
        return m + std::log(s);
    }

    static std::string op_name(Op op) {
        switch (op) {
            case Op::Add: return "add";
            case Op::Sub: return "sub";
            case Op::MultiplyElementwise: return "multiply_elementwise";
            default: return "op";
        }
    }

    void backward_node(Node& n) {
        const std::vector<double>& g = n.out.grad;
        switch (n.op) {
            case Op::Input:
                break;
            case Op::Parameter: {
                Tensor& p = params_[n.param].tensor;
                p.ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
                break;
            }
            case Op::Affine: {
                Tensor& tw = nodes_[n.inputs[0]].out;
                Tensor& tx = nodes_[n.inputs[1]].out;
                Tensor& tb = nodes_[n.inputs[2]].out;
                std::size_t m = tw.rows(), k = tw.cols();
                for (std::size_t r = 0; r < m; ++r) {
                    double gr = g[r];
                    if (gr == 0.0) continue;
                    double* gwrow = &tw.grad[r * k];
                    const double* wrow = &tw.values[r * k];
                    for (std::size_t c = 0; c < k; ++c) {
                        gwrow[c] += gr * tx.values[c];
                        tx.grad[c] += gr * wrow[c];
                    }
                    tb.grad[r] += gr;
                }
                break;
            }
            case Op::Concat: {
                std::size_t off = 0;
                for (std::uint32_t in : n.inputs) {
                    Tensor& t = nodes_[in].out;
                    for (std::size_t i = 0; i < t.size(); ++i) t.grad[i] += g[off + i];
                    off += t.size();
                }
                break;
            }
            case Op::Add: {
                Tensor& a = nodes_[n.inputs[0]].out;
                Tensor& b = nodes_[n.inputs[1]].out;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    a.grad[i] += g[i];
                    b.grad[i] += g[i];
                }
                break;
            }
            case Op::Sub: {
                Tensor& a = nodes_[n.inputs[0]].out;
                Tensor& b = nodes_[n.inputs[1]].out;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    a.grad[i] += g[i];
                    b.grad[i] -= g[i];
                }
                break;
            }
            case Op::MultiplyElementwise: {
                Tensor& a = nodes_[n.inputs[0]].out;
                Tensor& b = nodes_[n.inputs[1]].out;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    a.grad[i] += g[i] * b.values[i];
                    b.grad[i] += g[i] * a.values[i];
                }
                break;
            }
            case Op::Tanh: {
                Tensor& x = nodes_[n.inputs[0]].out;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    double y = n.out.values[i];
                    x.grad[i] += g[i] * (1.0 - y * y);
                }
                break;
            }
            case Op::Sigmoid: {
                Tensor& x = nodes_[n.inputs[0]].out;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    double y = n.out.values[i];
                    x.grad[i] += g[i] * y * (1.0 - y);
                }
                break;
            }
            case Op::Relu: {
                Tensor& x = nodes_[n.inputs[0]].out;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (x.values[i] > 0.0) x.grad[i] += g[i];
                }
                break;
            }
            case Op::LogSoftmax: {
                Tensor& x = nodes_[n.inputs[0]].out;
                double gsum = 0.0;
                for (double gv : g) gsum += gv;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    x.grad[i] += g[i] - std::exp(n.out.values[i]) * gsum;
                }
                break;
            }
            case Op::LogSumExp: {
                Tensor& x = nodes_[n.inputs[0]].out;
                double z = n.out.values[0];
                for (std::size_t i = 0; i < x.size(); ++i) {
                    x.grad[i] += g[0] * std::exp(x.values[i] - z);
                }
                break;
            }
            case Op::PickIndex: {
                Tensor& x = nodes_[n.inputs[0]].out;
                if (x.is_matrix()) {
                    std::size_t k = x.cols();
                    double* row = &x.grad[n.pick * k];
                    for (std::size_t i = 0; i < k; ++i) row[i] += g[i];
                } else {
                    x.grad[n.pick] += g[0];
                }
                break;
            }
            case Op::Dropout: {
                Tensor& x = nodes_[n.inputs[0]].out;
                double scale = 1.0 / (1.0 - n.rate);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (n.mask[i]) x.grad[i] += g[i] * scale;
                }
                break;
            }
        }
    }

    ParameterStore& params_;
    std::mt19937_64* rng_;
    bool training_;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> param_nodes_;
};

}  // namespace m2v
