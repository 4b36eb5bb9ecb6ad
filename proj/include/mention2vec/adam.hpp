// Adam with bias correction, applied densely over a ParameterStore.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mention2vec/tensor.hpp"

namespace m2v {

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class AdamOptimizer {
  public:
    explicit AdamOptimizer(AdamConfig config) : config_(config) {
        if (config_.learning_rate <= 0.0) {
            throw std::invalid_argument("adam: learning rate must be positive");
        }
    }

    std::size_t step_count() const { return step_; }

    // One update over every parameter from its accumulated gradient. Moments
    // are lazily sized on the first step.
    void step(ParameterStore& params) {
        if (first_moment_.empty()) {
            for (const Parameter& p : params) {
                first_moment_.emplace_back(p.tensor.size(), 0.0);
                second_moment_.emplace_back(p.tensor.size(), 0.0);
            }
        }
        ++step_;
        double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
        double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
        std::size_t pi = 0;
        for (Parameter& p : params) {
            std::vector<double>& m = first_moment_[pi];
            std::vector<double>& v = second_moment_[pi];
            ++pi;
            Tensor& t = p.tensor;
            t.ensure_grad();
            for (std::size_t i = 0; i < t.size(); ++i) {
                double g = t.grad[i];
                if (!std::isfinite(g)) {
                    throw std::runtime_error("adam: non-finite gradient in parameter '" +
                                             p.name + "'");
                }
                m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
                v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
                double mhat = m[i] / bc1;
                double vhat = v[i] / bc2;
                t.values[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
            }
        }
    }

  private:
    AdamConfig config_;
    std::size_t step_ = 0;
    std::vector<std::vector<double>> first_moment_;
    std::vector<std::vector<double>> second_moment_;
};

}  // namespace m2v
