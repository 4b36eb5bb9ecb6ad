// Two-layer perceptron W2 relu(W1 x + b1) + b2, used as the tagging head g
// and the type-classification head q.
#pragma once

#include <random>
#include <string>

#include "mention2vec/tape.hpp"
#include "mention2vec/tensor.hpp"

namespace m2v {

struct FeedForward {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t output_dim = 0;
    ParameterStore::Ref W1 = 0, b1 = 0, W2 = 0, b2 = 0;

    static FeedForward create(ParameterStore& params, const std::string& prefix,
                              std::size_t input_dim, std::size_t hidden_dim,
                              std::size_t output_dim, std::mt19937_64& rng) {
        FeedForward ff;
        ff.input_dim = input_dim;
        ff.hidden_dim = hidden_dim;
        ff.output_dim = output_dim;
        ff.W1 = params.add(prefix + ".W1", {hidden_dim, input_dim}, InitSpec::xavier(), rng);
        ff.b1 = params.add(prefix + ".b1", {hidden_dim}, InitSpec::zeros(), rng);
        ff.W2 = params.add(prefix + ".W2", {output_dim, hidden_dim}, InitSpec::xavier(), rng);
        ff.b2 = params.add(prefix + ".b2", {output_dim}, InitSpec::zeros(), rng);
        return ff;
    }

    Expr apply(Graph& g, Expr x) const {
        Expr h = g.relu(g.affine(g.parameter(W1), x, g.parameter(b1)));
        return g.affine(g.parameter(W2), h, g.parameter(b2));
    }
};

}  // namespace m2v
