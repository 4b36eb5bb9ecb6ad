// Span encoder and type classifier: a pair of LSTMs run over the contextual
// vectors of a boundary [s, t] produce the mention representation mu, whose
// coordinates are per-type scores. mu doubles as the exported mention
// embedding.
#pragma once

#include <algorithm>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mention2vec/feedforward.hpp"
#include "mention2vec/lstm.hpp"
#include "mention2vec/tape.hpp"

namespace m2v {

struct SpanEncoderParams {
    LstmRunner fwd, bwd;
    FeedForward q;  // 2*span_hidden -> hidden -> |types|

    static SpanEncoderParams create(ParameterStore& params, std::size_t context_dim,
                                    std::size_t span_hidden, std::size_t q_hidden,
                                    std::size_t num_types, std::mt19937_64& rng) {
        SpanEncoderParams s;
        s.fwd = LstmRunner::create(params, "span_fwd", context_dim, span_hidden, rng);
        s.bwd = LstmRunner::create(params, "span_bwd", context_dim, span_hidden, rng);
        s.q = FeedForward::create(params, "q", 2 * span_hidden, q_hidden, num_types, rng);
        return s;
    }
};

struct SpanEncoding {
    Expr mu;        // [|types|]
    Expr span_vec;  // [2 * span_hidden]
};

// s and t are 1-based inclusive token positions. The forward LSTM consumes
// h_s..h_t, the backward one h_t..h_s; span_vec = f_t (+) b_s, mu = q(span_vec).
inline SpanEncoding encode_span(Graph& g, const SpanEncoderParams& params,
                                std::span<const Expr> hs, std::size_t s, std::size_t t,
                                double dropout_rate = 0.0) {
    if (s < 1 || s > t || t > hs.size()) {
        throw std::out_of_range("encode_span: span (" + std::to_string(s) + "," +
                                std::to_string(t) + ") invalid for sentence length " +
                                std::to_string(hs.size()));
    }
    std::vector<Expr> xs;
    xs.reserve(t - s + 1);
    for (std::size_t j = s - 1; j < t; ++j) {
        xs.push_back(g.dropout(hs[j], dropout_rate));
    }
    std::vector<Expr> fwd = run_lstm_forward(g, params.fwd, xs);
    std::vector<Expr> bwd = run_lstm_backward(g, params.bwd, xs);
    SpanEncoding enc;
    enc.span_vec = g.concat({fwd.back(), bwd.front()});
    enc.mu = params.q.apply(g, enc.span_vec);
    return enc;
}

// -log softmax(mu)[gold].
inline Expr type_nll(Graph& g, Expr mu, std::size_t gold) {
    std::size_t n = g.value(mu).size();
    if (gold >= n) {
        throw std::out_of_range("type_nll: gold type " + std::to_string(gold) +
                                " out of range for " + std::to_string(n) + " types");
    }
    return g.sub(g.constant(0.0), g.pick(g.log_softmax(mu), gold));
}

// Argmax over mu values; ties break toward the lowest index.
inline std::size_t classify(const std::vector<double>& mu) {
    if (mu.empty()) throw std::invalid_argument("classify: empty score vector");
    return static_cast<std::size_t>(
        std::max_element(mu.begin(), mu.end()) - mu.begin());
}

}  // namespace m2v
