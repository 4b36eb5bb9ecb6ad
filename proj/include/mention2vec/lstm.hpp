// LSTM cell and bidirectional runners, plus the base network that maps a
// sentence of (word, characters) indices to character- and context-sensitive
// token vectors h_1..h_n.
//
// Cell variant: forget gate, tanh candidate and output squashing, no
// peepholes. Each gate has its own weight matrix over [x ; h_prev], so a cell
// holds 4*hidden*(input+hidden+1) values. Initial (h, c) states are learned
// vectors shared across positions.
#pragma once

#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mention2vec/tape.hpp"
#include "mention2vec/tensor.hpp"

namespace m2v {

struct LstmParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    ParameterStore::Ref Wi = 0, bi = 0, Wf = 0, bf = 0, Wo = 0, bo = 0, Wc = 0, bc = 0;

    static LstmParams create(ParameterStore& params, const std::string& prefix,
                             std::size_t input_dim, std::size_t hidden_dim,
                             std::mt19937_64& rng) {
        LstmParams p;
        p.input_dim = input_dim;
        p.hidden_dim = hidden_dim;
        Extents w_shape{hidden_dim, input_dim + hidden_dim};
        p.Wi = params.add(prefix + ".Wi", w_shape, InitSpec::xavier(), rng);
        p.bi = params.add(prefix + ".bi", {hidden_dim}, InitSpec::zeros(), rng);
        p.Wf = params.add(prefix + ".Wf", w_shape, InitSpec::xavier(), rng);
        // Forget bias 1.0 keeps the cell path open early in training.
        p.bf = params.add(prefix + ".bf", {hidden_dim}, InitSpec::constant(1.0), rng);
        p.Wo = params.add(prefix + ".Wo", w_shape, InitSpec::xavier(), rng);
        p.bo = params.add(prefix + ".bo", {hidden_dim}, InitSpec::zeros(), rng);
        p.Wc = params.add(prefix + ".Wc", w_shape, InitSpec::xavier(), rng);
        p.bc = params.add(prefix + ".bc", {hidden_dim}, InitSpec::zeros(), rng);
        return p;
    }

    std::size_t value_count() const { return 4 * hidden_dim * (input_dim + hidden_dim + 1); }
};

struct LstmState {
    Expr h, c;
};

inline LstmState lstm_step(Graph& g, const LstmParams& p, Expr x, LstmState prev) {
    if (g.value(x).shape != Extents{p.input_dim}) {
        throw std::invalid_argument("lstm_step: input shape " + shape_str(g.value(x).shape) +
                                    ", cell expects [" + std::to_string(p.input_dim) + "]");
    }
    if (g.value(prev.h).shape != Extents{p.hidden_dim}) {
        throw std::invalid_argument("lstm_step: state shape " + shape_str(g.value(prev.h).shape) +
                                    ", cell expects [" + std::to_string(p.hidden_dim) + "]");
    }
    Expr xh = g.concat({x, prev.h});
    Expr in_gate = g.sigmoid(g.affine(g.parameter(p.Wi), xh, g.parameter(p.bi)));
    Expr forget_gate = g.sigmoid(g.affine(g.parameter(p.Wf), xh, g.parameter(p.bf)));
    Expr out_gate = g.sigmoid(g.affine(g.parameter(p.Wo), xh, g.parameter(p.bo)));
    Expr candidate = g.tanh(g.affine(g.parameter(p.Wc), xh, g.parameter(p.bc)));
    Expr c = g.add(g.cmul(forget_gate, prev.c), g.cmul(in_gate, candidate));
    Expr h = g.cmul(out_gate, g.tanh(c));
    return {h, c};
}

// One direction of a BiLSTM: cell parameters plus its learned initial state.
struct LstmRunner {
    LstmParams cell;
    ParameterStore::Ref h0 = 0, c0 = 0;

    static LstmRunner create(ParameterStore& params, const std::string& prefix,
                             std::size_t input_dim, std::size_t hidden_dim,
                             std::mt19937_64& rng) {
        LstmRunner r;
        r.cell = LstmParams::create(params, prefix, input_dim, hidden_dim, rng);
        r.h0 = params.add(prefix + ".h0", {hidden_dim}, InitSpec::zeros(), rng);
        r.c0 = params.add(prefix + ".c0", {hidden_dim}, InitSpec::zeros(), rng);
        return r;
    }

    LstmState initial(Graph& g) const { return {g.parameter(h0), g.parameter(c0)}; }
};

// States after consuming x_1..x_i, left to right.
inline std::vector<Expr> run_lstm_forward(Graph& g, const LstmRunner& r,
                                          std::span<const Expr> xs) {
    std::vector<Expr> states;
    states.reserve(xs.size());
    LstmState s = r.initial(g);
    for (Expr x : xs) {
        s = lstm_step(g, r.cell, x, s);
        states.push_back(s.h);
    }
    return states;
}

// states[i] is the backward state after consuming x_n..x_{i+1}, i.e. the
// right-to-left summary at position i (0-based).
inline std::vector<Expr> run_lstm_backward(Graph& g, const LstmRunner& r,
                                           std::span<const Expr> xs) {
    std::vector<Expr> states(xs.size());
    LstmState s = r.initial(g);
    for (std::size_t i = xs.size(); i-- > 0;) {
        s = lstm_step(g, r.cell, xs[i], s);
        states[i] = s.h;
    }
    return states;
}

// A token as index sequences: word id plus the ids of its characters.
struct TokenIds {
    std::size_t word = 0;
    std::vector<std::size_t> chars;
};

struct BaseEncoderParams {
    std::size_t char_emb_dim = 0;
    std::size_t word_emb_dim = 0;
    ParameterStore::Ref char_emb = 0;  // [|C|, char_emb_dim]
    ParameterStore::Ref word_emb = 0;  // [|W|, word_emb_dim]
    LstmRunner char_fwd, char_bwd;
    LstmRunner word_fwd, word_bwd;

    std::size_t word_vec_dim() const { return 2 * char_fwd.cell.hidden_dim + word_emb_dim; }
    std::size_t context_dim() const { return 2 * word_fwd.cell.hidden_dim; }

    static BaseEncoderParams create(ParameterStore& params, std::size_t num_chars,
                                    std::size_t num_words, std::size_t char_emb_dim,
                                    std::size_t char_hidden, std::size_t word_emb_dim,
                                    std::size_t word_hidden, std::mt19937_64& rng) {
        BaseEncoderParams b;
        b.char_emb_dim = char_emb_dim;
        b.word_emb_dim = word_emb_dim;
        b.char_emb = params.add("char_emb", {num_chars, char_emb_dim}, InitSpec::xavier(), rng);
        b.word_emb = params.add("word_emb", {num_words, word_emb_dim}, InitSpec::xavier(), rng);
        b.char_fwd = LstmRunner::create(params, "char_fwd", char_emb_dim, char_hidden, rng);
        b.char_bwd = LstmRunner::create(params, "char_bwd", char_emb_dim, char_hidden, rng);
        std::size_t v_dim = 2 * char_hidden + word_emb_dim;
        b.word_fwd = LstmRunner::create(params, "word_fwd", v_dim, word_hidden, rng);
        b.word_bwd = LstmRunner::create(params, "word_bwd", v_dim, word_hidden, rng);
        return b;
    }
};

// v = final-forward-char-state (+) final-backward-char-state (+) e_word.
inline Expr encode_word(Graph& g, const BaseEncoderParams& base, const TokenIds& token,
                        double dropout_rate = 0.0) {
    if (token.chars.empty()) {
        throw std::invalid_argument("encode_word: empty character sequence");
    }
    Expr emb_table = g.parameter(base.char_emb);
    std::vector<Expr> cs;
    cs.reserve(token.chars.size());
    for (std::size_t c : token.chars) {
        cs.push_back(g.dropout(g.pick(emb_table, c), dropout_rate));
    }
    std::vector<Expr> fwd = run_lstm_forward(g, base.char_fwd, cs);
    std::vector<Expr> bwd = run_lstm_backward(g, base.char_bwd, cs);
    Expr word_vec = g.pick(g.parameter(base.word_emb), token.word);
    return g.concat({fwd.back(), bwd.front(), word_vec});
}

// h_i = forward-word-state_i (+) backward-word-state_i over the v sequence.
// Dropout applies to each LSTM layer's inputs in training mode.
inline std::vector<Expr> encode_sentence(Graph& g, const BaseEncoderParams& base,
                                         std::span<const TokenIds> tokens,
                                         double dropout_rate = 0.0) {
    if (tokens.empty()) throw std::invalid_argument("encode_sentence: empty sentence");
    std::vector<Expr> vs;
    vs.reserve(tokens.size());
    for (const TokenIds& t : tokens) {
        vs.push_back(g.dropout(encode_word(g, base, t, dropout_rate), dropout_rate));
    }
    std::vector<Expr> fwd = run_lstm_forward(g, base.word_fwd, vs);
    std::vector<Expr> bwd = run_lstm_backward(g, base.word_bwd, vs);
    std::vector<Expr> hs;
    hs.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        hs.push_back(g.concat({fwd[i], bwd[i]}));
    }
    return hs;
}

}  // namespace m2v
