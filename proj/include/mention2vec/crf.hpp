// Linear-chain CRF over an arbitrary finite tag set.
//
// Scoring is additive: sum of transition scores and per-position emission
// scores, with a learned start score at position 1 and no stop scores. The
// log-normalizer is built on the tape (differentiable); Viterbi decoding is
// plain arithmetic over node values.
//
// Two tag-set kinds: the 3-tag boundary scheme {B, I, O} and the typed-BIO
// scheme with 2*|types|+1 tags.
#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mention2vec/feedforward.hpp"
#include "mention2vec/tape.hpp"
#include "mention2vec/tensor.hpp"
#include "mention2vec/vocab.hpp"

namespace m2v {

class TagSet {
  public:
    enum class Kind { Boundary, TypedBio };

    static TagSet boundary() {
        TagSet t;
        t.kind_ = Kind::Boundary;
        t.names_ = {"B", "I", "O"};
        return t;
    }

    // Tag order: B-t0, I-t0, B-t1, I-t1, ..., O.
    static TagSet typed_bio(const EntityTypeSet& types) {
        if (types.size() == 0) throw std::invalid_argument("typed_bio: empty type set");
        TagSet t;
        t.kind_ = Kind::TypedBio;
        for (std::size_t i = 0; i < types.size(); ++i) {
            t.names_.push_back("B-" + types.at(i));
            t.names_.push_back("I-" + types.at(i));
        }
        t.names_.push_back("O");
        return t;
    }

    Kind kind() const { return kind_; }
    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    const std::vector<std::string>& names() const { return names_; }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i] == name) return i;
        }
        throw std::invalid_argument("tag set: unknown tag '" + name + "'");
    }

    bool is_outside(std::size_t i) const { return names_.at(i) == "O"; }
    bool is_begin(std::size_t i) const { return names_.at(i)[0] == 'B'; }
    bool is_inside(std::size_t i) const { return names_.at(i)[0] == 'I'; }
    // For typed BIO, the entity type index encoded in tag i; O has none.
    std::size_t type_of(std::size_t i) const {
        if (kind_ != Kind::TypedBio || !(is_begin(i) || is_inside(i))) {
            throw std::logic_error("tag set: tag '" + names_.at(i) + "' has no type");
        }
        return i / 2;
    }
    std::size_t begin_tag(std::size_t type) const {
        return kind_ == Kind::TypedBio ? 2 * type : index_of("B");
    }
    std::size_t inside_tag(std::size_t type) const {
        return kind_ == Kind::TypedBio ? 2 * type + 1 : index_of("I");
    }
    std::size_t outside_tag() const { return names_.size() - 1; }

    // BIO well-formedness used by the decode-time mask: an inside tag may
    // only continue a begin/inside tag of the same type.
    bool transition_allowed(std::size_t from, std::size_t to) const {
        if (!is_inside(to)) return true;
        if (!(is_begin(from) || is_inside(from))) return false;
        if (kind_ == Kind::TypedBio && type_of(from) != type_of(to)) return false;
        return true;
    }
    bool start_allowed(std::size_t to) const { return !is_inside(to); }

  private:
    Kind kind_ = Kind::Boundary;
    std::vector<std::string> names_;
};

// Plain-number view of the transition parameters, used by Viterbi and by
// brute-force oracles.
struct TransitionValues {
    std::size_t num_tags = 0;
    std::vector<double> into;   // into[to * num_tags + from]
    std::vector<double> start;  // start[tag]

    double score(std::size_t from, std::size_t to) const { return into[to * num_tags + from]; }
};

struct CrfParams {
    std::size_t num_tags = 0;
    // Stored transposed relative to the usual T[from,to] convention: row j
    // holds the scores of every transition into tag j, so the forward
    // recurrence can pick one row per target tag.
    ParameterStore::Ref trans_into = 0;
    ParameterStore::Ref start = 0;
    FeedForward head;  // g: context vector -> per-tag scores

    static CrfParams create(ParameterStore& params, const std::string& prefix,
                            std::size_t context_dim, std::size_t hidden_dim,
                            std::size_t num_tags, std::mt19937_64& rng) {
        CrfParams c;
        c.num_tags = num_tags;
        c.head = FeedForward::create(params, prefix + ".g", context_dim, hidden_dim, num_tags,
                                     rng);
        c.trans_into =
            params.add(prefix + ".trans_into", {num_tags, num_tags}, InitSpec::zeros(), rng);
        c.start = params.add(prefix + ".start", {num_tags}, InitSpec::zeros(), rng);
        return c;
    }

    TransitionValues values(const ParameterStore& store) const {
        TransitionValues v;
        v.num_tags = num_tags;
        v.into = store[trans_into].tensor.values;
        v.start = store[start].tensor.values;
        return v;
    }
};

// Row i is g(h_i): length-|tags| scores for position i.
inline std::vector<Expr> emissions(Graph& g, std::span<const Expr> hs, const CrfParams& crf) {
    std::vector<Expr> rows;
    rows.reserve(hs.size());
    for (Expr h : hs) rows.push_back(crf.head.apply(g, h));
    return rows;
}

// start[y1] + em[1,y1] + sum_i (T[y_{i-1},y_i] + em[i,y_i]).
inline Expr score_sequence(Graph& g, std::span<const Expr> em, const CrfParams& crf,
                           std::span<const std::size_t> tags) {
    if (em.empty() || tags.size() != em.size()) {
        throw std::invalid_argument("score_sequence: " + std::to_string(tags.size()) +
                                    " tags for " + std::to_string(em.size()) + " positions");
    }
    for (std::size_t y : tags) {
        if (y >= crf.num_tags) {
            throw std::out_of_range("score_sequence: tag index " + std::to_string(y) +
                                    " out of range for " + std::to_string(crf.num_tags) +
                                    " tags");
        }
    }
    Expr trans = g.parameter(crf.trans_into);
    Expr score = g.add(g.pick(g.parameter(crf.start), tags[0]), g.pick(em[0], tags[0]));
    for (std::size_t i = 1; i < em.size(); ++i) {
        Expr t = g.pick(g.pick(trans, tags[i]), tags[i - 1]);
        score = g.add(score, g.add(t, g.pick(em[i], tags[i])));
    }
    return score;
}

// Forward algorithm in log space: O(n * |tags|^2) and differentiable.
inline Expr log_normalizer(Graph& g, std::span<const Expr> em, const CrfParams& crf) {
    if (em.empty()) throw std::invalid_argument("log_normalizer: no emissions");
    Expr trans = g.parameter(crf.trans_into);
    Expr alpha = g.add(g.parameter(crf.start), em[0]);
    for (std::size_t i = 1; i < em.size(); ++i) {
        std::vector<Expr> next;
        next.reserve(crf.num_tags);
        for (std::size_t to = 0; to < crf.num_tags; ++to) {
            next.push_back(g.logsumexp(g.add(alpha, g.pick(trans, to))));
        }
        alpha = g.add(g.concat(std::span<const Expr>(next)), em[i]);
    }
    return g.logsumexp(alpha);
}

inline Expr crf_nll(Graph& g, std::span<const Expr> em, const CrfParams& crf,
                    std::span<const std::size_t> gold) {
    return g.sub(log_normalizer(g, em, crf), score_sequence(g, em, crf, gold));
}

struct ViterbiResult {
    std::vector<std::size_t> tags;
    double score = 0.0;
};

constexpr double kDecodeMaskScore = -1e4;

// Exact argmax decoding over emission values. When `tags` is given, BIO
// validity is enforced by masking forbidden transition and start scores to
// kDecodeMaskScore. Ties break toward the lowest tag index.
inline ViterbiResult viterbi(const std::vector<std::vector<double>>& em,
                             const TransitionValues& trans, const TagSet* tags = nullptr) {
    if (em.empty()) throw std::invalid_argument("viterbi: no emissions");
    std::size_t n = em.size();
    std::size_t k = trans.num_tags;
    std::vector<double> score(k);
    for (std::size_t j = 0; j < k; ++j) {
        double s = trans.start[j];
        if (tags != nullptr && !tags->start_allowed(j)) s = kDecodeMaskScore;
        score[j] = s + em[0][j];
    }
    std::vector<std::size_t> back((n - 1) * k);
    std::vector<double> next(k);
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t to = 0; to < k; ++to) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_from = 0;
            for (std::size_t from = 0; from < k; ++from) {
                double t = trans.score(from, to);
                if (tags != nullptr && !tags->transition_allowed(from, to)) {
                    t = kDecodeMaskScore;
                }
                double s = score[from] + t;
                if (s > best) {
                    best = s;
                    best_from = from;
                }
            }
            next[to] = best + em[i][to];
            back[(i - 1) * k + to] = best_from;
        }
        score.swap(next);
    }
    ViterbiResult r;
    std::size_t best_last = 0;
    for (std::size_t j = 1; j < k; ++j) {
        if (score[j] > score[best_last]) best_last = j;
    }
    r.score = score[best_last];
    r.tags.resize(n);
    r.tags[n - 1] = best_last;
    for (std::size_t i = n - 1; i-- > 0;) {
        r.tags[i] = back[i * k + r.tags[i + 1]];
    }
    return r;
}

}  // namespace m2v
