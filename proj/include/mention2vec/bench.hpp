// Decoding-throughput benchmark.
//
// Both model kinds share the identical base encoder and per-token emission
// heads, and neither of those depends on the tag-set size in a way the
// decoding claim is about. The timed stage is therefore exactly the part
// that differs between the architectures: for the baseline, Viterbi over
// 2*|E|+1 tags; for Mention2Vec, Viterbi over 3 tags plus span classification
// of every predicted mention. Context vectors and emission scores are
// precomputed outside the timed region, a warmup pass is excluded, and the
// reported wall time is the median over the requested runs.
#pragma once

#include <algorithm>
#include <chrono>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mention2vec/model.hpp"

namespace m2v {

struct BenchReport {
    std::string model_kind;
    std::size_t num_types = 0;
    std::size_t tag_set_size = 0;
    std::size_t total_words = 0;
    std::size_t repetitions = 0;
    std::size_t threads = 1;
    double wall_seconds = 0.0;  // median over repetitions
    double words_per_second = 0.0;
};

// Unlabeled synthetic sentences over a small closed vocabulary. Lengths are
// mean_len +/- jitter, uniform.
inline std::vector<RawSentence> make_synthetic_sentences(std::size_t count, std::size_t mean_len,
                                                         std::size_t jitter, std::uint64_t seed,
                                                         std::size_t vocab_size = 200) {
    if (count == 0) throw std::invalid_argument("synthetic sentences: count must be >= 1");
    if (mean_len == 0 || jitter >= mean_len) {
        throw std::invalid_argument("synthetic sentences: need mean_len > jitter >= 0");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> len_dist(mean_len - jitter, mean_len + jitter);
    std::uniform_int_distribution<std::size_t> word_dist(0, vocab_size - 1);
    std::vector<RawSentence> sentences(count);
    for (RawSentence& s : sentences) {
        std::size_t n = len_dist(rng);
        for (std::size_t i = 0; i < n; ++i) {
            Token t;
            t.surface = "w" + std::to_string(word_dist(rng));
            t.label = "O";
            s.tokens.push_back(std::move(t));
        }
    }
    return sentences;
}

// Decoding cost does not depend on the weights, so the model is freshly
// initialized at random for the requested type count.
inline BenchReport bench_decode(ModelKind kind, const std::vector<RawSentence>& sentences,
                                std::size_t num_types, std::size_t repetitions,
                                std::uint64_t seed, const ModelConfig& config = {}) {
    if (sentences.empty()) throw std::invalid_argument("bench_decode: empty input");
    if (num_types == 0) throw std::invalid_argument("bench_decode: need at least one type");
    if (repetitions == 0) throw std::invalid_argument("bench_decode: need at least one run");

    Vocabs vocabs = build_vocabs(sentences);
    for (std::size_t i = 0; i < num_types; ++i) {
        vocabs.types.add("T" + std::to_string(i));
    }
    Model model = Model::create(kind, config, std::move(vocabs), seed);

    std::vector<Sentence> sents;
    sents.reserve(sentences.size());
    std::size_t total_words = 0;
    for (const RawSentence& r : sentences) {
        std::vector<std::string> surfaces;
        for (const Token& t : r.tokens) surfaces.push_back(t.surface);
        total_words += surfaces.size();
        sents.push_back(model.preprocess(surfaces));
    }

    // Context vectors and emission scores once, outside the timed region.
    std::vector<std::vector<std::vector<double>>> contexts(sents.size());
    std::vector<std::vector<std::vector<double>>> emission_scores(sents.size());
    bool needs_context = kind == ModelKind::Mention2Vec;
    for (std::size_t i = 0; i < sents.size(); ++i) {
        Graph g(model.params);
        std::vector<Expr> hs = model.encode(g, sents[i]);
        emission_scores[i] = model.emission_values(g, hs);
        if (needs_context) {
            contexts[i].reserve(hs.size());
            for (Expr h : hs) contexts[i].push_back(g.value(h).values);
        }
    }

    std::size_t h_dim = model.config.context_dim();
    auto decode_pass = [&]() {
        std::size_t mentions = 0;
        for (std::size_t i = 0; i < sents.size(); ++i) {
            if (!needs_context) {
                mentions += model.decode_spans(emission_scores[i]).size();
                continue;
            }
            Graph g(model.params);
            std::vector<Expr> hs;
            hs.reserve(contexts[i].size());
            for (const std::vector<double>& h : contexts[i]) {
                hs.push_back(g.input({h_dim}, h));
            }
            mentions += model.decode_spans(emission_scores[i], &g, hs).size();
        }
        return mentions;
    };

    decode_pass();  // warmup
    std::vector<double> times;
    times.reserve(repetitions);
    for (std::size_t r = 0; r < repetitions; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        decode_pass();
        auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    double median = times[times.size() / 2];

    BenchReport report;
    report.model_kind = kind_name(kind);
    report.num_types = num_types;
    report.tag_set_size = model.crf_tags.size();
    report.total_words = total_words;
    report.repetitions = repetitions;
    report.threads = 1;
    report.wall_seconds = median;
    report.words_per_second = median > 0.0 ? static_cast<double>(total_words) / median : 0.0;
    return report;
}

}  // namespace m2v
