// Corpus ingestion: CoNLL-style column files, BIO label utilities, mention
// extraction, pretrained-embedding loading, and vocabulary construction.
//
// File conventions: UTF-8 text, whitespace-separated columns, token in the
// first column and the NER label in the last, blank line between sentences.
// Extra middle columns (POS/chunk) are ignored. IOB1-style labels are
// converted to BIO at load time by promoting inside tags that open a mention.
#pragma once

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mention2vec/vocab.hpp"

namespace m2v {

struct Token {
    std::string surface;
    std::string label;  // "O", "B-TYPE" or "I-TYPE"
};

struct RawSentence {
    std::vector<Token> tokens;
    std::size_t first_line = 0;
    std::size_t last_line = 0;
    bool labeled = true;  // false when read without a label column
};

// 1-based inclusive span with an entity type index.
struct TypedSpan {
    std::size_t s = 0;
    std::size_t t = 0;
    std::size_t type = 0;

    friend bool operator==(const TypedSpan&, const TypedSpan&) = default;
    friend auto operator<=>(const TypedSpan&, const TypedSpan&) = default;
};

inline bool is_valid_label(const std::string& label) {
    if (label == "O") return true;
    return label.size() > 2 && (label[0] == 'B' || label[0] == 'I') && label[1] == '-';
}

inline std::string label_type(const std::string& label) { return label.substr(2); }

// IOB1 -> BIO: an I tag is promoted to B when it opens a mention (sentence
// start, after O, or after a different type). Returns the number of promoted
// labels.
inline std::size_t to_bio(std::vector<std::string>& labels) {
    std::size_t promoted = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i].empty() || labels[i][0] != 'I') continue;
        bool continues = i > 0 && labels[i - 1] != "O" &&
                         label_type(labels[i - 1]) == label_type(labels[i]);
        if (!continues) {
            labels[i][0] = 'B';
            ++promoted;
        }
    }
    return promoted;
}

// Column files as described above. Sentences containing only -DOCSTART- are
// dropped. Labels are validated and converted to BIO.
inline std::vector<RawSentence> read_conll(const std::string& path, bool require_labels = true) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_conll: cannot open '" + path + "'");
    std::vector<RawSentence> sentences;
    RawSentence cur;
    std::size_t line_no = 0;
    std::size_t promoted = 0;
    auto flush = [&]() {
        if (cur.tokens.empty()) return;
        bool docstart = cur.tokens.size() == 1 && cur.tokens[0].surface == "-DOCSTART-";
        if (!docstart) {
            std::vector<std::string> labels;
            labels.reserve(cur.tokens.size());
            for (const Token& t : cur.tokens) labels.push_back(t.label);
            promoted += to_bio(labels);
            for (std::size_t i = 0; i < labels.size(); ++i) cur.tokens[i].label = labels[i];
            sentences.push_back(cur);
        }
        cur = RawSentence{};
    };
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::vector<std::string> cols;
        std::string col;
        while (ss >> col) cols.push_back(col);
        if (cols.empty()) {
            flush();
            continue;
        }
        Token tok;
        tok.surface = cols.front();
        if (cols.size() >= 2) {
            tok.label = cols.back();
        } else if (require_labels) {
            throw std::runtime_error("read_conll: " + path + ":" + std::to_string(line_no) +
                                     ": expected token and label, got '" + line + "'");
        } else {
            tok.label = "O";
            cur.labeled = false;
        }
        if (!is_valid_label(tok.label)) {
            throw std::runtime_error("read_conll: " + path + ":" + std::to_string(line_no) +
                                     ": unknown label '" + tok.label + "'");
        }
        if (cur.tokens.empty()) cur.first_line = line_no;
        cur.last_line = line_no;
        cur.tokens.push_back(std::move(tok));
    }
    flush();
    if (promoted > 0) {
        std::cerr << "read_conll: " << path << ": promoted " << promoted
                  << " inside tags to begin tags (IOB1 -> BIO)\n";
    }
    if (sentences.empty()) {
        throw std::runtime_error("read_conll: '" + path + "' contains no sentences");
    }
    return sentences;
}

// B-x -> B, I-x -> I, O -> O.
inline std::vector<std::string> strip_types(const std::vector<std::string>& labels) {
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (const std::string& l : labels) {
        if (!is_valid_label(l)) {
            throw std::invalid_argument("strip_types: invalid label '" + l + "'");
        }
        out.push_back(l == "O" ? "O" : l.substr(0, 1));
    }
    return out;
}

namespace detail {

template <typename TypeIndexFn>
std::vector<TypedSpan> extract_mentions_impl(const std::vector<std::string>& labels,
                                             TypeIndexFn type_index) {
    std::vector<TypedSpan> mentions;
    std::size_t i = 0;
    while (i < labels.size()) {
        const std::string& l = labels[i];
        if (!is_valid_label(l)) {
            throw std::invalid_argument("extract_mentions: invalid label '" + l + "'");
        }
        if (l[0] != 'B') {
            ++i;
            continue;
        }
        TypedSpan span;
        span.s = i + 1;
        std::string begin_type = label_type(l);
        std::size_t j = i + 1;
        while (j < labels.size() && labels[j][0] == 'I') {
            if (label_type(labels[j]) != begin_type) {
                std::cerr << "extract_mentions: type conflict at position " << j + 1 << " ('"
                          << labels[j] << "' inside '" << l << "' run); keeping '" << begin_type
                          << "'\n";
            }
            ++j;
        }
        span.t = j;
        span.type = type_index(begin_type);
        mentions.push_back(span);
        i = j;
    }
    return mentions;
}

}  // namespace detail

// Maximal B [I]* runs, 1-based inclusive, typed by the B token. A run whose
// inside tags disagree with the begin type keeps the begin type with a
// warning (cannot happen on labels that went through to_bio). The mutable
// overload grows the type set; the const one rejects unknown types.
inline std::vector<TypedSpan> extract_mentions(const std::vector<std::string>& labels,
                                               EntityTypeSet& types) {
    return detail::extract_mentions_impl(labels,
                                         [&](const std::string& name) { return types.add(name); });
}
inline std::vector<TypedSpan> extract_mentions(const std::vector<std::string>& labels,
                                               const EntityTypeSet& types) {
    return detail::extract_mentions_impl(
        labels, [&](const std::string& name) { return types.lookup(name); });
}

// Inverse of (strip_types, extract_mentions): typed BIO labels from spans.
inline std::vector<std::string> labels_from_mentions(std::size_t n,
                                                     const std::vector<TypedSpan>& mentions,
                                                     const EntityTypeSet& types) {
    std::vector<std::string> labels(n, "O");
    for (const TypedSpan& m : mentions) {
        if (m.s < 1 || m.s > m.t || m.t > n) {
            throw std::out_of_range("labels_from_mentions: span (" + std::to_string(m.s) + "," +
                                    std::to_string(m.t) + ") invalid for length " +
                                    std::to_string(n));
        }
        labels[m.s - 1] = "B-" + types.at(m.type);
        for (std::size_t i = m.s; i < m.t; ++i) labels[i] = "I-" + types.at(m.type);
    }
    return labels;
}

struct EmbeddingTable {
    std::size_t dim = 0;
    std::map<std::string, std::vector<double>> vectors;

    bool contains(const std::string& w) const { return vectors.count(w) > 0; }
    std::size_t size() const { return vectors.size(); }
};

// Text lines "word v1 ... v_dim". Later duplicates win with a warning.
inline EmbeddingTable load_embeddings(const std::string& path, std::size_t dim) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_embeddings: cannot open '" + path + "'");
    EmbeddingTable table;
    table.dim = dim;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        std::vector<double> vec;
        vec.reserve(dim);
        double v;
        while (ss >> v) vec.push_back(v);
        if (vec.size() != dim) {
            throw std::runtime_error("load_embeddings: " + path + ":" + std::to_string(line_no) +
                                     ": expected " + std::to_string(dim) + " values, got " +
                                     std::to_string(vec.size()));
        }
        if (table.contains(word)) {
            std::cerr << "load_embeddings: " << path << ":" << line_no << ": duplicate word '"
                      << word << "', keeping the later entry\n";
        }
        table.vectors[word] = std::move(vec);
    }
    return table;
}

struct CoverageStats {
    std::size_t train_words = 0;
    std::size_t covered_exact = 0;
    std::size_t covered_lowercase = 0;  // exact miss, lowercase hit

    double exact_fraction() const {
        return train_words == 0 ? 0.0
                                : static_cast<double>(covered_exact) / train_words;
    }
};

// Word/char/type inventories from the training corpus, with embedding-table
// words appended so pretrained vectors stay reachable at test time.
inline Vocabs build_vocabs(const std::vector<RawSentence>& train,
                           const EmbeddingTable* embeddings = nullptr,
                           CoverageStats* coverage = nullptr) {
    if (train.empty()) throw std::invalid_argument("build_vocabs: empty training set");
    Vocabs v;
    for (const RawSentence& sent : train) {
        for (const Token& tok : sent.tokens) {
            std::size_t wi = v.words.add(tok.surface);
            v.words.bump_train_count(wi);
            for (std::uint32_t cp : decode_utf8(tok.surface)) v.chars.add(cp);
            if (tok.label != "O") v.types.add(label_type(tok.label));
        }
    }
    CoverageStats stats;
    stats.train_words = v.words.size() - 1;  // excludes <unk>
    if (embeddings != nullptr) {
        for (std::size_t i = 1; i < v.words.size(); ++i) {
            const std::string& w = v.words.at(i);
            if (embeddings->contains(w)) {
                v.words.mark_pretrained(i);
                ++stats.covered_exact;
            } else {
                std::string lower = w;
                std::transform(lower.begin(), lower.end(), lower.begin(),
                               [](unsigned char c) { return std::tolower(c); });
                if (embeddings->contains(lower)) {
                    v.words.mark_pretrained(i);
                    ++stats.covered_lowercase;
                }
            }
        }
        for (const auto& [word, vec] : embeddings->vectors) {
            std::size_t wi = v.words.add(word);
            v.words.mark_pretrained(wi);
        }
    }
    if (coverage != nullptr) *coverage = stats;
    return v;
}

}  // namespace m2v
