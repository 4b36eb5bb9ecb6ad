// Mention-embedding export and nearest-neighbor queries.
//
// Export format: one JSON object per line (UTF-8), fields
//   id, sentence, span [s, t], surface, type, mu [..], span_vec [..]
// Record ids are assigned in (sentence, span) order and are stable across
// runs of the same model on the same data.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mention2vec/model.hpp"

namespace m2v {

struct MentionRecord {
    std::size_t id = 0;
    std::size_t sentence = 0;
    TypedSpan span;
    std::string surface;
    std::string type;
    std::vector<double> mu;
    std::vector<double> span_vec;
};

class MentionStore {
  public:
    void add(MentionRecord r) { records_.push_back(std::move(r)); }
    std::size_t size() const { return records_.size(); }
    const MentionRecord& at(std::size_t i) const { return records_.at(i); }
    const std::vector<MentionRecord>& records() const { return records_; }

    const MentionRecord& by_id(std::size_t id) const {
        for (const MentionRecord& r : records_) {
            if (r.id == id) return r;
        }
        throw std::invalid_argument("mention store: no record with id " + std::to_string(id));
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("mention store: cannot write '" + path + "'");
        for (const MentionRecord& r : records_) {
            nlohmann::json j;
            j["id"] = r.id;
            j["sentence"] = r.sentence;
            j["span"] = {r.span.s, r.span.t};
            j["surface"] = r.surface;
            j["type"] = r.type;
            j["mu"] = r.mu;
            j["span_vec"] = r.span_vec;
            out << j.dump() << "\n";
        }
    }

    static MentionStore load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("mention store: cannot open '" + path + "'");
        MentionStore store;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw std::runtime_error("mention store: " + path + ":" +
                                         std::to_string(line_no) + ": " + e.what());
            }
            MentionRecord r;
            r.id = j.at("id").get<std::size_t>();
            r.sentence = j.at("sentence").get<std::size_t>();
            r.span.s = j.at("span").at(0).get<std::size_t>();
            r.span.t = j.at("span").at(1).get<std::size_t>();
            r.surface = j.at("surface").get<std::string>();
            r.type = j.at("type").get<std::string>();
            r.mu = j.at("mu").get<std::vector<double>>();
            r.span_vec = j.at("span_vec").get<std::vector<double>>();
            store.add(std::move(r));
        }
        return store;
    }

  private:
    std::vector<MentionRecord> records_;
};

// Predicts every sentence and collects one record per detected mention.
inline MentionStore collect_mentions(Model& model, const std::vector<RawSentence>& sentences) {
    if (model.kind != ModelKind::Mention2Vec) {
        throw std::invalid_argument("collect_mentions: mention embeddings require a "
                                    "mention2vec model");
    }
    MentionStore store;
    std::size_t next_id = 0;
    for (std::size_t si = 0; si < sentences.size(); ++si) {
        Sentence sent = model.preprocess(sentences[si]);
        for (const PredictedMention& m : model.predict_mentions(sent)) {
            MentionRecord r;
            r.id = next_id++;
            r.sentence = si;
            r.span = m.span;
            for (std::size_t k = m.span.s; k <= m.span.t; ++k) {
                if (k > m.span.s) r.surface += " ";
                r.surface += sent.surfaces[k - 1];
            }
            r.type = model.types().at(m.span.type);
            r.mu = m.mu;
            r.span_vec = m.span_vec;
            store.add(std::move(r));
        }
    }
    return store;
}

inline std::size_t export_mentions(Model& model, const std::vector<RawSentence>& sentences,
                                   const std::string& path) {
    MentionStore store = collect_mentions(model, sentences);
    store.save(path);
    return store.size();
}

enum class NeighborSpace { Mu, SpanVec };
enum class NeighborMetric { Cosine, Euclidean };

inline NeighborSpace space_from_name(const std::string& s) {
    if (s == "mu") return NeighborSpace::Mu;
    if (s == "span_vec") return NeighborSpace::SpanVec;
    throw std::invalid_argument("neighbor space: expected 'mu' or 'span_vec', got '" + s + "'");
}
inline NeighborMetric metric_from_name(const std::string& s) {
    if (s == "cosine") return NeighborMetric::Cosine;
    if (s == "euclidean") return NeighborMetric::Euclidean;
    throw std::invalid_argument("neighbor metric: expected 'cosine' or 'euclidean', got '" + s +
                                "'");
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine: dimension mismatch " + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    double denom = std::sqrt(na) * std::sqrt(nb);
    return denom > 0.0 ? dot / denom : 0.0;
}

struct Neighbor {
    std::size_t id = 0;
    // Cosine similarity, or negated Euclidean distance, so higher is always
    // closer.
    double score = 0.0;
};

// Top-k neighbors of the query record, query excluded, ranked by descending
// score with ties broken by ascending record id.
inline std::vector<Neighbor> nearest_neighbors(const MentionStore& store, std::size_t query_id,
                                               std::size_t k,
                                               NeighborSpace space = NeighborSpace::Mu,
                                               NeighborMetric metric = NeighborMetric::Cosine) {
    if (k < 1) throw std::invalid_argument("nearest_neighbors: k must be >= 1");
    const MentionRecord& query = store.by_id(query_id);
    auto vec_of = [&](const MentionRecord& r) -> const std::vector<double>& {
        return space == NeighborSpace::Mu ? r.mu : r.span_vec;
    };
    std::vector<Neighbor> all;
    for (const MentionRecord& r : store.records()) {
        if (r.id == query_id) continue;
        double score;
        if (metric == NeighborMetric::Cosine) {
            score = cosine_similarity(vec_of(query), vec_of(r));
        } else {
            const std::vector<double>& a = vec_of(query);
            const std::vector<double>& b = vec_of(r);
            if (a.size() != b.size()) {
                throw std::invalid_argument("nearest_neighbors: dimension mismatch");
            }
            double d2 = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
            score = -std::sqrt(d2);
        }
        all.push_back({r.id, score});
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

}  // namespace m2v
