// Wires the base network, the CRF layer and the span classifier into the two
// model kinds:
//
//   Mention2Vec  - 3-tag boundary CRF plus a type classifier over spans,
//                  trained jointly (the classifier sees gold boundaries).
//   BilstmCrf    - one CRF over 2*|types|+1 typed BIO tags, no span layer.
//
// Both kinds share the identical base-network code path, so the tag-set size
// is the only structural difference the decoder sees.
#pragma once

#include <cmath>
#include <iostream>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mention2vec/adam.hpp"
#include "mention2vec/crf.hpp"
#include "mention2vec/data.hpp"
#include "mention2vec/eval.hpp"
#include "mention2vec/lstm.hpp"
#include "mention2vec/mention.hpp"
#include "mention2vec/tape.hpp"
#include "mention2vec/vocab.hpp"

namespace m2v {

enum class ModelKind { Mention2Vec, BilstmCrf };

inline std::string kind_name(ModelKind k) {
    return k == ModelKind::Mention2Vec ? "mention2vec" : "bilstm-crf";
}
inline ModelKind kind_from_name(const std::string& s) {
    if (s == "mention2vec") return ModelKind::Mention2Vec;
    if (s == "bilstm-crf") return ModelKind::BilstmCrf;
    throw std::invalid_argument("model kind: expected 'mention2vec' or 'bilstm-crf', got '" + s +
                                "'");
}

struct ModelConfig {
    std::size_t char_emb_dim = 25;
    std::size_t char_hidden = 25;
    std::size_t word_emb_dim = 100;
    std::size_t word_hidden = 100;
    std::size_t span_hidden = 200;
    std::size_t boundary_head_hidden = 100;  // hidden width of g
    std::size_t type_head_hidden = 100;      // hidden width of q

    std::size_t word_vec_dim() const { return 2 * char_hidden + word_emb_dim; }
    std::size_t context_dim() const { return 2 * word_hidden; }
    std::size_t span_vec_dim() const { return 2 * span_hidden; }
};

struct TrainConfig {
    double learning_rate = 0.0005;
    double dropout = 0.1;
    std::size_t epochs = 100;
    std::uint64_t seed = 1;
    double singleton_unk_prob = 0.5;

    void validate() const {
        if (learning_rate <= 0.0) throw std::invalid_argument("train: learning rate must be > 0");
        if (dropout < 0.0 || dropout >= 1.0) {
            throw std::invalid_argument("train: dropout must lie in [0,1)");
        }
        if (epochs == 0) throw std::invalid_argument("train: epochs must be >= 1");
        if (singleton_unk_prob < 0.0 || singleton_unk_prob > 1.0) {
            throw std::invalid_argument("train: singleton unk probability must lie in [0,1]");
        }
    }
};

// A sentence mapped to index space, with both label views precomputed.
struct Sentence {
    std::vector<std::string> surfaces;
    std::vector<TokenIds> ids;
    std::vector<std::size_t> boundary_tags;  // indices into TagSet::boundary()
    std::vector<std::size_t> typed_tags;     // indices into the typed-BIO tag set
    std::vector<TypedSpan> mentions;
};

struct PredictedMention {
    TypedSpan span;
    std::vector<double> mu;        // empty for the baseline
    std::vector<double> span_vec;  // empty for the baseline
};

class Model {
  public:
    ModelKind kind = ModelKind::Mention2Vec;
    ModelConfig config;
    Vocabs vocabs;
    TagSet crf_tags = TagSet::boundary();
    ParameterStore params;
    BaseEncoderParams base;
    CrfParams crf;
    std::optional<SpanEncoderParams> span;

    static Model create(ModelKind kind, const ModelConfig& config, Vocabs vocabs,
                        std::uint64_t seed, const EmbeddingTable* pretrained = nullptr) {
        if (vocabs.types.size() == 0) {
            throw std::invalid_argument("model: empty entity type set");
        }
        Model m;
        m.kind = kind;
        m.config = config;
        m.vocabs = std::move(vocabs);
        m.crf_tags = kind == ModelKind::Mention2Vec ? TagSet::boundary()
                                                    : TagSet::typed_bio(m.vocabs.types);
        std::mt19937_64 rng(seed);
        m.base = BaseEncoderParams::create(m.params, m.vocabs.chars.size(),
                                           m.vocabs.words.size(), config.char_emb_dim,
                                           config.char_hidden, config.word_emb_dim,
                                           config.word_hidden, rng);
        m.crf = CrfParams::create(m.params, "crf", config.context_dim(),
                                  config.boundary_head_hidden, m.crf_tags.size(), rng);
        if (kind == ModelKind::Mention2Vec) {
            m.span = SpanEncoderParams::create(m.params, config.context_dim(),
                                               config.span_hidden, config.type_head_hidden,
                                               m.vocabs.types.size(), rng);
        }
        if (pretrained != nullptr) m.load_pretrained(*pretrained);
        return m;
    }

    const EntityTypeSet& types() const { return vocabs.types; }

    Sentence preprocess(const RawSentence& raw) const {
        std::vector<std::string> surfaces, labels;
        for (const Token& t : raw.tokens) {
            surfaces.push_back(t.surface);
            labels.push_back(t.label);
        }
        return preprocess(surfaces, &labels);
    }

    Sentence preprocess(const std::vector<std::string>& surfaces,
                        const std::vector<std::string>* labels = nullptr) const {
        if (surfaces.empty()) throw std::invalid_argument("preprocess: empty sentence");
        Sentence s;
        s.surfaces = surfaces;
        for (const std::string& w : surfaces) {
            TokenIds ids;
            ids.word = vocabs.words.lookup(w);
            for (std::uint32_t cp : decode_utf8(w)) {
                ids.chars.push_back(vocabs.chars.lookup(cp));
            }
            if (ids.chars.empty()) {
                throw std::invalid_argument("preprocess: empty token surface");
            }
            s.ids.push_back(std::move(ids));
        }
        if (labels != nullptr) {
            TagSet boundary = TagSet::boundary();
            for (const std::string& b : strip_types(*labels)) {
                s.boundary_tags.push_back(boundary.index_of(b));
            }
            const EntityTypeSet& types = vocabs.types;
            s.mentions = extract_mentions(*labels, types);
            if (kind == ModelKind::BilstmCrf) {
                for (const std::string& l : *labels) {
                    s.typed_tags.push_back(crf_tags.index_of(l));
                }
            }
        }
        return s;
    }

    std::vector<Expr> encode(Graph& g, const Sentence& sent, double dropout_rate = 0.0,
                             std::mt19937_64* unk_rng = nullptr,
                             double singleton_unk_prob = 0.0) const {
        std::vector<TokenIds> ids = sent.ids;
        if (unk_rng != nullptr && singleton_unk_prob > 0.0) {
            std::bernoulli_distribution replace(singleton_unk_prob);
            for (TokenIds& t : ids) {
                if (t.word != WordVocab::kUnk && vocabs.words.is_singleton(t.word) &&
                    replace(*unk_rng)) {
                    t.word = WordVocab::kUnk;
                }
            }
        }
        return encode_sentence(g, base, ids, dropout_rate);
    }

    // Per-sentence training objective: l1 for the baseline, l1 + l2 (summed
    // over this sentence's gold mentions) for Mention2Vec.
    Expr loss(Graph& g, const Sentence& sent, double dropout_rate = 0.0,
              std::mt19937_64* unk_rng = nullptr, double singleton_unk_prob = 0.0) {
        std::vector<Expr> hs = encode(g, sent, dropout_rate, unk_rng, singleton_unk_prob);
        std::vector<Expr> em = emissions(g, hs, crf);
        if (kind == ModelKind::BilstmCrf) {
            if (sent.typed_tags.size() != sent.surfaces.size()) {
                throw std::invalid_argument("loss: sentence has no typed tags");
            }
            return crf_nll(g, em, crf, sent.typed_tags);
        }
        if (sent.boundary_tags.size() != sent.surfaces.size()) {
            throw std::invalid_argument("loss: sentence has no boundary tags");
        }
        Expr total = crf_nll(g, em, crf, sent.boundary_tags);
        for (const TypedSpan& m : sent.mentions) {
            SpanEncoding enc = encode_span(g, *span, hs, m.s, m.t, dropout_rate);
            total = g.add(total, type_nll(g, enc.mu, m.type));
        }
        return total;
    }

    std::vector<std::vector<double>> emission_values(Graph& g, std::span<const Expr> hs) {
        std::vector<std::vector<double>> values;
        values.reserve(hs.size());
        for (Expr e : emissions(g, hs, crf)) values.push_back(g.value(e).values);
        return values;
    }

    // The per-tag-set decoding stage: masked Viterbi over the emission
    // scores, then (Mention2Vec only) span classification of the predicted
    // boundaries, which needs the context vectors. The baseline never touches
    // the graph here.
    std::vector<PredictedMention> decode_spans(const std::vector<std::vector<double>>& em,
                                               Graph* g = nullptr,
                                               std::span<const Expr> hs = {}) {
        ViterbiResult vit = viterbi(em, crf.values(params), &crf_tags);
        std::vector<PredictedMention> out;
        if (kind == ModelKind::BilstmCrf) {
            for (const TypedSpan& sp : spans_from_tags(vit.tags, crf_tags)) {
                out.push_back(PredictedMention{sp, {}, {}});
            }
            return out;
        }
        if (g == nullptr) {
            throw std::logic_error("decode_spans: span classification needs a graph");
        }
        for (const TypedSpan& sp : spans_from_tags(vit.tags, crf_tags)) {
            SpanEncoding enc = encode_span(*g, *span, hs, sp.s, sp.t);
            PredictedMention pm;
            pm.mu = g->value(enc.mu).values;
            pm.span_vec = g->value(enc.span_vec).values;
            pm.span = TypedSpan{sp.s, sp.t, classify(pm.mu)};
            out.push_back(std::move(pm));
        }
        return out;
    }

    std::vector<PredictedMention> decode_from_context(Graph& g, std::span<const Expr> hs) {
        return decode_spans(emission_values(g, hs), &g, hs);
    }

    std::vector<PredictedMention> predict_mentions(const Sentence& sent) {
        Graph g(params);
        std::vector<Expr> hs = encode(g, sent);
        return decode_from_context(g, hs);
    }
    std::vector<PredictedMention> predict_mentions(const std::vector<std::string>& tokens) {
        return predict_mentions(preprocess(tokens));
    }

    std::vector<TypedSpan> predict(const Sentence& sent) {
        std::vector<TypedSpan> spans;
        for (const PredictedMention& m : predict_mentions(sent)) spans.push_back(m.span);
        return spans;
    }
    std::vector<TypedSpan> predict(const std::vector<std::string>& tokens) {
        return predict(preprocess(tokens));
    }

    // Mention spans from a decoded tag sequence. For the boundary tag set the
    // span type is undefined (0); callers classify it afterwards.
    static std::vector<TypedSpan> spans_from_tags(const std::vector<std::size_t>& tags,
                                                  const TagSet& tag_set) {
        std::vector<TypedSpan> spans;
        std::size_t i = 0;
        while (i < tags.size()) {
            if (!tag_set.is_begin(tags[i])) {
                ++i;
                continue;
            }
            TypedSpan sp;
            sp.s = i + 1;
            sp.type = tag_set.kind() == TagSet::Kind::TypedBio ? tag_set.type_of(tags[i]) : 0;
            std::size_t j = i + 1;
            while (j < tags.size() && tag_set.is_inside(tags[j])) ++j;
            sp.t = j;
            spans.push_back(sp);
            i = j;
        }
        return spans;
    }

  private:
    void load_pretrained(const EmbeddingTable& table) {
        if (table.dim != config.word_emb_dim) {
            throw std::invalid_argument("model: embedding dim " + std::to_string(table.dim) +
                                        " does not match configured " +
                                        std::to_string(config.word_emb_dim));
        }
        Tensor& emb = params[base.word_emb].tensor;
        for (std::size_t i = 1; i < vocabs.words.size(); ++i) {
            const std::string& w = vocabs.words.at(i);
            auto it = table.vectors.find(w);
            if (it == table.vectors.end()) {
                std::string lower = w;
                std::transform(lower.begin(), lower.end(), lower.begin(),
                               [](unsigned char c) { return std::tolower(c); });
                it = table.vectors.find(lower);
            }
            if (it == table.vectors.end()) continue;
            std::copy(it->second.begin(), it->second.end(),
                      emb.values.begin() + i * config.word_emb_dim);
        }
    }
};

struct EpochStats {
    std::size_t epoch = 0;
    double avg_loss = 0.0;
    double dev_f1 = 0.0;
};

struct FitResult {
    double best_dev_f1 = 0.0;
    std::size_t best_epoch = 0;
    std::vector<EpochStats> history;
};

// Per-sentence SGD with Adam: shuffled order each epoch, one update per
// sentence, dev span-F1 after each epoch, best-epoch parameters restored at
// the end.
inline FitResult fit(Model& model, const std::vector<RawSentence>& train,
                     const std::vector<RawSentence>& dev, const TrainConfig& tc,
                     std::ostream* log = &std::cerr) {
    tc.validate();
    if (train.empty()) throw std::invalid_argument("fit: empty training set");
    if (dev.empty()) throw std::invalid_argument("fit: empty dev set");

    std::vector<Sentence> train_sents, dev_sents;
    for (const RawSentence& r : train) train_sents.push_back(model.preprocess(r));
    for (const RawSentence& r : dev) dev_sents.push_back(model.preprocess(r));

    std::mt19937_64 rng(tc.seed);
    AdamOptimizer adam({tc.learning_rate});
    FitResult result;
    result.best_dev_f1 = -1.0;
    std::vector<std::vector<double>> best_values = model.params.snapshot_values();

    std::vector<std::size_t> order(train_sents.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t idx : order) {
            Graph g(model.params, &rng, /*training=*/true);
            Expr loss = model.loss(g, train_sents[idx], tc.dropout, &rng,
                                   tc.singleton_unk_prob);
            double value = g.scalar(loss);
            if (!std::isfinite(value)) {
                throw std::runtime_error("fit: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", sentence " +
                                         std::to_string(idx));
            }
            loss_sum += value;
            g.backward(loss);
            try {
                adam.step(model.params);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error(std::string(e.what()) + " (epoch " +
                                         std::to_string(epoch) + ", sentence " +
                                         std::to_string(idx) + ")");
            }
            model.params.zero_grads();
        }

        std::vector<std::vector<TypedSpan>> gold, pred;
        for (Sentence& s : dev_sents) {
            gold.push_back(s.mentions);
            pred.push_back(model.predict(s));
        }
        EvalReport report = span_f1(gold, pred);

        EpochStats stats;
        stats.epoch = epoch;
        stats.avg_loss = loss_sum / static_cast<double>(train_sents.size());
        stats.dev_f1 = report.f1;
        result.history.push_back(stats);
        if (log != nullptr) {
            (*log) << "epoch " << epoch << ": avg loss " << stats.avg_loss << ", dev F1 "
                   << stats.dev_f1 << "\n";
        }
        if (stats.dev_f1 > result.best_dev_f1) {
            result.best_dev_f1 = stats.dev_f1;
            result.best_epoch = epoch;
            best_values = model.params.snapshot_values();
        }
    }
    model.params.restore_values(best_values);
    return result;
}

struct GridCell {
    double learning_rate = 0.0;
    double dropout = 0.0;
    double dev_f1 = 0.0;
};

struct GridResult {
    std::vector<GridCell> cells;
    TrainConfig best_config;
    FitResult best_fit;
    Model best_model;
};

// Grid search over (learning rate, dropout); each cell trains a fresh model
// from the same seed, the best dev-F1 cell's parameters are kept (first cell
// wins ties). The 5x5 grid lr 0.0001..0.0005 x dropout 0.1..0.5 is the
// standard preset.
inline GridResult grid_search(ModelKind kind, const ModelConfig& config, const Vocabs& vocabs,
                              const std::vector<RawSentence>& train,
                              const std::vector<RawSentence>& dev, TrainConfig tc,
                              const std::vector<double>& learning_rates,
                              const std::vector<double>& dropouts,
                              const EmbeddingTable* pretrained = nullptr,
                              std::ostream* log = &std::cerr) {
    if (learning_rates.empty() || dropouts.empty()) {
        throw std::invalid_argument("grid_search: empty grid");
    }
    GridResult result;
    bool have_best = false;
    for (double lr : learning_rates) {
        for (double dr : dropouts) {
            TrainConfig cell_tc = tc;
            cell_tc.learning_rate = lr;
            cell_tc.dropout = dr;
            Model cell_model = Model::create(kind, config, vocabs, cell_tc.seed, pretrained);
            FitResult fr = fit(cell_model, train, dev, cell_tc, log);
            if (log != nullptr) {
                (*log) << "grid cell lr=" << lr << " dropout=" << dr << ": dev F1 "
                       << fr.best_dev_f1 << " (epoch " << fr.best_epoch << ")\n";
            }
            result.cells.push_back({lr, dr, fr.best_dev_f1});
            if (!have_best || fr.best_dev_f1 > result.best_fit.best_dev_f1) {
                have_best = true;
                result.best_config = cell_tc;
                result.best_fit = fr;
                result.best_model = std::move(cell_model);
            }
        }
    }
    return result;
}

inline std::vector<double> paper_grid_learning_rates() {
    return {0.0001, 0.0002, 0.0003, 0.0004, 0.0005};
}
inline std::vector<double> paper_grid_dropouts() { return {0.1, 0.2, 0.3, 0.4, 0.5}; }

}  // namespace m2v
