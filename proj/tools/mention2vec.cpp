// Command-line front end: train / predict / eval / embed / knn / bench.
//
// Exit codes: 0 success, 1 data or model errors, 2 bad flags. Every run
// echoes its resolved configuration to stderr; all randomness flows from the
// single --seed flag.
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mention2vec/bench.hpp"
#include "mention2vec/embed.hpp"
#include "mention2vec/model.hpp"
#include "mention2vec/serialize.hpp"

namespace {

using namespace m2v;

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

void echo_config(const std::string& name, const std::vector<std::string>& kv) {
    std::cerr << "config: command=" << name;
    for (const std::string& s : kv) std::cerr << " " << s;
    std::cerr << "\n";
}

struct TrainArgs {
    std::string train_path, dev_path, out_path, embeddings_path;
    std::string kind = "mention2vec";
    double lr = 0.0005;
    double dropout = 0.1;
    std::size_t epochs = 100;
    double singleton_unk_prob = 0.5;
    std::uint64_t seed = 1;
    bool paper_grid = false;
    std::string grid_lr, grid_dropout;
};

int run_train(const TrainArgs& a) {
    echo_config("train",
                {"train=" + a.train_path, "dev=" + a.dev_path, "out=" + a.out_path,
                 "model-kind=" + a.kind, "lr=" + std::to_string(a.lr),
                 "dropout=" + std::to_string(a.dropout), "epochs=" + std::to_string(a.epochs),
                 "singleton-unk-prob=" + std::to_string(a.singleton_unk_prob),
                 "seed=" + std::to_string(a.seed),
                 "embeddings=" + (a.embeddings_path.empty() ? "(none)" : a.embeddings_path),
                 std::string("paper-grid=") + (a.paper_grid ? "on" : "off")});

    ModelKind kind = kind_from_name(a.kind);
    std::vector<RawSentence> train_set = read_conll(a.train_path);
    std::vector<RawSentence> dev_set = read_conll(a.dev_path);

    ModelConfig config;
    EmbeddingTable table;
    const EmbeddingTable* pretrained = nullptr;
    CoverageStats coverage;
    Vocabs vocabs;
    if (!a.embeddings_path.empty()) {
        table = load_embeddings(a.embeddings_path, config.word_emb_dim);
        vocabs = build_vocabs(train_set, &table, &coverage);
        pretrained = &table;
        std::cerr << "embeddings: " << table.size() << " vectors; exact coverage "
                  << coverage.covered_exact << "/" << coverage.train_words << " ("
                  << 100.0 * coverage.exact_fraction() << "%), lowercase fallback "
                  << coverage.covered_lowercase << "\n";
    } else {
        vocabs = build_vocabs(train_set);
    }
    std::cerr << "vocab: " << vocabs.words.size() << " words, " << vocabs.chars.size()
              << " chars, " << vocabs.types.size() << " entity types\n";

    TrainConfig tc;
    tc.learning_rate = a.lr;
    tc.dropout = a.dropout;
    tc.epochs = a.epochs;
    tc.seed = a.seed;
    tc.singleton_unk_prob = a.singleton_unk_prob;

    std::vector<double> grid_lrs, grid_drs;
    if (a.paper_grid) {
        grid_lrs = paper_grid_learning_rates();
        grid_drs = paper_grid_dropouts();
    }
    for (const std::string& s : split_csv(a.grid_lr)) grid_lrs.push_back(std::stod(s));
    for (const std::string& s : split_csv(a.grid_dropout)) grid_drs.push_back(std::stod(s));

    if (!grid_lrs.empty() || !grid_drs.empty()) {
        if (grid_lrs.empty()) grid_lrs = {a.lr};
        if (grid_drs.empty()) grid_drs = {a.dropout};
        GridResult grid = grid_search(kind, config, vocabs, train_set, dev_set, tc, grid_lrs,
                                      grid_drs, pretrained);
        std::cerr << "grid: best lr=" << grid.best_config.learning_rate
                  << " dropout=" << grid.best_config.dropout << " dev F1 "
                  << grid.best_fit.best_dev_f1 << " (epoch " << grid.best_fit.best_epoch
                  << ")\n";
        save_model(grid.best_model, a.out_path);
    } else {
        Model model = Model::create(kind, config, vocabs, tc.seed, pretrained);
        FitResult result = fit(model, train_set, dev_set, tc);
        std::cerr << "best dev F1 " << result.best_dev_f1 << " at epoch " << result.best_epoch
                  << "\n";
        save_model(model, a.out_path);
    }
    std::cerr << "model written to " << a.out_path << "\n";
    return 0;
}

int run_predict(const std::string& model_path, const std::string& input_path,
                const std::string& output_path) {
    echo_config("predict", {"model=" + model_path, "input=" + input_path,
                            "output=" + (output_path.empty() ? "(stdout)" : output_path)});
    Model model = load_model(model_path);
    std::vector<RawSentence> sentences = read_conll(input_path, /*require_labels=*/false);

    std::ofstream file;
    if (!output_path.empty()) {
        file.open(output_path);
        if (!file) throw std::runtime_error("predict: cannot write '" + output_path + "'");
    }
    std::ostream& out = output_path.empty() ? std::cout : file;
    for (const RawSentence& s : sentences) {
        std::vector<std::string> surfaces;
        for (const Token& t : s.tokens) surfaces.push_back(t.surface);
        std::vector<TypedSpan> spans = model.predict(surfaces);
        std::vector<std::string> labels =
            labels_from_mentions(surfaces.size(), spans, model.types());
        for (std::size_t i = 0; i < surfaces.size(); ++i) {
            out << surfaces[i];
            if (s.labeled) out << "\t" << s.tokens[i].label;
            out << "\t" << labels[i] << "\n";
        }
        out << "\n";
    }
    return 0;
}

int run_eval(const std::string& model_path, const std::string& data_path) {
    echo_config("eval", {"model=" + model_path, "data=" + data_path});
    Model model = load_model(model_path);
    std::vector<RawSentence> sentences = read_conll(data_path);

    std::vector<Sentence> sents;
    std::vector<std::vector<TypedSpan>> gold;
    for (const RawSentence& s : sentences) {
        sents.push_back(model.preprocess(s));
        gold.push_back(sents.back().mentions);
    }
    std::size_t words = 0;
    for (const Sentence& s : sents) words += s.surfaces.size();

    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<TypedSpan>> pred;
    for (Sentence& s : sents) pred.push_back(model.predict(s));
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    EvalReport r = span_f1(gold, pred);
    std::printf("%-8s %7s %7s %7s %7s %7s %8s\n", "type", "P", "R", "F1", "gold", "pred",
                "correct");
    for (const auto& [type, c] : r.per_type) {
        double p = c.predicted > 0 ? 100.0 * c.correct / c.predicted : 0.0;
        double rec = c.gold > 0 ? 100.0 * c.correct / c.gold : 0.0;
        std::printf("%-8s %7.2f %7.2f %7.2f %7zu %7zu %8zu\n", model.types().at(type).c_str(),
                    p, rec, EvalReport::f1_of(p, rec), c.gold, c.predicted, c.correct);
    }
    std::printf("%-8s %7.2f %7.2f %7.2f %7zu %7zu %8zu\n", "ALL", r.precision, r.recall, r.f1,
                r.gold_count, r.predicted_count, r.correct_count);
    if (seconds > 0.0) {
        std::printf("decoded %zu words in %.3fs (%.0f words/sec, 1 thread)\n", words, seconds,
                    words / seconds);
    }
    return 0;
}

int run_embed(const std::string& model_path, const std::string& data_path,
              const std::string& out_path) {
    echo_config("embed", {"model=" + model_path, "data=" + data_path, "out=" + out_path});
    Model model = load_model(model_path);
    std::vector<RawSentence> sentences = read_conll(data_path, /*require_labels=*/false);
    std::size_t count = export_mentions(model, sentences, out_path);
    std::cerr << "wrote " << count << " mention records to " << out_path << "\n";
    return 0;
}

int run_knn(const std::string& store_path, std::size_t query, std::size_t k,
            const std::string& space, const std::string& metric) {
    echo_config("knn", {"store=" + store_path, "query=" + std::to_string(query),
                        "k=" + std::to_string(k), "space=" + space, "metric=" + metric});
    MentionStore store = MentionStore::load(store_path);
    const MentionRecord& q = store.by_id(query);
    std::printf("query %zu: \"%s\" [%s] (sentence %zu, span %zu-%zu)\n", q.id,
                q.surface.c_str(), q.type.c_str(), q.sentence, q.span.s, q.span.t);
    auto neighbors =
        nearest_neighbors(store, query, k, space_from_name(space), metric_from_name(metric));
    for (const Neighbor& n : neighbors) {
        const MentionRecord& r = store.by_id(n.id);
        std::printf("%8.4f  %zu: \"%s\" [%s]\n", n.score, r.id, r.surface.c_str(),
                    r.type.c_str());
    }
    return 0;
}

int run_bench(const std::string& types_csv, const std::string& kind, std::size_t n_sentences,
              std::size_t length, std::size_t jitter, std::size_t reps, std::uint64_t seed,
              const std::string& out_path) {
    echo_config("bench", {"types=" + types_csv, "model-kind=" + kind,
                          "sentences=" + std::to_string(n_sentences),
                          "length=" + std::to_string(length), "jitter=" + std::to_string(jitter),
                          "reps=" + std::to_string(reps), "seed=" + std::to_string(seed),
                          "out=" + (out_path.empty() ? "(none)" : out_path)});
    std::vector<std::size_t> type_counts;
    for (const std::string& s : split_csv(types_csv)) {
        type_counts.push_back(static_cast<std::size_t>(std::stoul(s)));
    }
    if (type_counts.empty()) throw std::runtime_error("bench: no type counts given");
    std::vector<ModelKind> kinds;
    if (kind == "both") {
        kinds = {ModelKind::BilstmCrf, ModelKind::Mention2Vec};
    } else {
        kinds = {kind_from_name(kind)};
    }

    auto sentences = make_synthetic_sentences(n_sentences, length, jitter, seed);
    std::vector<BenchReport> reports;
    std::printf("%-12s %5s %5s %10s %10s %8s %5s %8s\n", "model", "|E|", "tags", "words/sec",
                "median-s", "words", "reps", "threads");
    for (ModelKind mk : kinds) {
        for (std::size_t t : type_counts) {
            BenchReport r = bench_decode(mk, sentences, t, reps, seed);
            reports.push_back(r);
            std::printf("%-12s %5zu %5zu %10.0f %10.4f %8zu %5zu %8zu\n", r.model_kind.c_str(),
                        r.num_types, r.tag_set_size, r.words_per_second, r.wall_seconds,
                        r.total_words, r.repetitions, r.threads);
            std::fflush(stdout);
        }
    }
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("bench: cannot write '" + out_path + "'");
        for (const BenchReport& r : reports) {
            nlohmann::json j;
            j["model_kind"] = r.model_kind;
            j["num_types"] = r.num_types;
            j["tag_set_size"] = r.tag_set_size;
            j["total_words"] = r.total_words;
            j["repetitions"] = r.repetitions;
            j["threads"] = r.threads;
            j["wall_seconds"] = r.wall_seconds;
            j["words_per_second"] = r.words_per_second;
            out << j.dump() << "\n";
        }
        std::cerr << "wrote " << reports.size() << " benchmark records to " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mention2vec: multitask entity identification "
                 "(boundary detection + type classification)"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read defaults from an INI/TOML file");

    TrainArgs ta;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
    train_cmd->add_option("--train", ta.train_path, "Training corpus (CoNLL format)")
        ->required();
    train_cmd->add_option("--dev", ta.dev_path, "Development corpus for model selection")
        ->required();
    train_cmd->add_option("--out", ta.out_path, "Output model file")->required();
    train_cmd->add_option("--model-kind", ta.kind, "mention2vec or bilstm-crf")
        ->check(CLI::IsMember({"mention2vec", "bilstm-crf"}));
    train_cmd->add_option("--lr", ta.lr, "Adam learning rate");
    train_cmd->add_option("--dropout", ta.dropout, "Dropout rate at LSTM layers");
    train_cmd->add_option("--epochs", ta.epochs, "Maximum training epochs");
    train_cmd->add_option("--singleton-unk-prob", ta.singleton_unk_prob,
                          "Probability of replacing singleton words by <unk> while training");
    train_cmd->add_option("--seed", ta.seed, "Seed for all randomness");
    train_cmd->add_option("--embeddings", ta.embeddings_path,
                          "Pretrained word embeddings (text, word + 100 floats per line)");
    train_cmd->add_flag("--paper-grid", ta.paper_grid,
                        "5x5 grid search: lr 0.0001..0.0005 x dropout 0.1..0.5");
    train_cmd->add_option("--grid-lr", ta.grid_lr, "Comma-separated learning-rate grid");
    train_cmd->add_option("--grid-dropout", ta.grid_dropout, "Comma-separated dropout grid");

    std::string model_path, input_path, output_path, data_path, store_path;
    CLI::App* predict_cmd = app.add_subcommand("predict", "Tag a corpus with a trained model");
    predict_cmd->add_option("--model", model_path, "Model file")->required();
    predict_cmd->add_option("--input", input_path, "Input corpus (labels optional)")
        ->required();
    predict_cmd->add_option("--output", output_path, "Output path (default stdout)");

    CLI::App* eval_cmd = app.add_subcommand("eval", "Score a model on labeled data");
    eval_cmd->add_option("--model", model_path, "Model file")->required();
    eval_cmd->add_option("--data", data_path, "Labeled corpus")->required();

    CLI::App* embed_cmd =
        app.add_subcommand("embed", "Export mention embeddings of detected mentions");
    embed_cmd->add_option("--model", model_path, "Model file")->required();
    embed_cmd->add_option("--data", data_path, "Corpus to run detection on")->required();
    embed_cmd->add_option("--out", output_path, "Output JSONL path")->required();

    std::size_t query = 0, k = 5;
    std::string space = "mu", metric = "cosine";
    CLI::App* knn_cmd = app.add_subcommand("knn", "Nearest neighbors of a mention record");
    knn_cmd->add_option("--store", store_path, "Mention store (JSONL from embed)")->required();
    knn_cmd->add_option("--query", query, "Query record id")->required();
    knn_cmd->add_option("--k", k, "Number of neighbors");
    knn_cmd->add_option("--space", space, "mu or span_vec")
        ->check(CLI::IsMember({"mu", "span_vec"}));
    knn_cmd->add_option("--metric", metric, "cosine or euclidean")
        ->check(CLI::IsMember({"cosine", "euclidean"}));

    std::string types_csv = "4,8,16,32,64", bench_kind = "both";
    std::size_t n_sentences = 1000, length = 25, jitter = 10, reps = 3;
    std::uint64_t bench_seed = 1;
    CLI::App* bench_cmd = app.add_subcommand("bench", "Decoding-throughput scaling benchmark");
    bench_cmd->add_option("--types", types_csv, "Comma-separated entity-type counts");
    bench_cmd->add_option("--model-kind", bench_kind, "mention2vec, bilstm-crf, or both")
        ->check(CLI::IsMember({"mention2vec", "bilstm-crf", "both"}));
    bench_cmd->add_option("--sentences", n_sentences, "Synthetic corpus size");
    bench_cmd->add_option("--length", length, "Mean sentence length");
    bench_cmd->add_option("--jitter", jitter, "Uniform length jitter around the mean");
    bench_cmd->add_option("--reps", reps, "Timed repetitions (median reported)");
    bench_cmd->add_option("--seed", bench_seed, "Seed for the synthetic corpus and weights");
    bench_cmd->add_option("--out", output_path, "Machine-readable JSONL report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return run_train(ta);
        if (predict_cmd->parsed()) return run_predict(model_path, input_path, output_path);
        if (eval_cmd->parsed()) return run_eval(model_path, data_path);
        if (embed_cmd->parsed()) return run_embed(model_path, data_path, output_path);
        if (knn_cmd->parsed()) return run_knn(store_path, query, k, space, metric);
        if (bench_cmd->parsed()) {
            return run_bench(types_csv, bench_kind, n_sentences, length, jitter, reps,
                             bench_seed, output_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
