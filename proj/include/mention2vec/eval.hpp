// Span-level precision/recall/F1 with the exact-match convention: a predicted
// span counts only when (s, t, type) all agree with a gold span.
#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mention2vec/data.hpp"

namespace m2v {

struct TypeCounts {
    std::size_t gold = 0;
    std::size_t predicted = 0;
    std::size_t correct = 0;
};

struct EvalReport {
    double precision = 0.0;  // percentages
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t gold_count = 0;
    std::size_t predicted_count = 0;
    std::size_t correct_count = 0;
    std::map<std::size_t, TypeCounts> per_type;

    static double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }
};

inline EvalReport span_f1(const std::vector<std::vector<TypedSpan>>& gold,
                          const std::vector<std::vector<TypedSpan>>& pred) {
    if (gold.size() != pred.size()) {
        throw std::invalid_argument("span_f1: " + std::to_string(gold.size()) +
                                    " gold sentences vs " + std::to_string(pred.size()) +
                                    " predicted");
    }
    EvalReport r;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        std::set<TypedSpan> gold_set(gold[i].begin(), gold[i].end());
        std::set<TypedSpan> pred_set(pred[i].begin(), pred[i].end());
        for (const TypedSpan& s : gold_set) ++r.per_type[s.type].gold;
        for (const TypedSpan& s : pred_set) {
            ++r.per_type[s.type].predicted;
            if (gold_set.count(s) > 0) ++r.per_type[s.type].correct;
        }
    }
    for (const auto& [type, c] : r.per_type) {
        r.gold_count += c.gold;
        r.predicted_count += c.predicted;
        r.correct_count += c.correct;
    }
    r.precision = r.predicted_count > 0
                      ? 100.0 * static_cast<double>(r.correct_count) / r.predicted_count
                      : 0.0;
    r.recall = r.gold_count > 0 ? 100.0 * static_cast<double>(r.correct_count) / r.gold_count
                                : 0.0;
    r.f1 = EvalReport::f1_of(r.precision, r.recall);
    return r;
}

}  // namespace m2v
