// Shared test helpers: central finite-difference gradient checking against
// the tape, and brute-force CRF oracles by exhaustive enumeration. Everything
// here is independent of the implementation paths it checks.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mention2vec/crf.hpp"
#include "mention2vec/tape.hpp"
#include "mention2vec/tensor.hpp"

namespace testutil {

struct GradCheckStats {
    std::size_t checked = 0;
    std::size_t tight = 0;  // relative error < 1e-4
    std::size_t loose = 0;  // relative error < 1e-3
    std::size_t kinks = 0;  // excluded: a relu changed sign across the step
    double worst = 0.0;

    double tight_fraction() const {
        return checked == 0 ? 1.0 : static_cast<double>(tight) / checked;
    }
    bool all_tight() const { return tight == checked; }
    // The acceptance shape: >=99% tight, every non-kink remainder loose.
    bool acceptable() const { return tight_fraction() >= 0.99 && loose == checked; }
};

inline double relative_error(double a, double b) {
    double denom = std::max({std::fabs(a), std::fabs(b), 1e-4});
    return std::fabs(a - b) / denom;
}

// builder must be a pure function of the parameter values and the graph's
// rng stream, returning a scalar loss expression.
using LossBuilder = std::function<m2v::Expr(m2v::Graph&)>;

struct LossEval {
    double value = 0.0;
    std::vector<bool> relu_signature;
};

inline LossEval eval_loss(m2v::ParameterStore& params, const LossBuilder& build,
                          std::uint64_t seed, bool training) {
    std::mt19937_64 rng(seed);
    m2v::Graph g(params, &rng, training);
    m2v::Expr loss = build(g);
    return {g.scalar(loss), g.relu_signature()};
}

// Central finite differences over every coordinate of every parameter.
inline GradCheckStats check_param_gradients(m2v::ParameterStore& params,
                                            const LossBuilder& build, double step = 1e-5,
                                            std::uint64_t seed = 0, bool training = false) {
    params.zero_grads();
    std::vector<std::vector<double>> analytic;
    {
        std::mt19937_64 rng(seed);
        m2v::Graph g(params, &rng, training);
        m2v::Expr loss = build(g);
        g.backward(loss);
        for (const m2v::Parameter& p : params) analytic.push_back(p.tensor.grad);
    }
    params.zero_grads();

    GradCheckStats stats;
    std::size_t pi = 0;
    for (m2v::Parameter& p : params) {
        for (std::size_t i = 0; i < p.tensor.size(); ++i) {
            double saved = p.tensor.values[i];
            p.tensor.values[i] = saved + step;
            LossEval hi = eval_loss(params, build, seed, training);
            p.tensor.values[i] = saved - step;
            LossEval lo = eval_loss(params, build, seed, training);
            p.tensor.values[i] = saved;
            if (hi.relu_signature != lo.relu_signature) {
                ++stats.kinks;
                continue;
            }
            double numeric = (hi.value - lo.value) / (2.0 * step);
            double err = relative_error(analytic[pi][i], numeric);
            ++stats.checked;
            if (err < 1e-4) ++stats.tight;
            if (err < 1e-3) ++stats.loose;
            stats.worst = std::max(stats.worst, err);
        }
        ++pi;
    }
    return stats;
}

// Finite differences with respect to a plain input vector. The builder
// receives the graph and the current values; `probe` must be the Expr holding
// those values so its analytic gradient can be read back.
struct InputProbe {
    m2v::Expr loss;
    m2v::Expr probe;
};
using InputBuilder = std::function<InputProbe(m2v::Graph&, const std::vector<double>&)>;

inline GradCheckStats check_input_gradients(std::vector<double> values,
                                            const InputBuilder& build, double step = 1e-5,
                                            std::uint64_t seed = 0) {
    m2v::ParameterStore params;
    std::vector<double> analytic;
    {
        std::mt19937_64 rng(seed);
        m2v::Graph g(params, &rng, false);
        InputProbe p = build(g, values);
        g.backward(p.loss);
        auto grad = g.grad_of(p.probe);
        analytic.assign(grad.begin(), grad.end());
    }
    auto value_at = [&](const std::vector<double>& vs) {
        std::mt19937_64 rng(seed);
        m2v::Graph g(params, &rng, false);
        InputProbe p = build(g, vs);
        return LossEval{g.scalar(p.loss), g.relu_signature()};
    };
    GradCheckStats stats;
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::vector<double> hi_v = values, lo_v = values;
        hi_v[i] += step;
        lo_v[i] -= step;
        LossEval hi = value_at(hi_v);
        LossEval lo = value_at(lo_v);
        if (hi.relu_signature != lo.relu_signature) {
            ++stats.kinks;
            continue;
        }
        double numeric = (hi.value - lo.value) / (2.0 * step);
        double err = relative_error(analytic[i], numeric);
        ++stats.checked;
        if (err < 1e-4) ++stats.tight;
        if (err < 1e-3) ++stats.loose;
        stats.worst = std::max(stats.worst, err);
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Brute-force CRF oracles: every one of |tags|^n sequences, scored directly.

inline double brute_score(const std::vector<std::vector<double>>& em,
                          const m2v::TransitionValues& trans,
                          const std::vector<std::size_t>& tags,
                          const m2v::TagSet* mask = nullptr) {
    double s = mask != nullptr && !mask->start_allowed(tags[0]) ? m2v::kDecodeMaskScore
                                                                : trans.start[tags[0]];
    s += em[0][tags[0]];
    for (std::size_t i = 1; i < tags.size(); ++i) {
        double t = trans.score(tags[i - 1], tags[i]);
        if (mask != nullptr && !mask->transition_allowed(tags[i - 1], tags[i])) {
            t = m2v::kDecodeMaskScore;
        }
        s += t + em[i][tags[i]];
    }
    return s;
}

template <typename Visit>
void for_each_sequence(std::size_t n, std::size_t num_tags, Visit visit) {
    std::vector<std::size_t> tags(n, 0);
    while (true) {
        visit(tags);
        std::size_t i = n;
        while (i > 0) {
            --i;
            if (++tags[i] < num_tags) break;
            tags[i] = 0;
            if (i == 0) return;
        }
    }
}

inline double brute_log_normalizer(const std::vector<std::vector<double>>& em,
                                   const m2v::TransitionValues& trans) {
    double max_score = -std::numeric_limits<double>::infinity();
    std::vector<double> scores;
    for_each_sequence(em.size(), trans.num_tags, [&](const std::vector<std::size_t>& tags) {
        double s = brute_score(em, trans, tags);
        scores.push_back(s);
        max_score = std::max(max_score, s);
    });
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - max_score);
    return max_score + std::log(sum);
}

inline m2v::ViterbiResult brute_viterbi(const std::vector<std::vector<double>>& em,
                                        const m2v::TransitionValues& trans,
                                        const m2v::TagSet* mask = nullptr) {
    m2v::ViterbiResult best;
    best.score = -std::numeric_limits<double>::infinity();
    for_each_sequence(em.size(), trans.num_tags, [&](const std::vector<std::size_t>& tags) {
        double s = brute_score(em, trans, tags, mask);
        if (s > best.score) {
            best.score = s;
            best.tags = tags;
        }
    });
    return best;
}

// Posterior marginal p(tag at position) by enumeration.
inline std::vector<std::vector<double>> brute_marginals(
    const std::vector<std::vector<double>>& em, const m2v::TransitionValues& trans) {
    double logz = brute_log_normalizer(em, trans);
    std::vector<std::vector<double>> marg(em.size(), std::vector<double>(trans.num_tags, 0.0));
    for_each_sequence(em.size(), trans.num_tags, [&](const std::vector<std::size_t>& tags) {
        double p = std::exp(brute_score(em, trans, tags) - logz);
        for (std::size_t i = 0; i < tags.size(); ++i) marg[i][tags[i]] += p;
    });
    return marg;
}

inline std::vector<std::vector<double>> random_emissions(std::size_t n, std::size_t k,
                                                         std::mt19937_64& rng,
                                                         double scale = 2.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    std::vector<std::vector<double>> em(n, std::vector<double>(k));
    for (auto& row : em) {
        for (double& v : row) v = d(rng);
    }
    return em;
}

inline m2v::TransitionValues random_transitions(std::size_t k, std::mt19937_64& rng,
                                                double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    m2v::TransitionValues t;
    t.num_tags = k;
    t.into.resize(k * k);
    t.start.resize(k);
    for (double& v : t.into) v = d(rng);
    for (double& v : t.start) v = d(rng);
    return t;
}

}  // namespace testutil
