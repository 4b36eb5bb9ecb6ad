#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mention2vec/crf.hpp"
#include "testutil.hpp"

using namespace m2v;
using Catch::Approx;

namespace {

// Emission rows as plain input nodes.
std::vector<Expr> em_inputs(Graph& g, const std::vector<std::vector<double>>& em) {
    std::vector<Expr> rows;
    for (const auto& row : em) rows.push_back(g.input({row.size()}, row));
    return rows;
}

TransitionValues trans_from_params(const ParameterStore& store, const CrfParams& crf) {
    return crf.values(store);
}

}  // namespace

TEST_CASE("tag set sizes and roles", "[crf]") {
    TagSet boundary = TagSet::boundary();
    REQUIRE(boundary.size() == 3);
    REQUIRE(boundary.names() == std::vector<std::string>{"B", "I", "O"});

    EntityTypeSet types;
    for (const char* t : {"PER", "LOC", "ORG", "MISC"}) types.add(t);
    TagSet typed = TagSet::typed_bio(types);
    REQUIRE(typed.size() == 9);
    REQUIRE(typed.name(typed.begin_tag(1)) == "B-LOC");
    REQUIRE(typed.name(typed.inside_tag(3)) == "I-MISC");
    REQUIRE(typed.is_outside(typed.outside_tag()));
    REQUIRE(typed.type_of(typed.inside_tag(2)) == 2);

    // Inside tags only continue their own type.
    REQUIRE(typed.transition_allowed(typed.begin_tag(1), typed.inside_tag(1)));
    REQUIRE_FALSE(typed.transition_allowed(typed.begin_tag(0), typed.inside_tag(1)));
    REQUIRE_FALSE(typed.transition_allowed(typed.outside_tag(), typed.inside_tag(2)));
    REQUIRE_FALSE(typed.start_allowed(typed.inside_tag(0)));
    REQUIRE(typed.start_allowed(typed.begin_tag(0)));
}

TEST_CASE("emission head maps h to per-tag scores", "[crf]") {
    std::mt19937_64 rng(1);
    ParameterStore params;
    CrfParams crf = CrfParams::create(params, "crf", 8, 6, 3, rng);

    SECTION("zero weights give zero emissions") {
        for (Parameter& p : params) {
            std::fill(p.tensor.values.begin(), p.tensor.values.end(), 0.0);
        }
        Graph g(params);
        std::vector<Expr> hs{g.input({8}, std::vector<double>(8, 0.7))};
        std::vector<Expr> em = emissions(g, hs, crf);
        REQUIRE(em.size() == 1);
        REQUIRE(g.value(em[0]).values == std::vector<double>{0.0, 0.0, 0.0});
    }

    SECTION("one row per position, |tags| wide") {
        Graph g(params);
        std::vector<Expr> hs{g.input({8}, std::vector<double>(8, 0.1)),
                             g.input({8}, std::vector<double>(8, -0.4))};
        std::vector<Expr> em = emissions(g, hs, crf);
        REQUIRE(em.size() == 2);
        REQUIRE(g.value(em[1]).shape == Extents{3});
    }

    SECTION("gradients through the head match finite differences") {
        auto stats = testutil::check_param_gradients(params, [&](Graph& g) {
            std::vector<Expr> hs{g.input({8}, {0.3, -0.2, 0.9, 0.4, -0.6, 0.1, 0.8, -0.3})};
            return g.logsumexp(emissions(g, hs, crf)[0]);
        });
        REQUIRE(stats.checked > 0);
        REQUIRE(stats.acceptable());
    }
}

TEST_CASE("sequence scoring", "[crf]") {
    std::mt19937_64 rng(2);
    ParameterStore params;
    CrfParams crf = CrfParams::create(params, "crf", 4, 4, 3, rng);
    // trans_into and start initialize to zero.

    std::vector<std::vector<double>> em{{1.0, 2.0, 3.0}};
    SECTION("single position with zero start scores is the emission entry") {
        Graph g(params);
        std::vector<std::size_t> tags{2};
        REQUIRE(g.scalar(score_sequence(g, em_inputs(g, em), crf, tags)) == Approx(3.0));
    }

    SECTION("zero transitions sum the emission path") {
        std::vector<std::vector<double>> em4{
            {1, 0, 0}, {0, 2, 0}, {0, 0, 3}, {4, 0, 0}};
        Graph g(params);
        std::vector<std::size_t> tags{0, 1, 2, 0};
        REQUIRE(g.scalar(score_sequence(g, em_inputs(g, em4), crf, tags)) == Approx(10.0));
    }

    SECTION("random four-token score matches a hand summation") {
        std::mt19937_64 r2(44);
        std::uniform_real_distribution<double> d(-1.5, 1.5);
        for (double& v : params[crf.trans_into].tensor.values) v = d(r2);
        for (double& v : params[crf.start].tensor.values) v = d(r2);
        auto em4 = testutil::random_emissions(4, 3, r2);
        std::vector<std::size_t> tags{1, 0, 2, 1};

        TransitionValues tv = trans_from_params(params, crf);
        double expected = tv.start[tags[0]] + em4[0][tags[0]];
        for (std::size_t i = 1; i < 4; ++i) {
            expected += tv.score(tags[i - 1], tags[i]) + em4[i][tags[i]];
        }
        Graph g(params);
        REQUIRE(g.scalar(score_sequence(g, em_inputs(g, em4), crf, tags)) ==
                Approx(expected).epsilon(1e-12));
    }

    SECTION("tag indices are validated") {
        Graph g(params);
        std::vector<std::size_t> bad{7};
        REQUIRE_THROWS_AS(score_sequence(g, em_inputs(g, em), crf, bad), std::out_of_range);
    }
}

TEST_CASE("log normalizer agrees with exhaustive enumeration", "[crf]") {
    std::mt19937_64 rng(3);
    ParameterStore params;
    CrfParams crf = CrfParams::create(params, "crf", 4, 4, 3, rng);
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    for (double& v : params[crf.trans_into].tensor.values) v = d(rng);
    for (double& v : params[crf.start].tensor.values) v = d(rng);

    SECTION("n=1 reduces to logsumexp of the first row") {
        auto em = testutil::random_emissions(1, 3, rng);
        Graph g(params);
        double expected = g.scalar(g.logsumexp(g.input(
            {3}, {em[0][0] + g.value(g.parameter(crf.start)).values[0],
                  em[0][1] + g.value(g.parameter(crf.start)).values[1],
                  em[0][2] + g.value(g.parameter(crf.start)).values[2]})));
        REQUIRE(g.scalar(log_normalizer(g, em_inputs(g, em), crf)) ==
                Approx(expected).epsilon(1e-12));
    }

    SECTION("n=4 brute force within 1e-8") {
        auto em = testutil::random_emissions(4, 3, rng);
        double brute = testutil::brute_log_normalizer(em, trans_from_params(params, crf));
        Graph g(params);
        REQUIRE(g.scalar(log_normalizer(g, em_inputs(g, em), crf)) ==
                Approx(brute).margin(1e-8));
    }

    SECTION("all-zero scores give n log k") {
        for (double& v : params[crf.trans_into].tensor.values) v = 0.0;
        for (double& v : params[crf.start].tensor.values) v = 0.0;
        std::vector<std::vector<double>> em(5, std::vector<double>(3, 0.0));
        Graph g(params);
        REQUIRE(g.scalar(log_normalizer(g, em_inputs(g, em), crf)) ==
                Approx(5.0 * std::log(3.0)).epsilon(1e-12));
    }
}

TEST_CASE("sequence probabilities normalize to one", "[crf]") {
    std::mt19937_64 rng(4);
    ParameterStore params;
    CrfParams crf = CrfParams::create(params, "crf", 4, 4, 3, rng);
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    for (double& v : params[crf.trans_into].tensor.values) v = d(rng);
    for (double& v : params[crf.start].tensor.values) v = d(rng);
    auto em = testutil::random_emissions(4, 3, rng);
    TransitionValues tv = trans_from_params(params, crf);

    Graph g(params);
    double logz = g.scalar(log_normalizer(g, em_inputs(g, em), crf));
    double total = 0.0;
    testutil::for_each_sequence(4, 3, [&](const std::vector<std::size_t>& tags) {
        total += std::exp(testutil::brute_score(em, tv, tags) - logz);
    });
    REQUIRE(total == Approx(1.0).margin(1e-8));
}

TEST_CASE("negative log likelihood", "[crf]") {
    std::mt19937_64 rng(5);
    ParameterStore params;
    CrfParams crf = CrfParams::create(params, "crf", 4, 4, 3, rng);

    SECTION("a dominant gold path drives the loss to zero") {
        std::vector<std::vector<double>> em(4, std::vector<double>(3, 0.0));
        std::vector<std::size_t> gold{0, 1, 1, 2};
        for (std::size_t i = 0; i < 4; ++i) em[i][gold[i]] = 50.0;
        Graph g(params);
        REQUIRE(g.scalar(crf_nll(g, em_inputs(g, em), crf, gold)) < 1e-3);
    }

    SECTION("uniform scores, n=2, 3 tags cost 2 ln 3") {
        std::vector<std::vector<double>> em(2, std::vector<double>(3, 0.0));
        std::vector<std::size_t> gold{0, 2};
        Graph g(params);
        REQUIRE(g.scalar(crf_nll(g, em_inputs(g, em), crf, gold)) ==
                Approx(2.0 * std::log(3.0)).epsilon(1e-12));
    }

    SECTION("loss is non-negative on random instances") {
        std::mt19937_64 r2(99);
        std::uniform_real_distribution<double> d(-3.0, 3.0);
        std::uniform_int_distribution<std::size_t> len(1, 5);
        std::uniform_int_distribution<std::size_t> tag(0, 2);
        for (int trial = 0; trial < 100; ++trial) {
            for (double& v : params[crf.trans_into].tensor.values) v = d(r2);
            for (double& v : params[crf.start].tensor.values) v = d(r2);
            std::size_t n = len(r2);
            auto em = testutil::random_emissions(n, 3, r2);
            std::vector<std::size_t> gold(n);
            for (std::size_t& t : gold) t = tag(r2);
            Graph g(params);
            REQUIRE(g.scalar(crf_nll(g, em_inputs(g, em), crf, gold)) >= 0.0);
        }
    }
}

TEST_CASE("log normalizer gradients are the posterior marginals", "[crf]") {
    std::mt19937_64 rng(6);
    ParameterStore params;
    CrfParams crf = CrfParams::create(params, "crf", 4, 4, 3, rng);
    std::uniform_real_distribution<double> d(-1.5, 1.5);
    for (double& v : params[crf.trans_into].tensor.values) v = d(rng);
    for (double& v : params[crf.start].tensor.values) v = d(rng);
    auto em = testutil::random_emissions(4, 3, rng);

    Graph g(params);
    std::vector<Expr> rows = em_inputs(g, em);
    g.backward(log_normalizer(g, rows, crf));
    auto marginals = testutil::brute_marginals(em, trans_from_params(params, crf));
    for (std::size_t i = 0; i < em.size(); ++i) {
        auto grad = g.grad_of(rows[i]);
        for (std::size_t t = 0; t < 3; ++t) {
            REQUIRE(grad[t] == Approx(marginals[i][t]).margin(1e-6));
        }
    }
}

TEST_CASE("crf loss gradients match finite differences", "[crf]") {
    std::mt19937_64 rng(7);
    ParameterStore params;
    CrfParams crf = CrfParams::create(params, "crf", 6, 5, 3, rng);
    std::uniform_real_distribution<double> d(-0.8, 0.8);
    for (double& v : params[crf.trans_into].tensor.values) v = d(rng);
    for (double& v : params[crf.start].tensor.values) v = d(rng);
    std::vector<std::vector<double>> hs_values(3, std::vector<double>(6));
    for (auto& h : hs_values) {
        for (double& v : h) v = d(rng);
    }
    std::vector<std::size_t> gold{0, 1, 2};
    auto stats = testutil::check_param_gradients(params, [&](Graph& g) {
        std::vector<Expr> hs;
        for (const auto& h : hs_values) hs.push_back(g.input({6}, h));
        return crf_nll(g, emissions(g, hs, crf), crf, gold);
    });
    REQUIRE(stats.checked > 0);
    REQUIRE(stats.acceptable());
}

TEST_CASE("viterbi decoding", "[crf]") {
    SECTION("zero transitions reduce to per-position argmax") {
        TransitionValues tv;
        tv.num_tags = 3;
        tv.into.assign(9, 0.0);
        tv.start.assign(3, 0.0);
        std::vector<std::vector<double>> em{{0, 5, 1}, {2, 0, 7}, {9, 1, 0}};
        ViterbiResult r = viterbi(em, tv);
        REQUIRE(r.tags == std::vector<std::size_t>{1, 2, 0});
        REQUIRE(r.score == Approx(21.0));
    }

    SECTION("emissions forcing O everywhere give the all-O path") {
        TagSet boundary = TagSet::boundary();
        TransitionValues tv;
        tv.num_tags = 3;
        tv.into.assign(9, 0.0);
        tv.start.assign(3, 0.0);
        std::vector<std::vector<double>> em(6, std::vector<double>{-5.0, -5.0, 5.0});
        ViterbiResult r = viterbi(em, tv, &boundary);
        for (std::size_t t : r.tags) REQUIRE(t == boundary.outside_tag());
    }

    SECTION("ties break toward the lowest tag index") {
        TransitionValues tv;
        tv.num_tags = 4;
        tv.into.assign(16, 0.0);
        tv.start.assign(4, 0.0);
        std::vector<std::vector<double>> em(3, std::vector<double>(4, 0.0));
        ViterbiResult r = viterbi(em, tv);
        REQUIRE(r.tags == std::vector<std::size_t>{0, 0, 0});
    }

    SECTION("matches exhaustive argmax on random instances") {
        std::mt19937_64 rng(123);
        std::uniform_int_distribution<std::size_t> len(1, 5);
        for (int trial = 0; trial < 60; ++trial) {
            std::size_t k = trial % 2 == 0 ? 3 : 5;
            std::size_t n = len(rng);
            TransitionValues tv = testutil::random_transitions(k, rng);
            auto em = testutil::random_emissions(n, k, rng);
            ViterbiResult fast = viterbi(em, tv);
            ViterbiResult brute = testutil::brute_viterbi(em, tv);
            REQUIRE(fast.tags == brute.tags);
            REQUIRE(fast.score == Approx(brute.score).margin(1e-9));
            // Reported score equals the score of the reported path.
            REQUIRE(testutil::brute_score(em, tv, fast.tags) ==
                    Approx(fast.score).margin(1e-9));
        }
    }

    SECTION("decode mask keeps BIO structure and matches the masked oracle") {
        TagSet boundary = TagSet::boundary();
        std::mt19937_64 rng(321);
        std::size_t inside = boundary.index_of("I");
        std::size_t outside = boundary.outside_tag();
        for (int trial = 0; trial < 40; ++trial) {
            TransitionValues tv = testutil::random_transitions(3, rng, 3.0);
            auto em = testutil::random_emissions(4, 3, rng, 6.0);
            ViterbiResult masked = viterbi(em, tv, &boundary);
            ViterbiResult brute = testutil::brute_viterbi(em, tv, &boundary);
            REQUIRE(masked.tags == brute.tags);
            REQUIRE(masked.tags[0] != inside);
            for (std::size_t i = 1; i < masked.tags.size(); ++i) {
                if (masked.tags[i] == inside) REQUIRE(masked.tags[i - 1] != outside);
            }
        }
    }

    SECTION("empty input is rejected") {
        TransitionValues tv;
        tv.num_tags = 3;
        tv.into.assign(9, 0.0);
        tv.start.assign(3, 0.0);
        REQUIRE_THROWS_AS(viterbi({}, tv), std::invalid_argument);
    }
}
