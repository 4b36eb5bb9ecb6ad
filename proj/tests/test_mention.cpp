#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mention2vec/mention.hpp"
#include "testutil.hpp"

using namespace m2v;
using Catch::Approx;

namespace {

std::vector<Expr> random_context(Graph& g, std::size_t n, std::size_t dim,
                                 std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<Expr> hs;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(dim);
        for (double& x : v) x = d(rng);
        hs.push_back(g.input({dim}, v));
    }
    return hs;
}

}  // namespace

TEST_CASE("span encoding shapes at paper dimensions", "[mention]") {
    std::mt19937_64 rng(1);
    ParameterStore params;
    SpanEncoderParams enc = SpanEncoderParams::create(params, 200, 200, 100, 4, rng);
    Graph g(params);
    std::vector<Expr> hs = random_context(g, 6, 200, rng);

    SpanEncoding span = encode_span(g, enc, hs, 2, 4);
    REQUIRE(g.value(span.mu).shape == Extents{4});
    REQUIRE(g.value(span.span_vec).shape == Extents{400});

    SECTION("single-token mention runs one step per direction") {
        SpanEncoding single = encode_span(g, enc, hs, 3, 3);
        REQUIRE(g.value(single.mu).shape == Extents{4});
    }

    SECTION("invalid spans are rejected") {
        REQUIRE_THROWS_AS(encode_span(g, enc, hs, 0, 2), std::out_of_range);
        REQUIRE_THROWS_AS(encode_span(g, enc, hs, 3, 2), std::out_of_range);
        REQUIRE_THROWS_AS(encode_span(g, enc, hs, 2, 7), std::out_of_range);
    }
}

TEST_CASE("mu depends on exactly the span's context vectors", "[mention]") {
    std::mt19937_64 rng(2);
    ParameterStore params;
    SpanEncoderParams enc = SpanEncoderParams::create(params, 6, 5, 4, 3, rng);
    Graph g(params);
    std::vector<Expr> hs = random_context(g, 5, 6, rng);

    SpanEncoding span = encode_span(g, enc, hs, 2, 4);
    g.backward(g.logsumexp(span.mu));
    for (std::size_t j = 0; j < hs.size(); ++j) {
        auto grad = g.grad_of(hs[j]);
        double norm = 0.0;
        for (double v : grad) norm += std::fabs(v);
        INFO("position " << j + 1);
        if (j + 1 >= 2 && j + 1 <= 4) {
            REQUIRE(norm > 0.0);
        } else {
            REQUIRE(norm == 0.0);
        }
    }
}

TEST_CASE("span encoder gradients match finite differences", "[mention]") {
    std::mt19937_64 rng(3);
    ParameterStore params;
    SpanEncoderParams enc = SpanEncoderParams::create(params, 4, 4, 3, 2, rng);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<std::vector<double>> hs_values(4, std::vector<double>(4));
    for (auto& h : hs_values) {
        for (double& v : h) v = d(rng);
    }
    auto stats = testutil::check_param_gradients(params, [&](Graph& g) {
        std::vector<Expr> hs;
        for (const auto& h : hs_values) hs.push_back(g.input({4}, h));
        SpanEncoding span = encode_span(g, enc, hs, 1, 3);
        return type_nll(g, span.mu, 1);
    });
    REQUIRE(stats.checked > 0);
    REQUIRE(stats.acceptable());
}

TEST_CASE("type classification loss", "[mention]") {
    ParameterStore params;

    SECTION("uniform scores cost ln |E|") {
        Graph g(params);
        Expr mu = g.input({4}, {0.0, 0.0, 0.0, 0.0});
        REQUIRE(g.scalar(type_nll(g, mu, 2)) == Approx(std::log(4.0)).epsilon(1e-12));
    }

    SECTION("a dominant gold logit drives the loss toward zero") {
        Graph g(params);
        Expr mu = g.input({4}, {0.0, 50.0, 0.0, 0.0});
        REQUIRE(g.scalar(type_nll(g, mu, 1)) < 1e-3);
    }

    SECTION("adding a constant to every score leaves the loss unchanged") {
        Graph g(params);
        std::vector<double> base{0.4, -1.2, 0.9, 0.3};
        std::vector<double> shifted;
        for (double v : base) shifted.push_back(v + 7.5);
        double a = g.scalar(type_nll(g, g.input({4}, base), 2));
        double b = g.scalar(type_nll(g, g.input({4}, shifted), 2));
        REQUIRE(a == Approx(b).epsilon(1e-12));
    }

    SECTION("softmax of mu sums to one") {
        Graph g(params);
        Expr mu = g.input({5}, {1.5, -0.3, 0.0, 2.2, -4.0});
        const Tensor& ls = g.value(g.log_softmax(mu));
        double sum = 0.0;
        for (double v : ls.values) sum += std::exp(v);
        REQUIRE(sum == Approx(1.0).margin(1e-10));
    }

    SECTION("gold index is validated") {
        Graph g(params);
        Expr mu = g.input({3}, {0.0, 0.0, 0.0});
        REQUIRE_THROWS_AS(type_nll(g, mu, 3), std::out_of_range);
    }
}

TEST_CASE("classify picks the argmax with lowest-index ties", "[mention]") {
    REQUIRE(classify({0.0, 1.0, 0.0, 0.0}) == 1);
    REQUIRE(classify({2.0, 2.0, 1.0}) == 0);
    REQUIRE(classify({-3.0}) == 0);
    REQUIRE_THROWS_AS(classify({}), std::invalid_argument);

    std::vector<double> mu{0.4, -1.2, 0.9};
    std::vector<double> shifted;
    for (double v : mu) shifted.push_back(v - 11.0);
    REQUIRE(classify(mu) == classify(shifted));
}
