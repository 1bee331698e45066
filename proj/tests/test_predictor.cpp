#include "doctest.h"

#include <cmath>
#include <random>

#include "ctrkit/grad_check.hpp"
#include "ctrkit/mathutil.hpp"
#include "ctrkit/predictor.hpp"
#include "ctrkit/rng.hpp"

using namespace ctrkit;

namespace {

Array random_array(Shape shape, std::uint64_t seed) {
    Array a(std::move(shape));
    auto eng = make_engine(seed, 0x9ed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& v : a.data) v = dist(eng);
    return a;
}

PredictorVars zero_predictor(Graph& g, std::size_t k, std::size_t len) {
    PredictorVars p;
    for (std::size_t j = 0; j < k; ++j) {
        p.bias.push_back(g.input(Array({1, 1}, 0.0)));
        p.wd.push_back(g.input(Array({len, 1}, 0.0)));
        p.ws.push_back(g.input(Array({len, 1}, 0.0)));
        p.wmat.push_back(g.input(Array({len, len}, 0.0)));
    }
    return p;
}

PredictorVars random_predictor(Graph& g, std::size_t k, std::size_t len, std::uint64_t seed) {
    PredictorVars p;
    for (std::size_t j = 0; j < k; ++j) {
        p.bias.push_back(g.input(random_array({1, 1}, seed + 4 * j)));
        p.wd.push_back(g.input(random_array({len, 1}, seed + 4 * j + 1)));
        p.ws.push_back(g.input(random_array({len, 1}, seed + 4 * j + 2)));
        p.wmat.push_back(g.input(random_array({len, len}, seed + 4 * j + 3)));
    }
    return p;
}

}  // namespace

TEST_CASE("chunking") {
    Graph g;
    Var row = g.input(Array::row({1, 2, 3, 4}));
    const auto two = chunk_row(g, row, 2);
    CHECK(two.size() == 2);
    CHECK(g.value(two[0]).data == std::vector<double>{1, 2});
    CHECK(g.value(two[1]).data == std::vector<double>{3, 4});

    const auto one = chunk_row(g, row, 1);
    CHECK(g.value(one[0]).data == std::vector<double>{1, 2, 3, 4});

    const auto four = chunk_row(g, row, 4);
    CHECK(four.size() == 4);
    for (std::size_t j = 0; j < 4; ++j) CHECK(g.value(four[j]).data == std::vector<double>{static_cast<double>(j + 1)});

    CHECK_THROWS_AS((void)chunk_row(g, row, 3), ConfigError);
}

TEST_CASE("chunk logit hand case") {
    Graph g;
    Var fd = g.input(Array::row({2}));
    Var fs = g.input(Array::row({3}));
    Var b = g.input(Array({1, 1}, 1.0));
    Var wd = g.input(Array::col({0.5}));
    Var ws = g.input(Array::col({1.0}));
    Var w = g.input(Array({1, 1}, 2.0));
    // 1 + 0.5*2 + 1*3 + 2*2*3 = 17
    CHECK(g.value(chunk_logit(g, fd, fs, b, wd, ws, w)).data[0] == doctest::Approx(17.0).epsilon(1e-15));

    // zero bilinear term reduces to a linear model
    Var w0 = g.input(Array({1, 1}, 0.0));
    CHECK(g.value(chunk_logit(g, fd, fs, b, wd, ws, w0)).data[0] == doctest::Approx(5.0).epsilon(1e-15));

    CHECK_THROWS_AS((void)chunk_logit(g, fd, g.input(Array::row({3, 4})), b, wd, ws, w), DimensionError);
}

TEST_CASE("predict probability") {
    Graph g;
    Var fd = g.input(random_array({1, 4}, 11));
    Var fs = g.input(random_array({1, 4}, 12));
    const auto p0 = zero_predictor(g, 2, 2);
    CHECK(g.value(predict_prob(g, fd, fs, p0)).data[0] == 0.5);

    // single length-1 chunk realizing the hand logit of 17
    Graph g1;
    Var fd1 = g1.input(Array::row({2}));
    Var fs1 = g1.input(Array::row({3}));
    PredictorVars p;
    p.bias.push_back(g1.input(Array({1, 1}, 1.0)));
    p.wd.push_back(g1.input(Array::col({0.5})));
    p.ws.push_back(g1.input(Array::col({1.0})));
    p.wmat.push_back(g1.input(Array({1, 1}, 2.0)));
    const double prob = g1.value(predict_prob(g1, fd1, fs1, p)).data[0];
    CHECK(prob == doctest::Approx(stable_sigmoid(17.0)).epsilon(1e-12));
    CHECK(prob > 0.9999999);
    CHECK(prob < 1.0);
}

TEST_CASE("probability is monotone in every chunk bias") {
    const Array fd = random_array({1, 6}, 21), fs = random_array({1, 6}, 22);
    auto prob_with_bias = [&](double extra, std::size_t which) {
        Graph g;
        PredictorVars p;
        for (std::size_t j = 0; j < 3; ++j) {
            p.bias.push_back(g.input(Array({1, 1}, j == which ? extra : 0.1)));
            p.wd.push_back(g.input(random_array({2, 1}, 31 + j)));
            p.ws.push_back(g.input(random_array({2, 1}, 41 + j)));
            p.wmat.push_back(g.input(random_array({2, 2}, 51 + j)));
        }
        return g.value(predict_prob(g, g.input(fd), g.input(fs), p)).data[0];
    };
    for (std::size_t which = 0; which < 3; ++which)
        CHECK(prob_with_bias(0.9, which) > prob_with_bias(0.1, which));
}

TEST_CASE("chunk decomposability") {
    const std::size_t k = 4, len = 3, d_out = k * len;
    const Array fd = random_array({1, d_out}, 61), fs = random_array({1, d_out}, 62);

    Graph g;
    const auto p = random_predictor(g, k, len, 70);
    const double combined = g.value(predict_prob(g, g.input(fd), g.input(fs), p)).data[0];

    // per-chunk logits computed in isolation
    double pooled = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        Graph gj;
        Array fdj({1, len}), fsj({1, len});
        for (std::size_t i = 0; i < len; ++i) {
            fdj.data[i] = fd.data[j * len + i];
            fsj.data[i] = fs.data[j * len + i];
        }
        const auto pj = random_predictor(gj, k, len, 70);  // same parameter draw
        pooled += gj.value(chunk_logit(gj, gj.input(fdj), gj.input(fsj), pj.bias[j], pj.wd[j],
                                       pj.ws[j], pj.wmat[j])).data[0];
    }
    CHECK(combined == doctest::Approx(stable_sigmoid(pooled)).epsilon(1e-12));
}

TEST_CASE("swapping the stream features changes the output") {
    const Array fd = random_array({1, 6}, 81), fs = random_array({1, 6}, 82);
    Graph g;
    const auto p = random_predictor(g, 2, 3, 90);
    const double ab = g.value(predict_prob(g, g.input(fd), g.input(fs), p)).data[0];
    const double ba = g.value(predict_prob(g, g.input(fs), g.input(fd), p)).data[0];
    CHECK(std::abs(ab - ba) > 1e-12);
}

TEST_CASE("predictor parameter gradients match finite differences") {
    const std::size_t k = 2, len = 2;
    ParamStore ps;
    auto eng = make_engine(99, 0x9e);
    std::uniform_real_distribution<double> dist(-0.7, 0.7);
    auto add = [&](const std::string& name, Shape shape) {
        Array a(std::move(shape));
        for (auto& v : a.data) v = dist(eng);
        return ps.add(name, a);
    };
    std::vector<int> bias, wd, ws, wm;
    for (std::size_t j = 0; j < k; ++j) {
        bias.push_back(add("b" + std::to_string(j), {1, 1}));
        wd.push_back(add("wd" + std::to_string(j), {len, 1}));
        ws.push_back(add("ws" + std::to_string(j), {len, 1}));
        wm.push_back(add("W" + std::to_string(j), {len, len}));
    }
    const Array fd = random_array({1, k * len}, 101), fs = random_array({1, k * len}, 102);

    const double err = grad_check_params(ps, [&](Graph& g) {
        PredictorVars p;
        for (std::size_t j = 0; j < k; ++j) {
            p.bias.push_back(g.param(bias[j]));
            p.wd.push_back(g.param(wd[j]));
            p.ws.push_back(g.param(ws[j]));
            p.wmat.push_back(g.param(wm[j]));
        }
        return predict_prob(g, g.input(fd), g.input(fs), p);
    }, 1e-5);
    CHECK(err < 1e-4);
}
