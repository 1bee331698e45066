#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ctrkit/rng.hpp"
#include "ctrkit/sce.hpp"

using namespace ctrkit;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
    std::vector<double> v(n);
    auto eng = make_engine(seed, 0x5ce);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& x : v) x = nd(eng);
    return v;
}

// permutation null of the statistic: re-pair xb rows at random
std::vector<double> permutation_null(const std::vector<double>& xa, const std::vector<double>& xb,
                                     const RffBank& bx, const RffBank& by, std::size_t reps,
                                     std::uint64_t seed) {
    std::vector<double> w(xa.size(), 1.0);
    std::vector<double> shuffled = xb;
    std::vector<double> null;
    null.reserve(reps);
    auto eng = make_engine(seed, 0x9e81);
    for (std::size_t r = 0; r < reps; ++r) {
        std::shuffle(shuffled.begin(), shuffled.end(), eng);
        null.push_back(sce_statistic(xa, shuffled, w, bx, by));
    }
    std::sort(null.begin(), null.end());
    return null;
}

}  // namespace

TEST_CASE("rff bank sampling") {
    const RffBank a = sample_rff_bank(3, 77);
    const RffBank b = sample_rff_bank(3, 77);
    CHECK(a.w == b.w);
    CHECK(a.phi == b.phi);
    CHECK(a.size() == 3);
    for (double p : a.phi) {
        CHECK(p >= 0.0);
        CHECK(p < 6.2831853072);
    }
    CHECK_THROWS_AS((void)sample_rff_bank(0, 1), ConfigError);

    const RffBank big = sample_rff_bank(100000, 123);
    double mean = 0.0;
    for (double w : big.w) mean += w;
    mean /= static_cast<double>(big.size());
    CHECK(std::abs(mean) < 0.02);
}

TEST_CASE("rff map hand values") {
    RffBank bank;
    bank.w = {1.0, 1.0, 1.0};
    bank.phi = {0.0, 1.5707963267948966, 0.0};
    std::vector<double> zero{0.0};
    const auto m0 = rff_map(zero, bank);
    CHECK(m0(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(m0(0, 1) == doctest::Approx(0.0).epsilon(1e-9));

    std::vector<double> one{1.0};
    const auto m1 = rff_map(one, bank);
    CHECK(m1(0, 2) == doctest::Approx(std::sqrt(2.0) * std::cos(1.0)).epsilon(1e-12));
    CHECK(std::sqrt(2.0) * std::cos(1.0) == doctest::Approx(0.7641).epsilon(1e-4));
}

TEST_CASE("rff inner products concentrate as the bank grows") {
    // variance of the kernel estimate over bank draws halves (roughly) per doubling
    const double x = 0.3, y = 1.1;
    std::vector<double> variances;
    for (std::size_t n : {1u, 2u, 4u, 8u}) {
        std::vector<double> est;
        for (std::uint64_t d = 0; d < 20; ++d) {
            const RffBank bank = sample_rff_bank(n, derive_seed(3, d));
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                s += 2.0 * std::cos(bank.w[i] * x + bank.phi[i]) * std::cos(bank.w[i] * y + bank.phi[i]);
            est.push_back(s / static_cast<double>(n));
        }
        double m = 0.0;
        for (double e : est) m += e;
        m /= static_cast<double>(est.size());
        double v = 0.0;
        for (double e : est) v += (e - m) * (e - m);
        variances.push_back(v / static_cast<double>(est.size()));
    }
    CHECK(variances[1] < variances[0]);
    CHECK(variances[2] < variances[1]);
    CHECK(variances[3] < variances[2]);
}

TEST_CASE("weighted covariance hand values") {
    std::vector<double> u{1, 2}, ones{1, 1}, w20{2, 0};
    CHECK(weighted_cov(u, u, ones) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(weighted_cov(u, u, w20) == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<double> c{5, 5, 5}, any{0.3, 1.9, 0.8}, w3{1.4, 0.2, 1.4};
    CHECK(weighted_cov(c, any, w3) == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<double> bad{1, 2, 3};
    CHECK_THROWS_AS((void)weighted_cov(u, bad, ones), DimensionError);

    // all-ones weights reduce to the unweighted biased covariance
    const auto a = randn(64, 1), b = randn(64, 2);
    std::vector<double> unit(64, 1.0);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < 64; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= 64;
    mb /= 64;
    double cov = 0;
    for (std::size_t i = 0; i < 64; ++i) cov += (a[i] - ma) * (b[i] - mb);
    cov /= 64;
    CHECK(weighted_cov(a, b, unit) == doctest::Approx(cov).epsilon(1e-12));
}

TEST_CASE("exact laplacian-kernel statistic") {
    std::vector<double> x{0.4, -1.2, 3.3};
    CHECK(exact_sce(x, x, 1.0) == 0.0);

    std::vector<double> cx{2, 2, 2}, cy{-7, -7, -7};
    CHECK(exact_sce(cx, cy, 0.7) == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<double> x2{0, 1}, y2{0, 2};
    const double expect = std::sqrt(2.0) * (std::exp(-1.0) - std::exp(-2.0));
    CHECK(exact_sce(x2, y2, 1.0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(expect == doctest::Approx(0.3288674).epsilon(1e-6));
}

TEST_CASE("sce statistic vanishes for constant columns") {
    std::vector<double> c(50, 3.0);
    const auto other = randn(50, 9);
    std::vector<double> w(50, 1.0);
    const RffBank bx = sample_rff_bank(4, 21), by = sample_rff_bank(4, 22);
    CHECK(sce_statistic(c, other, w, bx, by) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("sce statistic is symmetric under operand swap") {
    const auto a = randn(80, 31), b = randn(80, 32);
    std::vector<double> w(80);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 + 0.01 * static_cast<double>(i % 7);
    const RffBank bx = sample_rff_bank(3, 41), by = sample_rff_bank(3, 42);
    CHECK(sce_statistic(a, b, w, bx, by) == doctest::Approx(sce_statistic(b, a, w, by, bx)).epsilon(1e-12));
}

TEST_CASE("sce statistic detects dependent columns against the permutation null") {
    const std::size_t n = 200;
    const auto xa = randn(n, 51);
    const auto xb = xa;  // identical, maximally dependent
    std::vector<double> w(n, 1.0);
    const RffBank bx = sample_rff_bank(4, 61), by = sample_rff_bank(4, 62);
    const double observed = sce_statistic(xa, xb, w, bx, by);
    const auto null = permutation_null(xa, xb, bx, by, 300, 71);
    CHECK(observed > null[static_cast<std::size_t>(0.99 * 300)]);
}

TEST_CASE("sce statistic stays inside the permutation null for independent columns") {
    const std::size_t n = 200;
    std::size_t inside = 0;
    const std::size_t trials = 20;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto xa = randn(n, 100 + t);
        const auto xb = randn(n, 200 + t);
        std::vector<double> w(n, 1.0);
        const RffBank bx = sample_rff_bank(4, 300 + t), by = sample_rff_bank(4, 400 + t);
        const double observed = sce_statistic(xa, xb, w, bx, by);
        const auto null = permutation_null(xa, xb, bx, by, 200, 500 + t);
        if (observed < null[static_cast<std::size_t>(0.95 * 200)]) ++inside;
    }
    CHECK(inside >= trials * 9 / 10);
}

TEST_CASE("weight optimization on a single column is a no-op") {
    Eigen::MatrixXd fm = Eigen::MatrixXd::Random(16, 1);
    GlobalMemory memory;
    SceConfig cfg;
    const auto r = optimize_weights(fm, memory, cfg);
    CHECK(r.objective_initial == 0.0);
    CHECK(r.objective_final == 0.0);
    for (Eigen::Index i = 0; i < r.weights.size(); ++i) CHECK(r.weights(i) == 1.0);
}

TEST_CASE("weight optimization shrinks the objective on correlated columns") {
    const std::size_t n = 64;
    const auto base = randn(n, 81);
    Eigen::MatrixXd fm(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        fm(static_cast<Eigen::Index>(i), 0) = base[i];
        fm(static_cast<Eigen::Index>(i), 1) = base[i];
    }
    GlobalMemory memory;
    SceConfig cfg;
    cfg.balancing_epochs = 1;  // single bank size keeps the trace comparable
    cfg.steps = 25;
    cfg.lr = 0.05;
    cfg.seed = 17;
    const auto r = optimize_weights(fm, memory, cfg);
    CHECK(r.objective_final < r.objective_initial);
    CHECK(std::abs(r.weights.mean() - 1.0) <= 1e-9);
    CHECK(r.weights.minCoeff() >= 1e-4);

    const auto r2 = optimize_weights(fm, memory, cfg);
    for (Eigen::Index i = 0; i < r.weights.size(); ++i) CHECK(r.weights(i) == r2.weights(i));
}

TEST_CASE("weight optimization leaves independent columns near uniform") {
    const std::size_t n = 64;
    std::size_t good = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto col = randn(n, 900 + s);
        std::vector<double> perm = col;
        auto eng = make_engine(950 + s, 0x41);
        std::shuffle(perm.begin(), perm.end(), eng);
        Eigen::MatrixXd fm(n, 2);
        for (std::size_t i = 0; i < n; ++i) {
            fm(static_cast<Eigen::Index>(i), 0) = col[i];
            fm(static_cast<Eigen::Index>(i), 1) = perm[i];
        }
        GlobalMemory memory;
        SceConfig cfg;
        cfg.steps = 10;
        cfg.lr = 0.01;
        cfg.seed = 1000 + s;
        const auto r = optimize_weights(fm, memory, cfg);
        bool ok = true;
        for (Eigen::Index i = 0; i < r.weights.size(); ++i)
            if (std::abs(r.weights(i) - 1.0) > 0.2) ok = false;
        if (ok) ++good;
    }
    CHECK(good >= 9);
}

TEST_CASE("weight projection invariants hold even under aggressive steps") {
    const std::size_t n = 32;
    const auto base = randn(n, 1234);
    Eigen::MatrixXd fm(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        fm(static_cast<Eigen::Index>(i), 0) = base[i];
        fm(static_cast<Eigen::Index>(i), 1) = base[i] * 2.0 + 1.0;
        fm(static_cast<Eigen::Index>(i), 2) = -base[i];
    }
    GlobalMemory memory;
    SceConfig cfg;
    cfg.lr = 5.0;  // deliberately overshoots so the floor engages
    cfg.steps = 8;
    const auto r = optimize_weights(fm, memory, cfg);
    CHECK(std::abs(r.weights.mean() - 1.0) <= 1e-9);
    CHECK(r.weights.minCoeff() >= 1e-4);
}

TEST_CASE("global memory recursion") {
    GlobalMemory mem;
    Eigen::MatrixXd fm1(1, 1), fm2(1, 1);
    fm1 << 2.0;
    fm2 << 4.0;
    Eigen::VectorXd w1(1), w2(1);
    w1 << 1.5;
    w2 << 0.5;

    update_memory(mem, fm1, w1);
    CHECK(mem.features(0, 0) == 1.0);
    CHECK(mem.weights(0) == 0.75);

    update_memory(mem, fm2, w2);
    CHECK(mem.features(0, 0) == 2.5);
    CHECK(mem.weights(0) == doctest::Approx(0.625).epsilon(1e-15));

    // constant batches converge geometrically to the fixed point
    GlobalMemory mc;
    Eigen::MatrixXd c(2, 2);
    c << 3, -1, 0.5, 2;
    Eigen::VectorXd wc(2);
    wc << 1, 1;
    for (int i = 0; i < 40; ++i) update_memory(mc, c, wc);
    CHECK((mc.features - c).cwiseAbs().maxCoeff() < 1e-9);

    Eigen::MatrixXd wrong(2, 3);
    wrong.setZero();
    Eigen::VectorXd w3 = Eigen::VectorXd::Ones(2);
    CHECK_THROWS_AS(update_memory(mc, wrong, w3), DimensionError);

    // batch height changes are absorbed by subsampling
    GlobalMemory mh;
    Eigen::MatrixXd f4 = Eigen::MatrixXd::Constant(4, 2, 1.0);
    update_memory(mh, f4, Eigen::VectorXd::Ones(4));
    Eigen::MatrixXd f6 = Eigen::MatrixXd::Constant(6, 2, 3.0);
    update_memory(mh, f6, Eigen::VectorXd::Ones(6));
    CHECK(mh.features.rows() == 4);
    CHECK(mh.features(0, 0) == doctest::Approx(1.75));  // (1/2)(0.5 + 3)
    Eigen::MatrixXd f2 = Eigen::MatrixXd::Constant(2, 2, 5.0);
    update_memory(mh, f2, Eigen::VectorXd::Ones(2));
    CHECK(mh.features.rows() == 4);
}
