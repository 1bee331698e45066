#include "ctrkit/sce.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "ctrkit/rng.hpp"

namespace ctrkit {

namespace {

constexpr double kWeightFloor = 1e-4;
constexpr double kTwoPi = 6.283185307179586476925286766559;

// Zero-mean/unit-variance copy; constant columns become all-zero.
Eigen::VectorXd standardized(std::span<const double> x) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::Map<const Eigen::VectorXd> v(x.data(), n);
    const double mean = v.mean();
    const double var = (v.array() - mean).square().mean();
    Eigen::VectorXd out(n);
    if (var <= 1e-24) {
        out.setZero();
    } else {
        out = (v.array() - mean) / std::sqrt(var);
    }
    return out;
}

Eigen::MatrixXd map_standardized(const Eigen::VectorXd& z, const RffBank& bank) {
    const Eigen::Index n = z.size();
    const auto b = static_cast<Eigen::Index>(bank.size());
    Eigen::MatrixXd out(n, b);
    const double root2 = std::sqrt(2.0);
    for (Eigen::Index j = 0; j < b; ++j)
        for (Eigen::Index k = 0; k < n; ++k)
            out(k, j) = root2 * std::cos(bank.w[static_cast<std::size_t>(j)] * z(k) +
                                         bank.phi[static_cast<std::size_t>(j)]);
    return out;
}

// mean-1 projection with a hard floor; the floor can push the mean up, so
// alternate until both constraints hold
void project_weights(Eigen::VectorXd& w) {
    for (int round = 0; round < 64; ++round) {
        w = w.cwiseMax(kWeightFloor);
        const double mean = w.mean();
        w /= mean;
        if (w.minCoeff() >= kWeightFloor && std::abs(w.mean() - 1.0) <= 1e-12) return;
    }
    w = w.cwiseMax(kWeightFloor);
    w /= w.mean();
}

struct PairObjective {
    double objective = 0.0;
    Eigen::VectorXd grad;  // d objective / d w over all stacked rows
};

// || (1/n) U^T diag(w) V - ((1/n) U^T w)((1/n) V^T w)^T ||_F^2 and its
// gradient in w.
void accumulate_pair(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V, const Eigen::VectorXd& w,
                     PairObjective& acc) {
    const double n = static_cast<double>(U.rows());
    const Eigen::VectorXd mu = U.transpose() * w / n;
    const Eigen::VectorXd nu = V.transpose() * w / n;
    const Eigen::MatrixXd C =
        (U.array().colwise() * w.array()).matrix().transpose() * V / n - mu * nu.transpose();
    acc.objective += C.squaredNorm();
    const Eigen::MatrixXd UC = U * C;  // n x b
    acc.grad.noalias() += (2.0 / n) * (UC.cwiseProduct(V).rowwise().sum() - U * (C * nu) - V * (C.transpose() * mu));
}

std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(std::size_t m, std::size_t max_pairs,
                                                              std::uint64_t seed) {
    const std::size_t all = m * (m - 1) / 2;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (all <= max_pairs) {
        pairs.reserve(all);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a + 1; b < m; ++b) pairs.emplace_back(a, b);
        return pairs;
    }
    auto eng = std::mt19937_64(seed);
    std::uniform_int_distribution<std::size_t> dist(0, all - 1);
    std::unordered_set<std::size_t> taken;
    taken.reserve(max_pairs * 2);
    while (taken.size() < max_pairs) taken.insert(dist(eng));
    std::vector<std::size_t> flat(taken.begin(), taken.end());
    std::sort(flat.begin(), flat.end());
    pairs.reserve(max_pairs);
    for (std::size_t code : flat) {
        // decode the row-major upper-triangle index
        std::size_t a = 0;
        std::size_t block = m - 1;
        std::size_t rem = code;
        while (rem >= block) {
            rem -= block;
            ++a;
            --block;
        }
        pairs.emplace_back(a, a + 1 + rem);
    }
    return pairs;
}

}  // namespace

RffBank sample_rff_bank(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("rff bank: size must be positive");
    RffBank bank;
    bank.w.resize(n);
    bank.phi.resize(n);
    auto eng = std::mt19937_64(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    for (std::size_t i = 0; i < n; ++i) {
        bank.w[i] = normal(eng);
        bank.phi[i] = phase(eng);
    }
    return bank;
}

Eigen::MatrixXd rff_map(std::span<const double> values, const RffBank& bank) {
    const auto n = static_cast<Eigen::Index>(values.size());
    const auto b = static_cast<Eigen::Index>(bank.size());
    Eigen::MatrixXd out(n, b);
    const double root2 = std::sqrt(2.0);
    for (Eigen::Index j = 0; j < b; ++j)
        for (Eigen::Index k = 0; k < n; ++k)
            out(k, j) = root2 * std::cos(bank.w[static_cast<std::size_t>(j)] * values[static_cast<std::size_t>(k)] +
                                         bank.phi[static_cast<std::size_t>(j)]);
    return out;
}

double weighted_cov(std::span<const double> u, std::span<const double> v, std::span<const double> weights) {
    if (u.size() != v.size() || u.size() != weights.size())
        throw DimensionError("weighted_cov: length mismatch");
    if (u.empty()) throw DimensionError("weighted_cov: empty input");
    const double n = static_cast<double>(u.size());
    double suv = 0.0, su = 0.0, sv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        suv += weights[i] * u[i] * v[i];
        su += weights[i] * u[i];
        sv += weights[i] * v[i];
    }
    return suv / n - (su / n) * (sv / n);
}

double sce_statistic(std::span<const double> xa, std::span<const double> xb,
                     std::span<const double> weights, const RffBank& bank_x, const RffBank& bank_y) {
    if (xa.size() != xb.size() || xa.size() != weights.size())
        throw DimensionError("sce_statistic: length mismatch");
    const Eigen::MatrixXd U = map_standardized(standardized(xa), bank_x);
    const Eigen::MatrixXd V = map_standardized(standardized(xb), bank_y);
    double stat = 0.0;
    for (Eigen::Index i = 0; i < U.cols(); ++i)
        for (Eigen::Index j = 0; j < V.cols(); ++j) {
            const double c = weighted_cov({U.col(i).data(), xa.size()}, {V.col(j).data(), xb.size()}, weights);
            stat += c * c;
        }
    return stat;
}

double exact_sce(std::span<const double> x, std::span<const double> y, double gamma) {
    if (x.size() != y.size()) throw DimensionError("exact_sce: length mismatch");
    const std::size_t n = x.size();
    double acc = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            const double kx = std::exp(-gamma * std::abs(x[a] - x[b]));
            const double ky = std::exp(-gamma * std::abs(y[a] - y[b]));
            acc += (kx - ky) * (kx - ky);
        }
    return std::sqrt(acc);
}

void update_memory(GlobalMemory& memory, const Eigen::MatrixXd& fm, const Eigen::VectorXd& w) {
    if (fm.rows() != w.size()) throw DimensionError("update_memory: rows and weights disagree");
    if (fm.rows() == 0) throw DimensionError("update_memory: empty batch");
    if (!memory.initialized()) {
        memory.features = 0.5 * fm;
        memory.weights = 0.5 * w;
        memory.iteration = 1;
        return;
    }
    if (fm.cols() != memory.features.cols()) throw DimensionError("update_memory: feature width changed");

    const Eigen::Index n_mem = memory.features.rows();
    if (fm.rows() == n_mem) {
        memory.features = 0.5 * (memory.features + fm);
        memory.weights = 0.5 * (memory.weights + w);
    } else {
        // deterministic row subsample (or resample) to the stored height
        auto eng = make_engine(0x919, memory.iteration);
        std::vector<Eigen::Index> idx;
        idx.reserve(static_cast<std::size_t>(n_mem));
        if (fm.rows() > n_mem) {
            std::vector<Eigen::Index> all(static_cast<std::size_t>(fm.rows()));
            std::iota(all.begin(), all.end(), 0);
            std::shuffle(all.begin(), all.end(), eng);
            idx.assign(all.begin(), all.begin() + n_mem);
            std::sort(idx.begin(), idx.end());
        } else {
            std::uniform_int_distribution<Eigen::Index> dist(0, fm.rows() - 1);
            for (Eigen::Index i = 0; i < n_mem; ++i) idx.push_back(dist(eng));
            std::sort(idx.begin(), idx.end());
        }
        for (Eigen::Index i = 0; i < n_mem; ++i) {
            memory.features.row(i) = 0.5 * (memory.features.row(i) + fm.row(idx[static_cast<std::size_t>(i)]));
            memory.weights(i) = 0.5 * (memory.weights(i) + w(idx[static_cast<std::size_t>(i)]));
        }
    }
    ++memory.iteration;
}

void SceConfig::validate() const {
    if (balancing_epochs == 0) throw ConfigError("sce: balancing_epochs must be >= 1");
    if (steps == 0) throw ConfigError("sce: steps must be positive");
    if (lr <= 0) throw ConfigError("sce: lr must be positive");
    if (max_pairs == 0) throw ConfigError("sce: max_pairs must be positive");
    if (gamma <= 0) throw ConfigError("sce: gamma must be positive");
}

WeightOptResult optimize_weights(const Eigen::MatrixXd& fm, const GlobalMemory& memory,
                                 const SceConfig& cfg) {
    cfg.validate();
    const Eigen::Index n_batch = fm.rows();
    const Eigen::Index m = fm.cols();
    if (m < 1) throw ConfigError("optimize_weights: feature matrix has no columns");
    if (n_batch == 0) throw ConfigError("optimize_weights: empty batch");

    WeightOptResult result;
    result.weights = Eigen::VectorXd::Ones(n_batch);
    if (m == 1) return result;  // no pairs, nothing to optimize

    const Eigen::Index n_mem = memory.initialized() ? memory.features.rows() : 0;
    const Eigen::Index n = n_mem + n_batch;

    Eigen::MatrixXd stacked(n, m);
    if (n_mem > 0) stacked.topRows(n_mem) = memory.features;
    stacked.bottomRows(n_batch) = fm;
    for (Eigen::Index c = 0; c < m; ++c)
        stacked.col(c) = standardized({stacked.col(c).data(), static_cast<std::size_t>(n)});

    Eigen::VectorXd w_full(n);
    if (n_mem > 0) w_full.head(n_mem) = memory.weights;
    w_full.tail(n_batch).setOnes();

    bool first_eval = true;
    for (std::size_t bal = cfg.balancing_epochs; bal >= 1; --bal) {
        const std::uint64_t tag = (static_cast<std::uint64_t>(memory.iteration + 1) << 8) |
                                  static_cast<std::uint64_t>(bal);
        const RffBank bank_x = sample_rff_bank(bal, derive_seed(cfg.seed, tag * 2));
        const RffBank bank_y = sample_rff_bank(bal, derive_seed(cfg.seed, tag * 2 + 1));
        const auto pairs = sample_pairs(static_cast<std::size_t>(m), cfg.max_pairs,
                                        derive_seed(cfg.seed, tag * 2 + 0x9a17));

        // feature maps are fixed for the whole iteration; build them once
        std::unordered_map<std::size_t, Eigen::MatrixXd> maps_x, maps_y;
        for (const auto& [a, b] : pairs) {
            if (!maps_x.count(a)) maps_x.emplace(a, map_standardized(stacked.col(static_cast<Eigen::Index>(a)), bank_x));
            if (!maps_y.count(b)) maps_y.emplace(b, map_standardized(stacked.col(static_cast<Eigen::Index>(b)), bank_y));
        }

        for (std::size_t step = 0; step < cfg.steps; ++step) {
            PairObjective acc;
            acc.grad = Eigen::VectorXd::Zero(n);
            for (const auto& [a, b] : pairs) accumulate_pair(maps_x.at(a), maps_y.at(b), w_full, acc);
            result.trace.push_back(acc.objective);
            if (first_eval) {
                result.objective_initial = acc.objective;
                first_eval = false;
            }
            Eigen::VectorXd w_batch = w_full.tail(n_batch) - cfg.lr * acc.grad.tail(n_batch);
            project_weights(w_batch);
            w_full.tail(n_batch) = w_batch;
        }

        // closing value for this iteration's objective
        PairObjective closing;
        closing.grad = Eigen::VectorXd::Zero(n);
        for (const auto& [a, b] : pairs) accumulate_pair(maps_x.at(a), maps_y.at(b), w_full, closing);
        result.objective_final = closing.objective;
        result.trace.push_back(closing.objective);
    }

    result.weights = w_full.tail(n_batch);
    return result;
}

}  // namespace ctrkit
