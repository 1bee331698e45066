#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "ctrkit/errors.hpp"

namespace ctrkit {

// Bank of random cosine features h(x) = sqrt(2) cos(w x + phi) approximating
// a shift-invariant kernel; w ~ N(0,1), phi ~ U(0, 2pi).
struct RffBank {
    std::vector<double> w;
    std::vector<double> phi;
    std::size_t size() const { return w.size(); }
};

RffBank sample_rff_bank(std::size_t n, std::uint64_t seed);

// [len x n] matrix with entry (k, i) = sqrt(2) cos(w_i x_k + phi_i).
Eigen::MatrixXd rff_map(std::span<const double> values, const RffBank& bank);

// (1/n) sum w u v - [(1/n) sum w u] [(1/n) sum w v]
double weighted_cov(std::span<const double> u, std::span<const double> v, std::span<const double> weights);

// Squared Frobenius norm of the weighted cross-covariance between the two
// random-feature maps of xa and xb. Columns are standardized (unweighted
// z-score over the given samples) before mapping; constant columns map to
// zero features and contribute nothing.
double sce_statistic(std::span<const double> xa, std::span<const double> xb,
                     std::span<const double> weights, const RffBank& bank_x, const RffBank& bank_y);

// ||K_X - K_Y||_F with Laplacian kernel entries exp(-gamma |z_a - z_b|).
// Exact quadratic-cost statistic; used as the oracle for the RFF path.
double exact_sce(std::span<const double> x, std::span<const double> y, double gamma);

// Running averages of batch features and weights. Row count is fixed by the
// first update; later batches are row-subsampled (or padded) to match.
struct GlobalMemory {
    Eigen::MatrixXd features;  // n_mem x m
    Eigen::VectorXd weights;   // n_mem
    std::size_t iteration = 0;

    bool initialized() const { return iteration > 0; }
};

void update_memory(GlobalMemory& memory, const Eigen::MatrixXd& fm, const Eigen::VectorXd& w);

struct SceConfig {
    std::size_t balancing_epochs = 5;  // random-feature count counts down from here to 1
    std::size_t steps = 20;            // gradient steps per balancing iteration
    double lr = 0.01;
    std::size_t max_pairs = 2048;      // column pairs sampled per balancing iteration
    double gamma = 1.0;                // bandwidth of the exact oracle only
    std::uint64_t seed = 1;

    void validate() const;
};

struct WeightOptResult {
    Eigen::VectorXd weights;             // batch weights; mean 1, all >= 1e-4
    double objective_initial = 0.0;
    double objective_final = 0.0;
    std::vector<double> trace;           // objective after each step, all iterations
};

// Optimizes per-sample batch weights to shrink pairwise dependence between
// feature columns of [memory.features; fm]. Memory rows keep their stored
// frozen weights; only the batch entries move. Deterministic given
// (fm, memory, cfg).
WeightOptResult optimize_weights(const Eigen::MatrixXd& fm, const GlobalMemory& memory,
                                 const SceConfig& cfg);

}  // namespace ctrkit
