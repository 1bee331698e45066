#pragma once

#include <Eigen/Core>

#include <functional>
#include <span>
#include <vector>

#include "ctrkit/model.hpp"
#include "ctrkit/sce.hpp"

namespace ctrkit {

struct TrainConfig {
    ModelConfig model;
    std::size_t batch_size = 4096;
    double learning_rate = 0.001;
    std::size_t max_epochs = 100;
    std::size_t patience = 2;  // epochs of non-improving validation AUC tolerated
    bool sce_enabled = true;
    SceConfig sce;
    std::uint64_t seed = 1;
    std::size_t threads = 0;  // 0 picks hardware concurrency

    void validate(std::size_t fields) const;
};

// -sum_i w_i (y_i log p_i + (1 - y_i) log(1 - p_i)), probabilities clamped
// to [1e-7, 1 - 1e-7].
double weighted_bce(std::span<const std::uint8_t> labels, std::span<const double> probs,
                    std::span<const double> weights);

// Bias-corrected Adam over a ParamStore.
class Adam {
public:
    Adam(const ParamStore& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);
    void step(ParamStore& params, const GradStore& grads);
    std::size_t steps_taken() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<Array> m_, v_;
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_auc = 0.0;
    double val_logloss = 0.0;
    double seconds = 0.0;
};

struct FitResult {
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;
    double best_val_auc = 0.0;
};

// Full training loop: per batch, forward both streams, optionally optimize
// SCE sample weights on the detached feature map, backpropagate the weighted
// loss, update the global memory; per epoch, validate and early-stop on AUC.
// The model keeps the best-validation parameters on return.
FitResult fit(Model& model, const EncodedDataset& train, const EncodedDataset& val,
              const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch = {});

// Forward-only click probabilities.
std::vector<double> predict_scores(const Model& model, const EncodedDataset& ds, std::size_t threads);

// Rows of concat(F_d, F_s) for the given samples.
Eigen::MatrixXd feature_rows(const Model& model, const EncodedDataset& ds,
                             std::span<const std::size_t> rows, std::size_t threads);

}  // namespace ctrkit
