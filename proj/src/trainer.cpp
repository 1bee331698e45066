#include "ctrkit/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "ctrkit/metrics.hpp"
#include "ctrkit/rng.hpp"

namespace ctrkit {

namespace {

// Work is split into a fixed number of contiguous groups so that results do
// not depend on how many threads execute them; reductions run in group order.
constexpr std::size_t kGradGroups = 16;

std::size_t pick_threads(std::size_t requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void parallel_groups(std::size_t n_items, std::size_t n_groups, std::size_t threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n_items == 0) return;
    n_groups = std::min(n_groups, n_items);
    const std::size_t per = (n_items + n_groups - 1) / n_groups;
    auto run_group = [&](std::size_t group) {
        const std::size_t lo = group * per;
        const std::size_t hi = std::min(n_items, lo + per);
        if (lo < hi) fn(group, lo, hi);
    };
    threads = std::min(threads, n_groups);
    if (threads <= 1) {
        for (std::size_t g = 0; g < n_groups; ++g) run_group(g);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            while (true) {
                const std::size_t g = next.fetch_add(1);
                if (g >= n_groups) return;
                run_group(g);
            }
        });
    for (auto& th : pool) th.join();
}

Var sample_loss(Graph& g, Var prob, std::uint8_t label, double weight) {
    Var p = g.clamp(prob, 1e-7, 1.0 - 1e-7);
    Var term = label ? g.log(p) : g.log(g.add_scalar(g.neg(p), 1.0));
    return g.scale(term, -weight);
}

struct Snapshot {
    std::vector<Array> arrays;
};

Snapshot take_snapshot(const ParamStore& ps) {
    Snapshot s;
    s.arrays.reserve(static_cast<std::size_t>(ps.count()));
    for (int i = 0; i < ps.count(); ++i) s.arrays.push_back(ps.array(i));
    return s;
}

void restore_snapshot(ParamStore& ps, const Snapshot& s) {
    for (int i = 0; i < ps.count(); ++i) ps.array(i) = s.arrays[static_cast<std::size_t>(i)];
}

}  // namespace

void TrainConfig::validate(std::size_t fields) const {
    model.validate(fields);
    if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
    if (learning_rate <= 0) throw ConfigError("train: learning_rate must be positive");
    if (max_epochs == 0) throw ConfigError("train: max_epochs must be positive");
    if (patience == 0) throw ConfigError("train: patience must be positive");
    if (sce_enabled) sce.validate();
}

double weighted_bce(std::span<const std::uint8_t> labels, std::span<const double> probs,
                    std::span<const double> weights) {
    if (labels.size() != probs.size() || labels.size() != weights.size())
        throw DimensionError("weighted_bce: length mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = std::min(1.0 - 1e-7, std::max(1e-7, probs[i]));
        loss -= weights[i] * (labels[i] ? std::log(p) : std::log(1.0 - p));
    }
    return loss;
}

Adam::Adam(const ParamStore& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(static_cast<std::size_t>(params.count()));
    v_.reserve(static_cast<std::size_t>(params.count()));
    for (int i = 0; i < params.count(); ++i) {
        m_.emplace_back(params.array(i).shape, 0.0);
        v_.emplace_back(params.array(i).shape, 0.0);
    }
}

void Adam::step(ParamStore& params, const GradStore& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (int i = 0; i < params.count(); ++i) {
        Array& p = params.array(i);
        const Array& g = grads.array(i);
        Array& m = m_[static_cast<std::size_t>(i)];
        Array& v = v_[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m.data[k] = beta1_ * m.data[k] + (1.0 - beta1_) * g.data[k];
            v.data[k] = beta2_ * v.data[k] + (1.0 - beta2_) * g.data[k] * g.data[k];
            const double mhat = m.data[k] / bc1;
            const double vhat = v.data[k] / bc2;
            p.data[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

std::vector<double> predict_scores(const Model& model, const EncodedDataset& ds, std::size_t threads) {
    std::vector<double> scores(ds.n, 0.0);
    parallel_groups(ds.n, kGradGroups * 4, pick_threads(threads), [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Graph g(&model.params(), nullptr);
            scores[i] = g.value(model.forward(g, ds.row(i))).data[0];
        }
    });
    return scores;
}

Eigen::MatrixXd feature_rows(const Model& model, const EncodedDataset& ds,
                             std::span<const std::size_t> rows, std::size_t threads) {
    Eigen::MatrixXd fm(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(2 * model.config().d_out));
    parallel_groups(rows.size(), kGradGroups * 4, pick_threads(threads), [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Graph g(&model.params(), nullptr);
            auto [fd, fs] = model.forward_streams(g, ds.row(rows[i]));
            const Array& fdv = g.value(fd);
            const Array& fsv = g.value(fs);
            for (std::size_t c = 0; c < fdv.size(); ++c)
                fm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = fdv.data[c];
            for (std::size_t c = 0; c < fsv.size(); ++c)
                fm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(fdv.size() + c)) = fsv.data[c];
        }
    });
    return fm;
}

FitResult fit(Model& model, const EncodedDataset& train, const EncodedDataset& val,
              const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch) {
    cfg.validate(model.field_count());
    if (train.n == 0) throw ConfigError("fit: empty training set");
    if (val.n == 0) throw ConfigError("fit: empty validation set");
    const std::size_t threads = pick_threads(cfg.threads);

    Adam adam(model.params(), cfg.learning_rate);
    GlobalMemory memory;
    std::vector<GradStore> group_grads;
    for (std::size_t i = 0; i < kGradGroups; ++i) group_grads.emplace_back(model.params());
    GradStore total(model.params());

    FitResult result;
    Snapshot best = take_snapshot(model.params());
    std::size_t bad_epochs = 0;

    std::vector<std::size_t> order(train.n);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        auto eng = make_engine(cfg.seed, 0xe90c ^ epoch);
        std::shuffle(order.begin(), order.end(), eng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train.n; start += cfg.batch_size) {
            const std::size_t n_b = std::min(cfg.batch_size, train.n - start);
            std::span<const std::size_t> batch(order.data() + start, n_b);

            // sample weights from the detached feature map
            Eigen::VectorXd weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n_b));
            Eigen::MatrixXd fm;
            if (cfg.sce_enabled) {
                fm = feature_rows(model, train, batch, threads);
                weights = optimize_weights(fm, memory, cfg.sce).weights;
            }

            // weighted loss backward, gradients accumulated per fixed group
            std::vector<double> group_loss(kGradGroups, 0.0);
            for (auto& gs : group_grads) gs.zero();
            parallel_groups(n_b, kGradGroups, threads, [&](std::size_t grp, std::size_t lo, std::size_t hi) {
                GradStore& gs = group_grads[grp];
                double loss_acc = 0.0;
                for (std::size_t i = lo; i < hi; ++i) {
                    Graph g(&model.params(), &gs);
                    Var prob = model.forward(g, train.row(batch[i]));
                    Var loss = sample_loss(g, prob, train.labels[batch[i]],
                                           weights(static_cast<Eigen::Index>(i)));
                    g.backward(loss);
                    loss_acc += g.value(loss).data[0];
                }
                group_loss[grp] = loss_acc;
            });

            total.zero();
            double batch_loss = 0.0;
            for (std::size_t grp = 0; grp < kGradGroups; ++grp) {
                total.add(group_grads[grp]);
                batch_loss += group_loss[grp];
            }
            if (!std::isfinite(batch_loss))
                throw DivergenceError("fit: non-finite loss in epoch " + std::to_string(epoch) +
                                      " at row offset " + std::to_string(start));
            epoch_loss += batch_loss;

            adam.step(model.params(), total);
            if (cfg.sce_enabled) update_memory(memory, fm, weights);
        }

        // validation
        const std::vector<double> val_scores = predict_scores(model, val, threads);
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss / static_cast<double>(train.n);
        stats.val_auc = auc(val.labels, val_scores);
        stats.val_logloss = logloss(val.labels, val_scores);
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats);

        if (result.best_epoch == 0 || stats.val_auc > result.best_val_auc) {
            result.best_epoch = epoch;
            result.best_val_auc = stats.val_auc;
            best = take_snapshot(model.params());
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs >= cfg.patience) break;
        }
    }

    restore_snapshot(model.params(), best);
    return result;
}

}  // namespace ctrkit
