#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "ctrkit/bench.hpp"
#include "ctrkit/checkpoint.hpp"
#include "ctrkit/config_json.hpp"
#include "ctrkit/dataio.hpp"
#include "ctrkit/metrics.hpp"
#include "ctrkit/rng.hpp"
#include "ctrkit/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ctrkit;

namespace {

void atomic_write_text(const std::string& path, const std::string& payload) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp);
        out << payload;
        if (!out) throw IoError("short write to " + tmp);
    }
    fs::rename(tmp, path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct LoadedData {
    Vocab vocab;
    EncodedDataset train, val;
    bool has_test = false;
    EncodedDataset test;
};

LoadedData load_train_data(const std::string& dir, std::size_t min_freq, double val_fraction,
                           std::uint64_t seed, bool use_cache) {
    LoadedData out;
    const std::string train_csv = dir + "/train.csv";
    const std::string val_csv = dir + "/val.csv";
    const std::string test_csv = dir + "/test.csv";
    const std::string vocab_dir = dir + "/vocab";
    const std::string train_cache = dir + "/train.cache";
    const std::string val_cache = dir + "/val.cache";

    if (use_cache && fs::exists(vocab_dir + "/schema.tsv") && fs::exists(train_cache)) {
        out.vocab = load_vocab(vocab_dir);
        const std::uint64_t hash = schema_hash(out.vocab.schema);
        out.train = read_cache(train_cache, hash);
        if (fs::exists(val_cache)) out.val = read_cache(val_cache, hash);
    } else {
        if (!fs::exists(train_csv)) throw IoError("missing " + train_csv);
        out.vocab = build_vocab(train_csv, "label", min_freq);
        out.train = encode_csv(train_csv, out.vocab);
        if (fs::exists(val_csv)) out.val = encode_csv(val_csv, out.vocab);
        if (use_cache) {
            save_vocab(out.vocab, vocab_dir);
            const std::uint64_t hash = schema_hash(out.vocab.schema);
            write_cache(out.train, hash, train_cache);
            if (out.val.n > 0) write_cache(out.val, hash, val_cache);
        }
    }

    if (out.val.n == 0) {
        // carve a validation slice off the training rows
        const auto parts = split(out.train, {1.0 - val_fraction, val_fraction, 0.0}, seed);
        out.train = parts.train;
        out.val = parts.val;
    }
    if (fs::exists(test_csv)) {
        out.test = encode_csv(test_csv, out.vocab);
        out.has_test = out.test.n > 0;
    }
    return out;
}

struct LoadedModel {
    Vocab vocab;
    TrainConfig cfg;
    Model model;
};

LoadedModel load_model(const std::string& ckpt_path) {
    const CheckpointData data = load_checkpoint(ckpt_path);
    const std::string vocab_dir = (fs::path(ckpt_path).parent_path() / "vocab").string();
    Vocab vocab = load_vocab(vocab_dir);
    if (schema_hash(vocab.schema) != data.schema_hash)
        throw SchemaError("checkpoint schema hash does not match " + vocab_dir);
    TrainConfig cfg = train_config_from_json(data.config_json);
    Model model(vocab.schema, cfg.model, cfg.seed);
    apply_checkpoint(data, model.params());
    return {std::move(vocab), std::move(cfg), std::move(model)};
}

json history_line(const EpochStats& s) {
    json j;
    j["epoch"] = s.epoch;
    j["train_loss"] = s.train_loss;
    j["val_auc"] = s.val_auc;
    j["val_logloss"] = s.val_logloss;
    j["seconds"] = s.seconds;
    return j;
}

int cmd_train(const std::string& config_path, const std::string& data_dir, const std::string& out_dir,
              const std::string& overrides_json, bool use_cache) {
    TrainConfig cfg;
    std::string config_text = "{}";
    if (!config_path.empty()) config_text = read_text(config_path);
    apply_json_overrides(cfg, config_text);
    apply_json_overrides(cfg, overrides_json);  // command-line flags win

    const std::size_t min_freq = json_get_size(config_text, "min_freq", 1);
    const double val_fraction = json_get_double(config_text, "val_fraction", 0.1);

    const LoadedData data = load_train_data(data_dir, min_freq, val_fraction, cfg.seed, use_cache);
    cfg.validate(data.vocab.schema.field_count());

    Model model(data.vocab.schema, cfg.model, cfg.seed);
    std::string history_text;
    const FitResult result = fit(model, data.train, data.val, cfg, [&](const EpochStats& s) {
        const std::string line = history_line(s).dump();
        std::cout << line << "\n" << std::flush;
        history_text += line + "\n";
    });

    fs::create_directories(out_dir);
    save_vocab(data.vocab, out_dir + "/vocab");
    atomic_write_text(out_dir + "/history.jsonl", history_text);
    save_checkpoint(out_dir + "/model.ckpt", schema_hash(data.vocab.schema),
                    train_config_to_json(cfg), model.params());

    json summary;
    summary["best_epoch"] = result.best_epoch;
    summary["val_auc"] = result.best_val_auc;
    summary["model"] = out_dir + "/model.ckpt";
    if (data.has_test) {
        const auto scores = predict_scores(model, data.test, cfg.threads);
        summary["test_auc"] = auc(data.test.labels, scores);
        summary["test_logloss"] = logloss(data.test.labels, scores);
    }
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_dir, std::size_t threads) {
    LoadedModel lm = load_model(model_path);
    const EncodedDataset test = encode_csv(data_dir + "/test.csv", lm.vocab);
    if (test.n == 0) throw MetricError("eval: empty test set");
    const auto scores = predict_scores(lm.model, test, threads);
    json j;
    j["auc"] = auc(test.labels, scores);
    j["logloss"] = logloss(test.labels, scores);
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_synth(const std::string& out_dir, const SynthConfig& cfg) {
    write_synthetic_csv(cfg, out_dir);
    json j;
    j["out"] = out_dir;
    j["n_train"] = cfg.n_train;
    j["n_test"] = cfg.n_test;
    j["fields"] = cfg.n_causal + cfg.n_spurious;
    j["rho_train"] = cfg.rho_train;
    j["rho_test"] = cfg.rho_test;
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_bench(const std::string& stream, std::size_t fields, std::size_t dim, std::size_t batch,
              std::size_t reps, std::uint64_t seed, std::size_t threads) {
    const BenchReport r = bench_stream(parse_stream_kind(stream), fields, dim, batch, reps, seed, threads);
    json j;
    j["stream"] = stream_kind_name(r.kind);
    j["fields"] = r.fields;
    j["dim"] = r.dim;
    j["batch"] = r.batch;
    j["reps"] = r.reps;
    j["d_out"] = r.d_out;
    j["seconds"] = r.seconds;
    j["mean_seconds"] = r.mean_seconds;
    j["best_seconds"] = r.best_seconds;
    j["params_total"] = r.params_total;
    j["params_streams"] = r.params_streams;
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_correlate(const std::string& model_path, const std::string& data_dir, std::size_t columns,
                  std::size_t max_rows, const std::string& out_csv, std::uint64_t seed,
                  std::size_t threads) {
    LoadedModel lm = load_model(model_path);
    const EncodedDataset test = encode_csv(data_dir + "/test.csv", lm.vocab);
    if (test.n < 2) throw MetricError("correlate: needs at least 2 rows");

    auto eng = make_engine(seed, 0xc04e);
    std::vector<std::size_t> rows(test.n);
    std::iota(rows.begin(), rows.end(), 0);
    if (rows.size() > max_rows) {
        std::shuffle(rows.begin(), rows.end(), eng);
        rows.resize(max_rows);
        std::sort(rows.begin(), rows.end());
    }
    const Eigen::MatrixXd fm = feature_rows(lm.model, test, rows, threads);

    const std::size_t m_all = static_cast<std::size_t>(fm.cols());
    std::vector<std::size_t> cols(m_all);
    std::iota(cols.begin(), cols.end(), 0);
    if (columns < m_all) {
        std::shuffle(cols.begin(), cols.end(), eng);
        cols.resize(columns);
        std::sort(cols.begin(), cols.end());
    }

    std::vector<double> sub(rows.size() * cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            sub[i * cols.size() + j] = fm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cols[j]));
    const auto corr = feature_correlation(sub, rows.size(), cols.size());

    std::string csv;
    for (std::size_t j = 0; j < cols.size(); ++j)
        csv += (j ? "," : "") + ("c" + std::to_string(cols[j]));
    csv += "\n";
    char buf[32];
    for (std::size_t i = 0; i < cols.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.6f", corr[i * cols.size() + j]);
            csv += (j ? "," : "");
            csv += buf;
        }
        csv += "\n";
    }
    atomic_write_text(out_csv, csv);

    json j;
    j["out"] = out_csv;
    j["columns"] = cols.size();
    j["rows"] = rows.size();
    std::cout << j.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ctrkit: two-stream CTR prediction with sample-reweighted decorrelation"};
    app.require_subcommand(1);

    auto* train_cmd = app.add_subcommand("train", "train a model from CSVs in a data directory");
    std::string config_path, data_dir, out_dir;
    bool no_sce = false, use_cache = false;
    std::string stream_deep, stream_shallow;
    std::int64_t depth_deep = -1, depth_shallow = -1, seed_flag = -1, threads_flag = -1;
    train_cmd->add_option("--config", config_path, "JSON config file");
    train_cmd->add_option("--data", data_dir, "directory with train.csv [val.csv test.csv]")->required();
    train_cmd->add_option("--out", out_dir, "output directory")->required();
    train_cmd->add_option("--seed", seed_flag, "random seed");
    train_cmd->add_flag("--no-sce", no_sce, "disable sample reweighting");
    train_cmd->add_flag("--cache", use_cache, "reuse/write encoded row caches next to the CSVs");
    train_cmd->add_option("--stream-deep", stream_deep, "deep stream kind: msr|mlp|sa");
    train_cmd->add_option("--stream-shallow", stream_shallow, "shallow stream kind: msr|mlp|sa");
    train_cmd->add_option("--depth-deep", depth_deep, "deep stream depth");
    train_cmd->add_option("--depth-shallow", depth_shallow, "shallow stream depth");
    train_cmd->add_option("--threads", threads_flag, "worker threads (0 = auto)");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on test.csv");
    std::string eval_model, eval_data;
    std::int64_t eval_threads = 0;
    eval_cmd->add_option("--model", eval_model, "checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "directory with test.csv")->required();
    eval_cmd->add_option("--threads", eval_threads, "worker threads (0 = auto)");

    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic spurious-correlation dataset");
    SynthConfig synth_cfg;
    std::string synth_out;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--n-train", synth_cfg.n_train, "training rows");
    synth_cmd->add_option("--n-test", synth_cfg.n_test, "test rows");
    synth_cmd->add_option("--rho-train", synth_cfg.rho_train, "train-time copy probability");
    synth_cmd->add_option("--rho-test", synth_cfg.rho_test, "test-time copy probability");
    synth_cmd->add_option("--n-causal", synth_cfg.n_causal, "causal fields");
    synth_cmd->add_option("--n-spurious", synth_cfg.n_spurious, "spurious fields");
    synth_cmd->add_option("--vocab", synth_cfg.vocab_per_field, "token values per field");
    synth_cmd->add_option("--seed", synth_cfg.seed, "random seed");

    auto* bench_cmd = app.add_subcommand("bench", "time stream forward passes");
    std::string bench_stream_name = "msr";
    std::size_t bench_fields = 23, bench_dim = 10, bench_batch = 4096, bench_reps = 3;
    std::uint64_t bench_seed = 1;
    std::int64_t bench_threads = 0;
    bench_cmd->add_option("--stream", bench_stream_name, "msr|mlp|sa")->required();
    bench_cmd->add_option("--fields", bench_fields, "field count");
    bench_cmd->add_option("--dim", bench_dim, "embedding size");
    bench_cmd->add_option("--batch", bench_batch, "rows per repetition");
    bench_cmd->add_option("--reps", bench_reps, "timed repetitions");
    bench_cmd->add_option("--seed", bench_seed, "random seed");
    bench_cmd->add_option("--threads", bench_threads, "worker threads (0 = auto)");

    auto* corr_cmd = app.add_subcommand("correlate", "emit a feature correlation matrix CSV");
    std::string corr_model, corr_data, corr_out;
    std::size_t corr_columns = 50, corr_rows = 10000;
    std::uint64_t corr_seed = 1;
    std::int64_t corr_threads = 0;
    corr_cmd->add_option("--model", corr_model, "checkpoint path")->required();
    corr_cmd->add_option("--data", corr_data, "directory with test.csv")->required();
    corr_cmd->add_option("--columns", corr_columns, "feature columns to sample");
    corr_cmd->add_option("--rows", corr_rows, "row cap");
    corr_cmd->add_option("--out", corr_out, "output CSV path")->required();
    corr_cmd->add_option("--seed", corr_seed, "sampling seed");
    corr_cmd->add_option("--threads", corr_threads, "worker threads (0 = auto)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*train_cmd) {
            json overrides;  // flags form one more config layer
            if (seed_flag >= 0) overrides["seed"] = seed_flag;
            if (threads_flag >= 0) overrides["threads"] = threads_flag;
            if (no_sce) overrides["sce_enabled"] = false;
            if (!stream_deep.empty()) overrides["stream_deep"] = stream_deep;
            if (!stream_shallow.empty()) overrides["stream_shallow"] = stream_shallow;
            if (depth_deep > 0) overrides["depth_deep"] = depth_deep;
            if (depth_shallow > 0) overrides["depth_shallow"] = depth_shallow;
            return cmd_train(config_path, data_dir, out_dir, overrides.empty() ? "{}" : overrides.dump(),
                             use_cache);
        }
        if (*eval_cmd) return cmd_eval(eval_model, eval_data, static_cast<std::size_t>(eval_threads));
        if (*synth_cmd) return cmd_synth(synth_out, synth_cfg);
        if (*bench_cmd)
            return cmd_bench(bench_stream_name, bench_fields, bench_dim, bench_batch, bench_reps,
                             bench_seed, static_cast<std::size_t>(bench_threads));
        if (*corr_cmd)
            return cmd_correlate(corr_model, corr_data, corr_columns, corr_rows, corr_out, corr_seed,
                                 static_cast<std::size_t>(corr_threads));
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
