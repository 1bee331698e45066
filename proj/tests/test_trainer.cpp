#include "doctest.h"

#include <cmath>

#include "ctrkit/checkpoint.hpp"
#include "ctrkit/grad_check.hpp"
#include "ctrkit/trainer.hpp"
#include "test_util.hpp"

using namespace ctrkit;
using testutil::TempDir;
using testutil::write_file;

namespace {

FieldSchema tiny_schema(std::size_t fields, std::uint32_t vocab) {
    FieldSchema s;
    for (std::size_t i = 0; i < fields; ++i) s.fields.push_back({"f" + std::to_string(i), vocab});
    return s;
}

ModelConfig micro_config() {
    ModelConfig mc;
    mc.embed_dim = 2;
    mc.depth_deep = 2;
    mc.depth_shallow = 1;
    mc.d_out = 6;  // divisible by 3 fields and 1 chunk
    mc.chunks = 1;
    return mc;
}

EncodedDataset micro_data(std::size_t n, std::size_t f, std::uint32_t vocab, std::uint64_t seed) {
    EncodedDataset ds;
    ds.f = f;
    ds.n = n;
    auto eng = std::mt19937_64(seed);
    std::uniform_int_distribution<std::uint32_t> tok(0, vocab - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t first = 0;
        for (std::size_t j = 0; j < f; ++j) {
            const std::uint32_t t = tok(eng);
            if (j == 0) first = t;
            ds.indices.push_back(t);
        }
        ds.labels.push_back(first % 2);  // learnable rule
    }
    return ds;
}

}  // namespace

TEST_CASE("weighted bce hand cases") {
    std::vector<std::uint8_t> y1{1};
    std::vector<double> near_one{1.0 - 1e-9}, half{0.5}, w1{1.0}, w2{2.0};
    CHECK(weighted_bce(y1, near_one, w1) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(weighted_bce(y1, half, w1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(weighted_bce(y1, half, w2) == doctest::Approx(2.0 * weighted_bce(y1, half, w1)).epsilon(1e-12));

    std::vector<std::uint8_t> bad{1, 0};
    CHECK_THROWS_AS((void)weighted_bce(bad, half, w1), DimensionError);
}

TEST_CASE("adam first step magnitude and zero-gradient fixpoint") {
    ParamStore ps;
    const int id = ps.add("theta", Array::scalar(1.0));
    GradStore gs(ps);
    Adam adam(ps, 0.1);

    gs.array(id).data[0] = 6.0;
    adam.step(ps, gs);
    // bias-corrected first step is lr * sign(gradient) up to epsilon
    CHECK(ps.array(id).data[0] == doctest::Approx(0.9).epsilon(1e-6));

    ParamStore ps2;
    const int id2 = ps2.add("theta", Array::scalar(0.42));
    GradStore gz(ps2);
    Adam adam2(ps2, 0.1);
    adam2.step(ps2, gz);
    CHECK(ps2.array(id2).data[0] == 0.42);

    // identical runs produce identical trajectories
    auto run = [] {
        ParamStore p;
        const int i = p.add("w", Array::matrix(1, 2, {0.5, -0.25}));
        GradStore g(p);
        Adam a(p, 0.05);
        for (int s = 0; s < 5; ++s) {
            g.array(i).data[0] = 0.3 * (s + 1);
            g.array(i).data[1] = -0.7;
            a.step(p, g);
        }
        return p.array(i).data;
    };
    CHECK(run() == run());
}

TEST_CASE("micro model end-to-end gradient check") {
    const FieldSchema schema = tiny_schema(3, 4);
    Model model(schema, micro_config(), 7);
    const EncodedDataset ds = micro_data(8, 3, 4, 21);

    // fixed non-uniform sample weights exercise the weighting path
    std::vector<double> w{1.2, 0.8, 1.0, 0.5, 1.5, 1.0, 0.9, 1.1};

    const double err = grad_check_params(model.params(), [&](Graph& g) {
        Var total = g.constant(0.0);
        for (std::size_t i = 0; i < ds.n; ++i) {
            Var p = g.clamp(model.forward(g, ds.row(i)), 1e-7, 1.0 - 1e-7);
            Var term = ds.labels[i] ? g.log(p) : g.log(g.add_scalar(g.neg(p), 1.0));
            total = g.add(total, g.scale(term, -w[i]));
        }
        return total;
    }, 1e-5);
    CHECK(err < 1e-3);
}

TEST_CASE("fit stops after patience epochs without improvement") {
    const FieldSchema schema = tiny_schema(3, 4);
    ModelConfig mc = micro_config();
    TrainConfig cfg;
    cfg.model = mc;
    cfg.batch_size = 64;
    cfg.learning_rate = 1e-13;  // effectively frozen, AUC can never improve
    cfg.max_epochs = 10;
    cfg.patience = 1;
    cfg.sce_enabled = false;
    cfg.threads = 1;
    cfg.seed = 3;

    Model model(schema, mc, 5);
    const EncodedDataset train = micro_data(128, 3, 4, 31);
    const EncodedDataset val = micro_data(64, 3, 4, 32);
    const FitResult r = fit(model, train, val, cfg);
    CHECK(r.history.size() == 2);
    CHECK(r.best_epoch == 1);
}

TEST_CASE("fit is deterministic and loss decreases on learnable data") {
    const FieldSchema schema = tiny_schema(3, 4);
    ModelConfig mc = micro_config();
    TrainConfig cfg;
    cfg.model = mc;
    cfg.batch_size = 64;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 3;
    cfg.patience = 3;
    cfg.sce_enabled = false;
    cfg.threads = 2;
    cfg.seed = 11;

    const EncodedDataset train = micro_data(256, 3, 4, 41);
    const EncodedDataset val = micro_data(96, 3, 4, 42);

    Model m1(schema, mc, 13);
    const FitResult r1 = fit(m1, train, val, cfg);
    Model m2(schema, mc, 13);
    const FitResult r2 = fit(m2, train, val, cfg);

    REQUIRE(r1.history.size() == r2.history.size());
    for (std::size_t i = 0; i < r1.history.size(); ++i) {
        CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
        CHECK(r1.history[i].val_auc == r2.history[i].val_auc);
        CHECK(r1.history[i].val_logloss == r2.history[i].val_logloss);
    }

    CHECK(r1.history.size() == 3);
    CHECK(r1.history[2].train_loss < r1.history[0].train_loss);
}

TEST_CASE("disabling sce equals training with unit weights") {
    const FieldSchema schema = tiny_schema(3, 4);
    ModelConfig mc = micro_config();
    TrainConfig cfg;
    cfg.model = mc;
    cfg.batch_size = 16;  // whole dataset in one batch
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 1;
    cfg.patience = 5;
    cfg.sce_enabled = false;
    cfg.threads = 1;
    cfg.seed = 17;

    const EncodedDataset train = micro_data(8, 3, 4, 51);
    const EncodedDataset val = micro_data(32, 3, 4, 52);

    // expected first-epoch loss: unit-weight bce of the initial model
    Model reference(schema, mc, 23);
    const std::vector<double> scores = predict_scores(reference, train, 1);
    std::vector<double> ones(train.n, 1.0);
    const double expected = weighted_bce(train.labels, scores, ones) / static_cast<double>(train.n);

    Model model(schema, mc, 23);
    const FitResult r = fit(model, train, val, cfg);
    CHECK(r.history[0].train_loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("fit with sce runs and keeps weights influencing the loss") {
    const FieldSchema schema = tiny_schema(3, 4);
    ModelConfig mc = micro_config();
    TrainConfig cfg;
    cfg.model = mc;
    cfg.batch_size = 32;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 2;
    cfg.patience = 5;
    cfg.sce_enabled = true;
    cfg.sce.balancing_epochs = 2;
    cfg.sce.steps = 3;
    cfg.sce.max_pairs = 16;
    cfg.sce.lr = 0.05;
    cfg.threads = 1;
    cfg.seed = 19;

    const EncodedDataset train = micro_data(64, 3, 4, 61);
    const EncodedDataset val = micro_data(48, 3, 4, 62);
    Model model(schema, mc, 29);
    const FitResult r = fit(model, train, val, cfg);
    CHECK(r.history.size() == 2);
    for (const auto& h : r.history) {
        CHECK(std::isfinite(h.train_loss));
        CHECK(h.val_auc >= 0.0);
        CHECK(h.val_auc <= 1.0);
    }
}

TEST_CASE("checkpoint round trip preserves forward outputs at float precision") {
    const FieldSchema schema = tiny_schema(3, 4);
    Model model(schema, micro_config(), 31);
    const EncodedDataset probe = micro_data(16, 3, 4, 71);
    const std::vector<double> before = predict_scores(model, probe, 1);

    TempDir dir;
    const std::string path = dir.file("model.ckpt");
    save_checkpoint(path, schema_hash(schema), "{\"note\":\"test\"}", model.params());

    const CheckpointData data = load_checkpoint(path);
    CHECK(data.schema_hash == schema_hash(schema));
    CHECK(data.config_json == "{\"note\":\"test\"}");

    Model restored(schema, micro_config(), 999);  // different init, then overwritten
    apply_checkpoint(data, restored.params());
    const std::vector<double> after = predict_scores(restored, probe, 1);
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-5));
}

TEST_CASE("checkpoint corruption and schema mismatches are refused") {
    const FieldSchema schema = tiny_schema(3, 4);
    Model model(schema, micro_config(), 37);
    TempDir dir;
    const std::string path = dir.file("m.ckpt");
    save_checkpoint(path, 0x1234, "{}", model.params());

    std::ifstream in(path, std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    write_file(dir.file("short.ckpt"), all.substr(0, all.size() / 2));
    CHECK_THROWS_AS((void)load_checkpoint(dir.file("short.ckpt")), FormatError);

    write_file(dir.file("junk.ckpt"), "NOTACKPT" + all);
    CHECK_THROWS_AS((void)load_checkpoint(dir.file("junk.ckpt")), FormatError);

    // parameter sets that do not line up are refused
    const CheckpointData data = load_checkpoint(path);
    FieldSchema other = tiny_schema(3, 9);  // different vocab sizes
    Model wrong(other, micro_config(), 37);
    CHECK_THROWS_AS(apply_checkpoint(data, wrong.params()), SchemaError);
}
