#include "ctrkit/bench.hpp"

#include <chrono>
#include <random>

#include "ctrkit/rng.hpp"

namespace ctrkit {

BenchReport bench_stream(StreamKind kind, std::size_t fields, std::size_t dim, std::size_t batch,
                         std::size_t reps, std::uint64_t seed, std::size_t threads) {
    if (fields == 0 || dim == 0 || batch == 0 || reps == 0)
        throw ConfigError("bench: fields, dim, batch and reps must be positive");

    constexpr std::uint32_t kVocab = 101;
    FieldSchema schema;
    for (std::size_t i = 0; i < fields; ++i)
        schema.fields.push_back({"f" + std::to_string(i), kVocab});

    ModelConfig mc;
    mc.deep_kind = kind;
    mc.shallow_kind = kind;
    mc.embed_dim = dim;
    mc.chunks = 1;
    const std::size_t per_field = std::max<std::size_t>(1, 400 / fields);
    mc.d_out = per_field * fields;

    Model model(schema, mc, seed);

    EncodedDataset rows;
    rows.f = fields;
    rows.n = batch;
    auto eng = make_engine(seed, 0xbe9c);
    std::uniform_int_distribution<std::uint32_t> tok(0, kVocab - 1);
    rows.indices.resize(batch * fields);
    for (auto& v : rows.indices) v = tok(eng);
    rows.labels.assign(batch, 0);

    BenchReport report;
    report.kind = kind;
    report.fields = fields;
    report.dim = dim;
    report.batch = batch;
    report.reps = reps;
    report.d_out = mc.d_out;
    report.params_total = model.param_count();
    std::size_t embed = 0;
    for (const auto& f : schema.fields) embed += f.vocab_size * dim;
    const std::size_t len = mc.d_out / mc.chunks;
    const std::size_t predictor = mc.chunks * (1 + 2 * len + len * len);
    report.params_streams = report.params_total - embed - predictor;

    // stream-only forwards; the predictor head is identical across kinds
    auto run_once = [&] {
        double acc = 0.0;
        for (std::size_t i = 0; i < rows.n; ++i) {
            Graph g(&model.params(), nullptr);
            auto [fd, fs] = model.forward_streams(g, rows.row(i));
            acc += g.value(fd).data[0] + g.value(fs).data[0];
        }
        return acc;
    };
    volatile double warm = run_once();  // warmup
    (void)warm;
    for (std::size_t r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        volatile double sink = run_once();
        (void)sink;
        report.seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    double total = 0.0;
    report.best_seconds = report.seconds[0];
    for (double s : report.seconds) {
        total += s;
        report.best_seconds = std::min(report.best_seconds, s);
    }
    report.mean_seconds = total / static_cast<double>(reps);
    return report;
}

}  // namespace ctrkit
