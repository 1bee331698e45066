#include "ctrkit/model.hpp"

#include <cmath>

#include "ctrkit/rng.hpp"

namespace ctrkit {

StreamKind parse_stream_kind(const std::string& name) {
    if (name == "msr") return StreamKind::Msr;
    if (name == "mlp") return StreamKind::Mlp;
    if (name == "sa") return StreamKind::Sa;
    throw ConfigError("unknown stream kind '" + name + "' (expected msr, mlp or sa)");
}

std::string stream_kind_name(StreamKind kind) {
    switch (kind) {
        case StreamKind::Msr: return "msr";
        case StreamKind::Mlp: return "mlp";
        case StreamKind::Sa: return "sa";
    }
    return "?";
}

void ModelConfig::validate(std::size_t fields) const {
    if (fields == 0) throw ConfigError("model: no fields");
    if (embed_dim == 0 || d_out == 0 || chunks == 0) throw ConfigError("model: zero-sized dimension");
    if (depth_deep == 0 || depth_shallow == 0) throw ConfigError("model: stream depth must be >= 1");
    if (d_out % fields != 0)
        throw ConfigError("model: d_out " + std::to_string(d_out) + " not divisible by field count " +
                          std::to_string(fields));
    if (d_out % chunks != 0)
        throw ConfigError("model: d_out " + std::to_string(d_out) + " not divisible by chunk count " +
                          std::to_string(chunks));
    if (sa_heads == 0 || embed_dim % sa_heads != 0)
        throw ConfigError("model: attention heads must divide embed_dim");
    if (mlp_deep.empty() || mlp_shallow.empty()) throw ConfigError("model: mlp sizes must be non-empty");
}

namespace {

Array uniform_init(Shape shape, std::size_t fan_in, std::mt19937_64& eng) {
    Array a(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : a.data) v = dist(eng);
    return a;
}

}  // namespace

Model::Model(FieldSchema schema, ModelConfig cfg, std::uint64_t seed)
    : schema_(std::move(schema)), cfg_(std::move(cfg)) {
    cfg_.validate(schema_.field_count());
    auto eng = make_engine(seed, 0x30de1);
    const std::size_t d = cfg_.embed_dim;

    for (const auto& field : schema_.fields)
        embed_ids_.push_back(params_.add("embed." + field.name,
                                         uniform_init({field.vocab_size, d}, d, eng)));

    deep_ = init_stream("deep", cfg_.deep_kind, cfg_.depth_deep, cfg_.mlp_deep, eng);
    shallow_ = init_stream("shallow", cfg_.shallow_kind, cfg_.depth_shallow, cfg_.mlp_shallow, eng);

    const std::size_t len = cfg_.d_out / cfg_.chunks;
    for (std::size_t j = 0; j < cfg_.chunks; ++j) {
        const std::string p = "pred.c" + std::to_string(j) + ".";
        pred_bias_.push_back(params_.add(p + "b", Array({1, 1}, 0.0)));
        pred_wd_.push_back(params_.add(p + "wd", uniform_init({len, 1}, len, eng)));
        pred_ws_.push_back(params_.add(p + "ws", uniform_init({len, 1}, len, eng)));
        pred_w_.push_back(params_.add(p + "W", uniform_init({len, len}, len, eng)));
    }
}

Model::StreamIds Model::init_stream(const std::string& prefix, StreamKind kind, std::size_t depth,
                                    const std::vector<std::size_t>& mlp_sizes, std::mt19937_64& eng) {
    StreamIds ids;
    ids.kind = kind;
    const std::size_t d = cfg_.embed_dim;
    const std::size_t f = schema_.field_count();
    const std::size_t per_field = cfg_.d_out / f;

    switch (kind) {
        case StreamKind::Msr: {
            ids.decay = decay_schedule(depth);
            for (std::size_t i = 0; i < depth; ++i) {
                const std::string b = prefix + ".block" + std::to_string(i) + ".";
                ids.qkv.push_back({params_.add(b + "wq", uniform_init({d, d}, d, eng)),
                                   params_.add(b + "wk", uniform_init({d, d}, d, eng)),
                                   params_.add(b + "wv", uniform_init({d, d}, d, eng))});
            }
            ids.pz = params_.add(prefix + ".pz", uniform_init({d, depth * d}, d, eng));
            ids.pu = params_.add(prefix + ".pu", uniform_init({depth * d, per_field}, depth * d, eng));
            break;
        }
        case StreamKind::Mlp: {
            std::size_t in = f * d;
            for (std::size_t i = 0; i < mlp_sizes.size(); ++i) {
                const std::string b = prefix + ".mlp" + std::to_string(i) + ".";
                ids.mlp_w.push_back(params_.add(b + "w", uniform_init({in, mlp_sizes[i]}, in, eng)));
                ids.mlp_b.push_back(params_.add(b + "b", Array({1, mlp_sizes[i]}, 0.0)));
                in = mlp_sizes[i];
            }
            ids.mlp_w.push_back(params_.add(prefix + ".out.w", uniform_init({in, cfg_.d_out}, in, eng)));
            ids.mlp_b.push_back(params_.add(prefix + ".out.b", Array({1, cfg_.d_out}, 0.0)));
            break;
        }
        case StreamKind::Sa: {
            for (std::size_t i = 0; i < depth; ++i) {
                const std::string b = prefix + ".sa" + std::to_string(i) + ".";
                ids.qkv.push_back({params_.add(b + "wq", uniform_init({d, d}, d, eng)),
                                   params_.add(b + "wk", uniform_init({d, d}, d, eng)),
                                   params_.add(b + "wv", uniform_init({d, d}, d, eng))});
            }
            ids.proj = params_.add(prefix + ".proj", uniform_init({d, per_field}, d, eng));
            break;
        }
    }
    return ids;
}

Var Model::run_stream(Graph& g, const StreamIds& ids, Var x0) const {
    switch (ids.kind) {
        case StreamKind::Msr: {
            MsrStreamVars sv;
            for (std::size_t i = 0; i < ids.qkv.size(); ++i)
                sv.blocks.push_back({g.param(ids.qkv[i][0]), g.param(ids.qkv[i][1]),
                                     g.param(ids.qkv[i][2]), ids.decay[i]});
            sv.pz = g.param(ids.pz);
            sv.pu = g.param(ids.pu);
            return run_msr_stream(g, x0, sv);
        }
        case StreamKind::Mlp: {
            MlpStreamVars sv;
            for (std::size_t i = 0; i < ids.mlp_w.size(); ++i) {
                sv.weights.push_back(g.param(ids.mlp_w[i]));
                sv.biases.push_back(g.param(ids.mlp_b[i]));
            }
            Var flat = g.reshape(x0, {1, g.value(x0).size()});
            return run_mlp_stream(g, flat, sv);
        }
        case StreamKind::Sa: {
            SaStreamVars sv;
            sv.heads = cfg_.sa_heads;
            for (const auto& layer : ids.qkv)
                sv.layers.push_back({g.param(layer[0]), g.param(layer[1]), g.param(layer[2])});
            sv.proj = g.param(ids.proj);
            return run_sa_stream(g, x0, sv);
        }
    }
    throw ConfigError("model: unreachable stream kind");
}

PredictorVars Model::bind_predictor(Graph& g) const {
    PredictorVars p;
    for (std::size_t j = 0; j < cfg_.chunks; ++j) {
        p.bias.push_back(g.param(pred_bias_[j]));
        p.wd.push_back(g.param(pred_wd_[j]));
        p.ws.push_back(g.param(pred_ws_[j]));
        p.wmat.push_back(g.param(pred_w_[j]));
    }
    return p;
}

std::pair<Var, Var> Model::forward_streams(Graph& g, std::span<const std::uint32_t> row) const {
    if (row.size() != schema_.field_count()) throw DimensionError("model: row width mismatch");
    Var x0 = embed_fields(g, embed_ids_, row);
    Var fd = run_stream(g, deep_, x0);
    Var fs = run_stream(g, shallow_, x0);
    return {fd, fs};
}

Var Model::forward(Graph& g, std::span<const std::uint32_t> row, Var* fd_out, Var* fs_out) const {
    auto [fd, fs] = forward_streams(g, row);
    if (fd_out != nullptr) *fd_out = fd;
    if (fs_out != nullptr) *fs_out = fs;
    return predict_prob(g, fd, fs, bind_predictor(g));
}

}  // namespace ctrkit
