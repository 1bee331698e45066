#include "ctrkit/streams.hpp"

#include <cmath>

namespace ctrkit {

std::vector<double> decay_schedule(std::size_t depth) {
    if (depth == 0) throw ConfigError("decay_schedule: depth must be >= 1");
    std::vector<double> r(depth);
    for (std::size_t i = 1; i <= depth; ++i)
        r[i - 1] = 1.0 - std::pow(2.0, -static_cast<double>(i + 4));
    return r;
}

Var embed_fields(Graph& g, std::span<const int> table_ids, std::span<const std::uint32_t> row) {
    if (table_ids.size() != row.size()) throw DimensionError("embed_fields: field count mismatch");
    if (table_ids.empty()) throw DimensionError("embed_fields: no fields");
    std::vector<Var> rows;
    rows.reserve(table_ids.size());
    for (std::size_t i = 0; i < table_ids.size(); ++i) rows.push_back(g.embed_row(table_ids[i], row[i]));
    if (rows.size() == 1) return rows[0];
    return g.concat(rows, 0);
}

std::pair<Var, Var> retention_block(Graph& g, Var x_prev, Var s_prev, const RetentionBlockVars& p) {
    Var v = g.matmul(x_prev, p.wv);
    Var k = g.matmul(x_prev, p.wk);
    Var q = g.matmul(x_prev, p.wq);
    Var state = g.add(g.scale(s_prev, p.decay), g.matmul(g.transpose(k), v));
    return {g.matmul(q, state), state};
}

Var run_msr_stream(Graph& g, Var x0, const MsrStreamVars& sv, double eps) {
    if (sv.blocks.empty()) throw ConfigError("msr stream: needs at least one block");
    const std::size_t d = g.value(x0).cols();
    Var state = g.input(Array({d, d}, 0.0));
    std::vector<Var> outputs;
    outputs.reserve(sv.blocks.size());
    Var x = x0;
    for (const auto& block : sv.blocks) {
        auto [out, next_state] = retention_block(g, x, state, block);
        outputs.push_back(out);
        x = out;
        state = next_state;
    }
    Var stacked = outputs.size() == 1 ? outputs[0] : g.concat(outputs, 1);
    Var normed = g.group_norm(stacked, sv.blocks.size(), eps);
    Var gate = g.swish(g.matmul(x0, sv.pz));
    Var projected = g.matmul(g.mul(gate, normed), sv.pu);
    return g.reshape(projected, {1, g.value(projected).size()});
}

Var run_mlp_stream(Graph& g, Var x0_flat, const MlpStreamVars& sv) {
    if (sv.weights.empty() || sv.weights.size() != sv.biases.size())
        throw ConfigError("mlp stream: weights/biases disagree");
    Var x = x0_flat;
    for (std::size_t i = 0; i < sv.weights.size(); ++i) {
        x = g.add(g.matmul(x, sv.weights[i]), sv.biases[i]);
        if (i + 1 < sv.weights.size()) x = g.relu(x);  // final layer stays linear
    }
    return x;
}

Var run_sa_stream(Graph& g, Var x0, const SaStreamVars& sv) {
    if (sv.layers.empty()) throw ConfigError("sa stream: needs at least one layer");
    const std::size_t d = g.value(x0).cols();
    if (sv.heads == 0 || d % sv.heads != 0) throw ConfigError("sa stream: head count must divide d");
    const std::size_t dh = d / sv.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    Var x = x0;
    for (const auto& layer : sv.layers) {
        Var q = g.matmul(x, layer.wq);
        Var k = g.matmul(x, layer.wk);
        Var v = g.matmul(x, layer.wv);
        std::vector<Var> heads;
        heads.reserve(sv.heads);
        for (std::size_t h = 0; h < sv.heads; ++h) {
            Var qh = sv.heads == 1 ? q : g.slice(q, 1, h * dh, (h + 1) * dh);
            Var kh = sv.heads == 1 ? k : g.slice(k, 1, h * dh, (h + 1) * dh);
            Var vh = sv.heads == 1 ? v : g.slice(v, 1, h * dh, (h + 1) * dh);
            Var attn = g.softmax_rows(g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt));
            heads.push_back(g.matmul(attn, vh));
        }
        x = heads.size() == 1 ? heads[0] : g.concat(heads, 1);
    }
    Var projected = g.matmul(x, sv.proj);
    return g.reshape(projected, {1, g.value(projected).size()});
}

}  // namespace ctrkit
