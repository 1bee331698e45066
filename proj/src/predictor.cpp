#include "ctrkit/predictor.hpp"

namespace ctrkit {

std::vector<Var> chunk_row(Graph& g, Var row, std::size_t k) {
    const Array& v = g.value(row);
    if (v.rank() != 2 || v.rows() != 1) throw DimensionError("chunk_row: expects a [1 x D] row");
    if (k == 0 || v.cols() % k != 0)
        throw ConfigError("chunk_row: " + std::to_string(k) + " chunks do not divide width " +
                          std::to_string(v.cols()));
    const std::size_t len = v.cols() / k;
    if (k == 1) return {row};
    std::vector<Var> out;
    out.reserve(k);
    for (std::size_t j = 0; j < k; ++j) out.push_back(g.slice(row, 1, j * len, (j + 1) * len));
    return out;
}

Var chunk_logit(Graph& g, Var fd, Var fs, Var bias, Var wd, Var ws, Var wmat) {
    if (g.value(fd).cols() != g.value(fs).cols()) throw DimensionError("chunk_logit: chunk lengths differ");
    Var linear_d = g.matmul(fd, wd);
    Var linear_s = g.matmul(fs, ws);
    Var bilinear = g.matmul(g.matmul(fd, wmat), g.transpose(fs));
    return g.add(g.add(bias, linear_d), g.add(linear_s, bilinear));
}

Var predictor_logit(Graph& g, Var fd_row, Var fs_row, const PredictorVars& p) {
    const std::size_t k = p.chunks();
    const auto fd = chunk_row(g, fd_row, k);
    const auto fs = chunk_row(g, fs_row, k);
    Var total = chunk_logit(g, fd[0], fs[0], p.bias[0], p.wd[0], p.ws[0], p.wmat[0]);
    for (std::size_t j = 1; j < k; ++j)
        total = g.add(total, chunk_logit(g, fd[j], fs[j], p.bias[j], p.wd[j], p.ws[j], p.wmat[j]));
    return total;
}

Var predict_prob(Graph& g, Var fd_row, Var fs_row, const PredictorVars& p) {
    return g.sigmoid(predictor_logit(g, fd_row, fs_row, p));
}

}  // namespace ctrkit
