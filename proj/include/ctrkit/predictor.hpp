#pragma once

#include <vector>

#include "ctrkit/graph.hpp"

namespace ctrkit {

// Per-chunk parameters of the bilinear click predictor.
struct PredictorVars {
    std::vector<Var> bias;  // [1 x 1]
    std::vector<Var> wd;    // [L x 1]
    std::vector<Var> ws;    // [L x 1]
    std::vector<Var> wmat;  // [L x L]
    std::size_t chunks() const { return bias.size(); }
};

// Splits a [1 x D] row into k contiguous [1 x D/k] slices.
std::vector<Var> chunk_row(Graph& g, Var row, std::size_t k);

// b + w_d^T f_d + w_s^T f_s + f_d W f_s^T for one chunk pair.
Var chunk_logit(Graph& g, Var fd, Var fs, Var bias, Var wd, Var ws, Var wmat);

// Sum of per-chunk logits.
Var predictor_logit(Graph& g, Var fd_row, Var fs_row, const PredictorVars& p);

// sigmoid of the pooled logit; strictly inside (0,1).
Var predict_prob(Graph& g, Var fd_row, Var fs_row, const PredictorVars& p);

}  // namespace ctrkit
