#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ctrkit/graph.hpp"

namespace ctrkit {

// Attenuation coefficients r_i = 1 - 2^-(i+4) for blocks i = 1..depth;
// starts at 31/32 and increases towards 1.
std::vector<double> decay_schedule(std::size_t depth);

// Per-field embedding lookup; returns the stacked f x d feature matrix.
Var embed_fields(Graph& g, std::span<const int> table_ids, std::span<const std::uint32_t> row);

struct RetentionBlockVars {
    Var wq, wk, wv;  // d x d projections
    double decay;    // in (0,1)
};

// V = x W_v, K = x W_k, Q = x W_q; S = decay * S_prev + K^T V; out = Q S.
// Returns (output, state).
std::pair<Var, Var> retention_block(Graph& g, Var x_prev, Var s_prev, const RetentionBlockVars& p);

struct MsrStreamVars {
    std::vector<RetentionBlockVars> blocks;
    Var pz;  // d x (depth * d), gate projection
    Var pu;  // (depth * d) x (d_out / f), per-field output projection
};

// Runs the stacked recurrent stream from a zero state, group-normalizes the
// concatenated block outputs, gates with swish(x0 pz) and projects per field.
// Returns the flattened [1 x d_out] feature row.
Var run_msr_stream(Graph& g, Var x0, const MsrStreamVars& sv, double eps = 1e-6);

struct MlpStreamVars {
    std::vector<Var> weights;  // hidden layers then the output projection
    std::vector<Var> biases;
};

// relu hidden layers, linear output; input and output are row vectors.
Var run_mlp_stream(Graph& g, Var x0_flat, const MlpStreamVars& sv);

struct SaLayerVars {
    Var wq, wk, wv;  // d x d
};

struct SaStreamVars {
    std::vector<SaLayerVars> layers;
    Var proj;  // d x (d_out / f)
    std::size_t heads = 1;
};

// Stacked softmax self-attention over the f field tokens with 1/sqrt(d_head)
// scaling, then the per-field projection and flatten.
Var run_sa_stream(Graph& g, Var x0, const SaStreamVars& sv);

}  // namespace ctrkit
