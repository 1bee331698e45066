#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ctrkit/dataio.hpp"
#include "ctrkit/graph.hpp"
#include "ctrkit/predictor.hpp"
#include "ctrkit/streams.hpp"

namespace ctrkit {

enum class StreamKind { Msr, Mlp, Sa };

StreamKind parse_stream_kind(const std::string& name);
std::string stream_kind_name(StreamKind kind);

struct ModelConfig {
    StreamKind deep_kind = StreamKind::Msr;
    StreamKind shallow_kind = StreamKind::Msr;
    std::size_t depth_deep = 3;
    std::size_t depth_shallow = 1;
    std::size_t embed_dim = 10;
    std::size_t d_out = 400;
    std::size_t chunks = 1;
    std::size_t sa_heads = 1;
    std::vector<std::size_t> mlp_deep{400, 400, 400};
    std::vector<std::size_t> mlp_shallow{800};

    void validate(std::size_t fields) const;
};

// Shared embedding table, deep + shallow interaction streams and the chunked
// bilinear head. Parameters live in a ParamStore; forward() assembles a fresh
// graph slice per sample.
class Model {
public:
    Model(FieldSchema schema, ModelConfig cfg, std::uint64_t seed);

    // Returns the click-probability node; optionally exposes the stream
    // feature rows for feature-map consumers.
    Var forward(Graph& g, std::span<const std::uint32_t> row, Var* fd_out = nullptr,
                Var* fs_out = nullptr) const;

    // Embedding plus both interaction streams, no predictor head.
    std::pair<Var, Var> forward_streams(Graph& g, std::span<const std::uint32_t> row) const;

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }
    const FieldSchema& schema() const { return schema_; }
    std::size_t field_count() const { return schema_.field_count(); }
    std::size_t param_count() const { return params_.total_size(); }

private:
    struct StreamIds {
        StreamKind kind;
        std::vector<std::array<int, 3>> qkv;  // retention or attention layers
        int pz = -1, pu = -1;                  // msr projections
        int proj = -1;                         // sa output projection
        std::vector<int> mlp_w, mlp_b;
        std::vector<double> decay;
    };

    StreamIds init_stream(const std::string& prefix, StreamKind kind, std::size_t depth,
                          const std::vector<std::size_t>& mlp_sizes, std::mt19937_64& eng);
    Var run_stream(Graph& g, const StreamIds& ids, Var x0) const;
    PredictorVars bind_predictor(Graph& g) const;

    FieldSchema schema_;
    ModelConfig cfg_;
    ParamStore params_;
    std::vector<int> embed_ids_;
    StreamIds deep_, shallow_;
    std::vector<int> pred_bias_, pred_wd_, pred_ws_, pred_w_;
};

}  // namespace ctrkit
