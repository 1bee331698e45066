#pragma once

#include <cstdint>
#include <vector>

#include "ctrkit/model.hpp"

namespace ctrkit {

struct BenchReport {
    StreamKind kind;
    std::size_t fields = 0, dim = 0, batch = 0, reps = 0;
    std::size_t d_out = 0;
    std::vector<double> seconds;  // per timed repetition
    double mean_seconds = 0.0;
    double best_seconds = 0.0;
    std::size_t params_total = 0;
    std::size_t params_streams = 0;  // interaction streams only
};

// Times full forward passes of a two-stream model whose both streams use the
// given kind (depths 3/1 for the recurrent and attention variants, hidden
// sizes [400,400,400]/[800] for the MLP), over `batch` random rows, `reps`
// times after one untimed warmup.
BenchReport bench_stream(StreamKind kind, std::size_t fields, std::size_t dim, std::size_t batch,
                         std::size_t reps, std::uint64_t seed, std::size_t threads);

}  // namespace ctrkit
