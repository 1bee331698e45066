#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctrkit/errors.hpp"

namespace ctrkit {

struct FieldSchema {
    struct Field {
        std::string name;
        std::uint32_t vocab_size;  // includes index 0 (OOV/padding)
    };
    std::vector<Field> fields;
    std::string label_column = "label";

    std::size_t field_count() const { return fields.size(); }
};

// FNV-1a over field names, vocab sizes and the label column.
std::uint64_t schema_hash(const FieldSchema& s);

// Per-field token dictionaries. Index 0 is reserved for OOV; in-vocabulary
// tokens get 1..V-1 in first-appearance order.
struct Vocab {
    FieldSchema schema;
    std::vector<std::unordered_map<std::string, std::uint32_t>> token_to_index;
    std::vector<std::vector<std::string>> index_to_token;  // [0] == "<oov>"

    std::uint32_t encode_token(std::size_t field, const std::string& token) const;
    const std::string& decode_token(std::size_t field, std::uint32_t index) const;
};

struct EncodedDataset {
    std::size_t n = 0, f = 0;
    std::vector<std::uint32_t> indices;  // row-major n x f
    std::vector<std::uint8_t> labels;

    std::span<const std::uint32_t> row(std::size_t i) const { return {indices.data() + i * f, f}; }
    double label_mean() const;
};

// Scans a headered CSV (comma separated, no quoting) and builds per-field
// dictionaries. Tokens with frequency < min_freq map to OOV index 0.
Vocab build_vocab(const std::string& csv_path, const std::string& label_column = "label",
                  std::size_t min_freq = 1);

EncodedDataset encode_csv(const std::string& csv_path, const Vocab& vocab);

struct SplitFractions {
    double train = 0.8, val = 0.1, test = 0.1;
};

// Deterministic shuffled partition; sizes of val/test round down, remainder
// goes to train.
struct SplitResult {
    EncodedDataset train, val, test;
};
SplitResult split(const EncodedDataset& ds, const SplitFractions& fractions, std::uint64_t seed);

void save_vocab(const Vocab& vocab, const std::string& dir);
Vocab load_vocab(const std::string& dir);

// Binary row cache: 8-byte magic, u64 schema hash, u64 n, u64 f, n*f u32
// little-endian indices, then n u8 labels.
void write_cache(const EncodedDataset& ds, std::uint64_t schema_hash, const std::string& path);
EncodedDataset read_cache(const std::string& path, std::uint64_t expected_schema_hash);

// ---- synthetic spurious-correlation testbed ----

struct SynthConfig {
    std::size_t n_train = 50000;
    std::size_t n_test = 10000;
    std::size_t n_causal = 4;
    std::size_t n_spurious = 2;
    double rho_train = 0.9;
    double rho_test = 0.1;
    std::uint32_t vocab_per_field = 16;  // token values per field, excluding OOV
    std::uint64_t seed = 1;

    void validate() const;
};

FieldSchema synth_schema(const SynthConfig& cfg);

// Labels follow a fixed logistic rule over the causal fields; each spurious
// field copies a token derived from the causal tokens with probability rho
// and is uniform otherwise.
struct SynthData {
    EncodedDataset train, test;
};
SynthData gen_synthetic(const SynthConfig& cfg);

// Writes train.csv/test.csv with string tokens matching gen_synthetic.
void write_synthetic_csv(const SynthConfig& cfg, const std::string& dir);

}  // namespace ctrkit
