#include "ctrkit/dataio.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ctrkit/mathutil.hpp"
#include "ctrkit/rng.hpp"

namespace ctrkit {

namespace {

constexpr char kCacheMagic[8] = {'C', 'T', 'R', 'C', 'A', 'C', 'H', 'E'};

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

std::string sanitize_filename(const std::string& name) {
    std::string out = name;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
    return out;
}

std::uint8_t parse_label(const std::string& tok, std::size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || (v != 0.0 && v != 1.0))
        throw FormatError("line " + std::to_string(line_no) + ": label must be 0 or 1, got '" + tok + "'");
    return static_cast<std::uint8_t>(v);
}

struct CsvHeader {
    std::vector<std::string> columns;
    std::size_t label_pos;
    std::vector<std::size_t> field_pos;  // column positions of the fields, in field order
};

CsvHeader read_header(std::ifstream& in, const std::string& path, const std::string& label_column) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": missing header row");
    CsvHeader h;
    h.columns = split_line(line);
    auto it = std::find(h.columns.begin(), h.columns.end(), label_column);
    if (it == h.columns.end()) throw SchemaError(path + ": no '" + label_column + "' column");
    h.label_pos = static_cast<std::size_t>(it - h.columns.begin());
    for (std::size_t i = 0; i < h.columns.size(); ++i)
        if (i != h.label_pos) h.field_pos.push_back(i);
    return h;
}

void atomic_write(const std::string& path, const std::string& payload) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp);
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw IoError("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::uint64_t schema_hash(const FieldSchema& s) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    mix(s.label_column.data(), s.label_column.size());
    for (const auto& f : s.fields) {
        mix(f.name.data(), f.name.size());
        mix(&f.vocab_size, sizeof(f.vocab_size));
    }
    return h;
}

std::uint32_t Vocab::encode_token(std::size_t field, const std::string& token) const {
    const auto& map = token_to_index[field];
    auto it = map.find(token);
    return it == map.end() ? 0u : it->second;
}

const std::string& Vocab::decode_token(std::size_t field, std::uint32_t index) const {
    return index_to_token[field].at(index);
}

double EncodedDataset::label_mean() const {
    if (n == 0) return 0.0;
    std::size_t s = 0;
    for (auto y : labels) s += y;
    return static_cast<double>(s) / static_cast<double>(n);
}

Vocab build_vocab(const std::string& csv_path, const std::string& label_column, std::size_t min_freq) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open " + csv_path);
    const CsvHeader h = read_header(in, csv_path, label_column);
    const std::size_t f = h.field_pos.size();

    // token -> (frequency, first appearance order)
    std::vector<std::unordered_map<std::string, std::pair<std::size_t, std::size_t>>> counts(f);
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != h.columns.size())
            throw FormatError(csv_path + " line " + std::to_string(line_no) + ": expected " +
                              std::to_string(h.columns.size()) + " cells, got " + std::to_string(cells.size()));
        for (std::size_t j = 0; j < f; ++j) {
            auto& slot = counts[j][cells[h.field_pos[j]]];
            if (slot.first == 0) slot.second = counts[j].size();
            ++slot.first;
        }
    }

    Vocab v;
    v.schema.label_column = label_column;
    v.token_to_index.resize(f);
    v.index_to_token.resize(f);
    for (std::size_t j = 0; j < f; ++j) {
        std::vector<std::pair<std::string, std::size_t>> kept;  // token, appearance order
        for (const auto& [tok, cf] : counts[j])
            if (cf.first >= min_freq) kept.emplace_back(tok, cf.second);
        std::sort(kept.begin(), kept.end(),
                  [](const auto& a, const auto& b) { return a.second < b.second; });
        v.index_to_token[j].push_back("<oov>");
        for (const auto& [tok, order] : kept) {
            (void)order;
            v.token_to_index[j].emplace(tok, static_cast<std::uint32_t>(v.index_to_token[j].size()));
            v.index_to_token[j].push_back(tok);
        }
        v.schema.fields.push_back({h.columns[h.field_pos[j]],
                                   static_cast<std::uint32_t>(v.index_to_token[j].size())});
    }
    return v;
}

EncodedDataset encode_csv(const std::string& csv_path, const Vocab& vocab) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open " + csv_path);
    const CsvHeader h = read_header(in, csv_path, vocab.schema.label_column);
    const std::size_t f = vocab.schema.field_count();

    // map schema fields onto this file's columns by name
    std::vector<std::size_t> pos(f);
    for (std::size_t j = 0; j < f; ++j) {
        auto it = std::find(h.columns.begin(), h.columns.end(), vocab.schema.fields[j].name);
        if (it == h.columns.end())
            throw SchemaError(csv_path + ": missing field column '" + vocab.schema.fields[j].name + "'");
        pos[j] = static_cast<std::size_t>(it - h.columns.begin());
    }

    EncodedDataset ds;
    ds.f = f;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != h.columns.size())
            throw FormatError(csv_path + " line " + std::to_string(line_no) + ": bad cell count");
        for (std::size_t j = 0; j < f; ++j)
            ds.indices.push_back(vocab.encode_token(j, cells[pos[j]]));
        ds.labels.push_back(parse_label(cells[h.label_pos], line_no));
        ++ds.n;
    }
    return ds;
}

namespace {

EncodedDataset take_rows(const EncodedDataset& ds, std::span<const std::size_t> rows) {
    EncodedDataset out;
    out.f = ds.f;
    out.n = rows.size();
    out.indices.reserve(rows.size() * ds.f);
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) {
        const auto row = ds.row(r);
        out.indices.insert(out.indices.end(), row.begin(), row.end());
        out.labels.push_back(ds.labels[r]);
    }
    return out;
}

}  // namespace

SplitResult split(const EncodedDataset& ds, const SplitFractions& fr, std::uint64_t seed) {
    if (fr.train < 0 || fr.val < 0 || fr.test < 0 || std::abs(fr.train + fr.val + fr.test - 1.0) > 1e-9)
        throw ConfigError("split: fractions must be non-negative and sum to 1");
    std::vector<std::size_t> order(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) order[i] = i;
    auto eng = make_engine(seed, 0x5b117);
    std::shuffle(order.begin(), order.end(), eng);

    const std::size_t n_val = static_cast<std::size_t>(static_cast<double>(ds.n) * fr.val);
    const std::size_t n_test = static_cast<std::size_t>(static_cast<double>(ds.n) * fr.test);
    const std::size_t n_train = ds.n - n_val - n_test;

    SplitResult out;
    out.train = take_rows(ds, {order.data(), n_train});
    out.val = take_rows(ds, {order.data() + n_train, n_val});
    out.test = take_rows(ds, {order.data() + n_train + n_val, n_test});
    return out;
}

void save_vocab(const Vocab& vocab, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ostringstream schema;
    schema << "label\t" << vocab.schema.label_column << "\n";
    for (const auto& f : vocab.schema.fields) schema << f.name << "\t" << f.vocab_size << "\n";
    atomic_write(dir + "/schema.tsv", schema.str());

    for (std::size_t j = 0; j < vocab.schema.field_count(); ++j) {
        std::ostringstream os;
        for (std::uint32_t i = 1; i < vocab.index_to_token[j].size(); ++i)
            os << vocab.index_to_token[j][i] << "\t" << i << "\n";
        atomic_write(dir + "/" + sanitize_filename(vocab.schema.fields[j].name) + ".vocab.tsv", os.str());
    }
}

Vocab load_vocab(const std::string& dir) {
    std::ifstream schema(dir + "/schema.tsv");
    if (!schema) throw IoError("cannot open " + dir + "/schema.tsv");
    Vocab v;
    std::string line;
    if (!std::getline(schema, line)) throw FormatError("empty schema.tsv");
    {
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.substr(0, tab) != "label")
            throw FormatError("schema.tsv: first line must be 'label<TAB>name'");
        v.schema.label_column = line.substr(tab + 1);
    }
    while (std::getline(schema, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw FormatError("schema.tsv: malformed line");
        v.schema.fields.push_back({line.substr(0, tab),
                                   static_cast<std::uint32_t>(std::stoul(line.substr(tab + 1)))});
    }

    for (const auto& f : v.schema.fields) {
        const std::string path = dir + "/" + sanitize_filename(f.name) + ".vocab.tsv";
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path);
        std::unordered_map<std::string, std::uint32_t> map;
        std::vector<std::string> rev{"<oov>"};
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos) throw FormatError(path + ": malformed line");
            const std::string tok = line.substr(0, tab);
            const auto idx = static_cast<std::uint32_t>(std::stoul(line.substr(tab + 1)));
            if (idx != rev.size()) throw FormatError(path + ": indices must be dense and ascending");
            map.emplace(tok, idx);
            rev.push_back(tok);
        }
        if (rev.size() != f.vocab_size) throw FormatError(path + ": token count disagrees with schema");
        v.token_to_index.push_back(std::move(map));
        v.index_to_token.push_back(std::move(rev));
    }
    return v;
}

void write_cache(const EncodedDataset& ds, std::uint64_t hash, const std::string& path) {
    std::string payload;
    payload.reserve(32 + ds.indices.size() * 4 + ds.labels.size());
    payload.append(kCacheMagic, sizeof(kCacheMagic));
    auto put_u64 = [&payload](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) payload.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    put_u64(hash);
    put_u64(ds.n);
    put_u64(ds.f);
    for (std::uint32_t v : ds.indices)
        for (int i = 0; i < 4; ++i) payload.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    payload.append(reinterpret_cast<const char*>(ds.labels.data()), ds.labels.size());
    atomic_write(path, payload);
}

EncodedDataset read_cache(const std::string& path, std::uint64_t expected_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCacheMagic, 8) != 0)
        throw FormatError(path + ": not a row cache");
    auto get_u64 = [&in, &path]() {
        unsigned char b[8];
        if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError(path + ": truncated");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    };
    const std::uint64_t hash = get_u64();
    if (hash != expected_hash) throw SchemaError(path + ": schema hash mismatch");
    EncodedDataset ds;
    ds.n = get_u64();
    ds.f = get_u64();
    ds.indices.resize(ds.n * ds.f);
    for (auto& v : ds.indices) {
        unsigned char b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(path + ": truncated");
        v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    }
    ds.labels.resize(ds.n);
    if (!in.read(reinterpret_cast<char*>(ds.labels.data()), static_cast<std::streamsize>(ds.n)))
        throw FormatError(path + ": truncated");
    return ds;
}

// ---- synthetic generator ----

void SynthConfig::validate() const {
    if (n_train == 0 || n_test == 0) throw ConfigError("synthetic: row counts must be positive");
    if (n_causal == 0) throw ConfigError("synthetic: needs at least one causal field");
    if (rho_train < 0 || rho_train > 1 || rho_test < 0 || rho_test > 1)
        throw ConfigError("synthetic: rho must lie in [0,1]");
    if (vocab_per_field < 2) throw ConfigError("synthetic: vocab_per_field must be >= 2");
}

FieldSchema synth_schema(const SynthConfig& cfg) {
    FieldSchema s;
    for (std::size_t i = 0; i < cfg.n_causal; ++i)
        s.fields.push_back({"c" + std::to_string(i), cfg.vocab_per_field + 1});
    for (std::size_t i = 0; i < cfg.n_spurious; ++i)
        s.fields.push_back({"s" + std::to_string(i), cfg.vocab_per_field + 1});
    return s;
}

namespace {

struct SynthRule {
    std::vector<double> theta;           // n_causal x vocab token scores
    std::vector<std::uint32_t> mult;     // n_spurious x n_causal mixing multipliers
    std::vector<std::uint32_t> offset;   // n_spurious
    double scale;
};

SynthRule make_rule(const SynthConfig& cfg) {
    SynthRule r;
    auto eng = make_engine(cfg.seed, 0x7e0);
    std::normal_distribution<double> nd(0.0, 1.0);
    r.theta.resize(cfg.n_causal * cfg.vocab_per_field);
    for (auto& t : r.theta) t = nd(eng);
    std::uniform_int_distribution<std::uint32_t> md(1, 7919);
    r.mult.resize(cfg.n_spurious * cfg.n_causal);
    for (auto& m : r.mult) m = md(eng);
    r.offset.resize(cfg.n_spurious);
    for (auto& o : r.offset) o = md(eng);
    r.scale = 2.0 / std::sqrt(static_cast<double>(cfg.n_causal));
    return r;
}

EncodedDataset gen_part(const SynthConfig& cfg, const SynthRule& rule, std::size_t n, double rho,
                        std::uint64_t stream_tag) {
    EncodedDataset ds;
    ds.f = cfg.n_causal + cfg.n_spurious;
    ds.n = n;
    ds.indices.reserve(n * ds.f);
    ds.labels.reserve(n);
    auto eng = make_engine(cfg.seed, stream_tag);
    std::uniform_int_distribution<std::uint32_t> tok(1, cfg.vocab_per_field);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<std::uint32_t> causal(cfg.n_causal);
    for (std::size_t i = 0; i < n; ++i) {
        double logit = 0.0;
        for (std::size_t c = 0; c < cfg.n_causal; ++c) {
            causal[c] = tok(eng);
            logit += rule.theta[c * cfg.vocab_per_field + (causal[c] - 1)];
            ds.indices.push_back(causal[c]);
        }
        const std::uint8_t y = unit(eng) < stable_sigmoid(rule.scale * logit) ? 1 : 0;
        for (std::size_t s = 0; s < cfg.n_spurious; ++s) {
            std::uint32_t t;
            if (unit(eng) < rho) {
                std::uint64_t acc = rule.offset[s];
                for (std::size_t c = 0; c < cfg.n_causal; ++c)
                    acc += static_cast<std::uint64_t>(rule.mult[s * cfg.n_causal + c]) * causal[c];
                t = 1 + static_cast<std::uint32_t>(acc % cfg.vocab_per_field);
            } else {
                t = tok(eng);
            }
            ds.indices.push_back(t);
        }
        ds.labels.push_back(y);
    }
    return ds;
}

}  // namespace

SynthData gen_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    const SynthRule rule = make_rule(cfg);
    SynthData out;
    out.train = gen_part(cfg, rule, cfg.n_train, cfg.rho_train, 0x71a1);
    out.test = gen_part(cfg, rule, cfg.n_test, cfg.rho_test, 0x7e57);
    return out;
}

void write_synthetic_csv(const SynthConfig& cfg, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const SynthData data = gen_synthetic(cfg);
    const FieldSchema schema = synth_schema(cfg);

    auto render = [&schema](const EncodedDataset& ds) {
        std::ostringstream os;
        for (std::size_t j = 0; j < schema.fields.size(); ++j) os << schema.fields[j].name << ",";
        os << "label\n";
        for (std::size_t i = 0; i < ds.n; ++i) {
            const auto row = ds.row(i);
            for (std::size_t j = 0; j < ds.f; ++j) os << "v" << row[j] << ",";
            os << static_cast<int>(ds.labels[i]) << "\n";
        }
        return os.str();
    };
    atomic_write(dir + "/train.csv", render(data.train));
    atomic_write(dir + "/test.csv", render(data.test));
}

}  // namespace ctrkit
