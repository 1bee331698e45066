#include "ctrkit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

namespace ctrkit {

static_assert(std::numeric_limits<float>::is_iec559, "requires IEEE-754 floats");

namespace {

constexpr char kMagic[4] = {'R', 'S', 'R', 'T'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    std::ifstream in;
    std::string path;

    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw IoError("cannot open " + p);
    }
    void bytes(void* dst, std::size_t n) {
        if (!in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n)))
            throw FormatError(path + ": truncated checkpoint");
    }
    std::uint16_t u16() {
        unsigned char b[2];
        bytes(b, 2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32() {
        unsigned char b[4];
        bytes(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        unsigned char b[8];
        bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str(std::size_t n) {
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, std::uint64_t schema_hash,
                     const std::string& config_json, const ParamStore& params) {
    std::string out;
    out.append(kMagic, 4);
    put_u16(out, kVersion);
    put_u64(out, schema_hash);
    put_u32(out, static_cast<std::uint32_t>(config_json.size()));
    out.append(config_json);
    put_u32(out, static_cast<std::uint32_t>(params.count()));
    for (int i = 0; i < params.count(); ++i) {
        const std::string& name = params.name(i);
        const Array& a = params.array(i);
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.append(name);
        put_u32(out, static_cast<std::uint32_t>(a.shape.size()));
        for (std::size_t dim : a.shape) put_u32(out, static_cast<std::uint32_t>(dim));
        for (double v : a.data) put_f32(out, static_cast<float>(v));
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw IoError("cannot write " + tmp);
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw IoError("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

CheckpointData load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path + ": not a checkpoint file");
    const std::uint16_t version = r.u16();
    if (version != kVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));

    CheckpointData data;
    data.schema_hash = r.u64();
    data.config_json = r.str(r.u32());
    const std::uint32_t count = r.u32();
    data.arrays.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str(r.u32());
        const std::uint32_t ndims = r.u32();
        Shape shape(ndims);
        for (auto& d : shape) d = r.u32();
        Array a(shape);
        for (auto& v : a.data) v = static_cast<double>(r.f32());
        data.arrays.emplace_back(name, std::move(a));
    }
    return data;
}

void apply_checkpoint(const CheckpointData& data, ParamStore& params) {
    if (static_cast<int>(data.arrays.size()) != params.count())
        throw SchemaError("checkpoint: parameter count mismatch");
    for (const auto& [name, array] : data.arrays) {
        const int id = params.id(name);
        if (id < 0) throw SchemaError("checkpoint: unknown parameter '" + name + "'");
        Array& dst = params.array(id);
        if (dst.shape != array.shape)
            throw SchemaError("checkpoint: shape mismatch for '" + name + "'");
        dst.data = array.data;
    }
}

}  // namespace ctrkit
