#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "stormbench/storage/dataset.hpp"

namespace stormbench {

/// One named tensor inside a checkpoint.
struct ParamRecord {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

/// Named parameter records plus free-form text attachments.
///
/// Each record is: u32 name length, UTF-8 name, u32 rank, rank x u32 extents,
/// then the values in the header dtype. Text attachments use names starting
/// with '@', rank 1, and raw bytes as payload.
struct Checkpoint {
    std::vector<ParamRecord> params;
    std::map<std::string, std::string> text;  // keys without the '@'
    std::uint64_t seed = 0;
    DType dtype = DType::f32;

    const ParamRecord& param(const std::string& name) const {
        for (const auto& p : params)
            if (p.name == name) return p;
        throw FormatError("checkpoint has no parameter '" + name + "'");
    }
};

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (in.gcount() != 4) throw TruncatedError(path + ": truncated checkpoint record");
    return v;
}

inline std::string read_bytes(std::istream& in, std::size_t n, const std::string& path) {
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw TruncatedError(path + ": truncated checkpoint payload");
    return s;
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    DatasetHeader h;
    h.dtype = ckpt.dtype;
    h.n_samples = static_cast<std::uint32_t>(ckpt.params.size() + ckpt.text.size());
    h.seed = ckpt.seed;
    h.kind = ContainerKind::checkpoint;
    const auto hb = encode_header(h);
    out.write(hb.data(), hb.size());
    std::vector<char> scratch;
    for (const auto& [key, body] : ckpt.text) {
        const std::string name = "@" + key;
        detail::write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_u32(out, 1);
        detail::write_u32(out, static_cast<std::uint32_t>(body.size()));
        out.write(body.data(), static_cast<std::streamsize>(body.size()));
    }
    for (const auto& p : ckpt.params) {
        if (p.name.empty() || p.name[0] == '@') throw FormatError("invalid parameter name '" + p.name + "'");
        if (numel(p.shape) != p.values.size()) throw ShapeError("record '" + p.name + "' size does not match shape");
        detail::write_u32(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        detail::write_u32(out, static_cast<std::uint32_t>(p.shape.size()));
        for (auto e : p.shape) detail::write_u32(out, static_cast<std::uint32_t>(e));
        detail::encode_values(p.values, ckpt.dtype, scratch);
        out.write(scratch.data(), static_cast<std::streamsize>(scratch.size()));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
    if (!std::filesystem::exists(path)) throw std::runtime_error("checkpoint not found: " + path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    const DatasetHeader h = decode_header(read_header_bytes(in, path));
    if (h.kind != ContainerKind::checkpoint) throw FormatError(path + ": container is not a checkpoint");
    Checkpoint ckpt;
    ckpt.dtype = h.dtype;
    ckpt.seed = h.seed;
    for (std::uint32_t r = 0; r < h.n_samples; ++r) {
        const std::uint32_t len = detail::read_u32(in, path);
        if (len == 0 || len > 4096) throw FormatError(path + ": implausible record name length");
        std::string name = detail::read_bytes(in, len, path);
        const std::uint32_t rank = detail::read_u32(in, path);
        Shape shape(rank);
        for (auto& e : shape) e = detail::read_u32(in, path);
        if (name[0] == '@') {
            if (rank != 1) throw FormatError(path + ": text record '" + name + "' must have rank 1");
            ckpt.text[name.substr(1)] = detail::read_bytes(in, shape[0], path);
            continue;
        }
        const std::size_t n = numel(shape);
        const std::string bytes = detail::read_bytes(in, n * dtype_size(h.dtype), path);
        ParamRecord p{std::move(name), shape, std::vector<double>(n)};
        detail::decode_values(bytes.data(), n, h.dtype, p.values);
        ckpt.params.push_back(std::move(p));
    }
    return ckpt;
}

}  // namespace stormbench
