#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stormbench/tensor/tensor.hpp"
#include "stormbench/util/errors.hpp"

namespace stormbench {

static_assert(std::endian::native == std::endian::little, "the .dwb container assumes a little-endian host");

/// Wrong magic bytes or unsupported container version.
class MagicError : public FormatError {
public:
    using FormatError::FormatError;
};

/// File shorter than its header promises.
class TruncatedError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Unknown dtype code, or a dtype other than the one the caller requires.
class DtypeError : public FormatError {
public:
    using FormatError::FormatError;
};

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

inline std::size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 8; }

/// What a container holds. Stored in the first reserved header byte.
enum class ContainerKind : std::uint8_t { dataset = 0, checkpoint = 1 };

/// 64-byte container header. Fields are packed back to back from offset 0:
/// magic[4] version:u16 dtype:u8 n_samples:u32 T:u32 H:u32 W:u32 seed:u64,
/// then kind:u8 and zero padding.
struct DatasetHeader {
    static constexpr std::array<char, 4> kMagic{'D', 'L', 'W', 'B'};
    static constexpr std::uint16_t kVersion = 1;
    static constexpr std::size_t kSize = 64;

    DType dtype = DType::f32;
    std::uint32_t n_samples = 0, T = 0, H = 0, W = 0;
    std::uint64_t seed = 0;
    ContainerKind kind = ContainerKind::dataset;

    std::uint64_t sample_elements() const { return std::uint64_t(T) * H * W; }
    std::uint64_t sample_bytes() const { return sample_elements() * dtype_size(dtype); }
    std::uint64_t payload_bytes() const { return sample_bytes() * n_samples; }
};

namespace detail {

template <class U>
void put(std::array<char, DatasetHeader::kSize>& buf, std::size_t off, U v) {
    std::memcpy(buf.data() + off, &v, sizeof(U));
}

template <class U>
U get(const std::array<char, DatasetHeader::kSize>& buf, std::size_t off) {
    U v;
    std::memcpy(&v, buf.data() + off, sizeof(U));
    return v;
}

inline DType check_dtype(std::uint8_t code) {
    if (code > 1) throw DtypeError("unknown dtype code " + std::to_string(code));
    return static_cast<DType>(code);
}

}  // namespace detail

inline std::array<char, DatasetHeader::kSize> encode_header(const DatasetHeader& h) {
    std::array<char, DatasetHeader::kSize> buf{};
    std::memcpy(buf.data(), DatasetHeader::kMagic.data(), 4);
    detail::put<std::uint16_t>(buf, 4, DatasetHeader::kVersion);
    detail::put<std::uint8_t>(buf, 6, static_cast<std::uint8_t>(h.dtype));
    detail::put<std::uint32_t>(buf, 7, h.n_samples);
    detail::put<std::uint32_t>(buf, 11, h.T);
    detail::put<std::uint32_t>(buf, 15, h.H);
    detail::put<std::uint32_t>(buf, 19, h.W);
    detail::put<std::uint64_t>(buf, 23, h.seed);
    detail::put<std::uint8_t>(buf, 31, static_cast<std::uint8_t>(h.kind));
    return buf;
}

inline DatasetHeader decode_header(const std::array<char, DatasetHeader::kSize>& buf) {
    if (std::memcmp(buf.data(), DatasetHeader::kMagic.data(), 4) != 0) throw MagicError("bad magic, not a .dwb file");
    const auto version = detail::get<std::uint16_t>(buf, 4);
    if (version != DatasetHeader::kVersion) throw MagicError("unsupported .dwb version " + std::to_string(version));
    DatasetHeader h;
    h.dtype = detail::check_dtype(detail::get<std::uint8_t>(buf, 6));
    h.n_samples = detail::get<std::uint32_t>(buf, 7);
    h.T = detail::get<std::uint32_t>(buf, 11);
    h.H = detail::get<std::uint32_t>(buf, 15);
    h.W = detail::get<std::uint32_t>(buf, 19);
    h.seed = detail::get<std::uint64_t>(buf, 23);
    const auto kind = detail::get<std::uint8_t>(buf, 31);
    if (kind > 1) throw FormatError("unknown container kind " + std::to_string(kind));
    h.kind = static_cast<ContainerKind>(kind);
    return h;
}

inline std::array<char, DatasetHeader::kSize> read_header_bytes(std::istream& in, const std::string& path) {
    std::array<char, DatasetHeader::kSize> buf{};
    in.read(buf.data(), buf.size());
    if (in.gcount() < 4) throw TruncatedError(path + ": file too short for a header");
    if (std::memcmp(buf.data(), DatasetHeader::kMagic.data(), 4) != 0)
        throw MagicError(path + ": bad magic, not a .dwb file");
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw TruncatedError(path + ": truncated header");
    return buf;
}

namespace detail {

inline void encode_values(std::span<const double> src, DType dtype, std::vector<char>& out) {
    out.resize(src.size() * dtype_size(dtype));
    if (dtype == DType::f64) {
        std::memcpy(out.data(), src.data(), out.size());
    } else {
        for (std::size_t i = 0; i < src.size(); ++i) {
            const float f = static_cast<float>(src[i]);
            std::memcpy(out.data() + 4 * i, &f, 4);
        }
    }
}

inline void decode_values(const char* bytes, std::size_t count, DType dtype, std::span<double> dst) {
    if (dtype == DType::f64) {
        std::memcpy(dst.data(), bytes, count * 8);
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            float f;
            std::memcpy(&f, bytes + 4 * i, 4);
            dst[i] = f;
        }
    }
}

}  // namespace detail

/// Writes a dataset container. Samples may arrive in any order; each sample
/// index must be written exactly once before close().
class DatasetWriter {
public:
    DatasetWriter(const std::string& path, const DatasetHeader& header) : path_(path), header_(header) {
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
        const auto buf = encode_header(header_);
        out_.write(buf.data(), buf.size());
        written_.assign(header_.n_samples, false);
    }

    const DatasetHeader& header() const { return header_; }

    void write_sample(std::size_t index, std::span<const double> values) {
        if (index >= header_.n_samples) throw ShapeError("sample index " + std::to_string(index) + " out of range");
        if (values.size() != header_.sample_elements())
            throw ShapeError("sample has " + std::to_string(values.size()) + " values, header expects " +
                             std::to_string(header_.sample_elements()));
        detail::encode_values(values, header_.dtype, scratch_);
        out_.seekp(static_cast<std::streamoff>(DatasetHeader::kSize + index * header_.sample_bytes()));
        out_.write(scratch_.data(), static_cast<std::streamsize>(scratch_.size()));
        if (!out_) throw std::runtime_error("write failed: " + path_);
        written_[index] = true;
    }

    void close() {
        for (std::size_t i = 0; i < written_.size(); ++i)
            if (!written_[i]) throw std::runtime_error(path_ + ": sample " + std::to_string(i) + " was never written");
        out_.close();
        if (!out_) throw std::runtime_error("close failed: " + path_);
    }

private:
    std::string path_;
    DatasetHeader header_;
    std::ofstream out_;
    std::vector<char> scratch_;
    std::vector<bool> written_;
};

/// Read-only view of a dataset file. Samples are loaded on demand, so the
/// reader is cheap to open on files much larger than memory. Safe to share.
class DatasetReader {
public:
    explicit DatasetReader(const std::string& path, std::optional<DType> expected = std::nullopt) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + path);
        header_ = decode_header(read_header_bytes(in, path));
        if (header_.kind != ContainerKind::dataset) throw FormatError(path + ": container is not a dataset");
        if (expected && *expected != header_.dtype)
            throw DtypeError(path + ": dtype " + std::to_string(int(header_.dtype)) + " but " +
                             std::to_string(int(*expected)) + " required");
        const auto size = std::filesystem::file_size(path);
        if (size < DatasetHeader::kSize + header_.payload_bytes())
            throw TruncatedError(path + ": payload has " + std::to_string(size - DatasetHeader::kSize) +
                                 " bytes, header promises " + std::to_string(header_.payload_bytes()));
        stream_ = std::make_unique<std::ifstream>(path, std::ios::binary);
    }

    const DatasetHeader& header() const { return header_; }
    const std::string& path() const { return path_; }
    std::size_t size() const { return header_.n_samples; }

    /// Sample i as a [T, H, W] 64-bit tensor.
    Tensor<double> sample(std::size_t i) const {
        if (i >= header_.n_samples) throw ShapeError("sample index " + std::to_string(i) + " out of range");
        std::vector<char> bytes(header_.sample_bytes());
        {
            std::lock_guard lock(*mu_);
            stream_->clear();
            stream_->seekg(static_cast<std::streamoff>(DatasetHeader::kSize + i * header_.sample_bytes()));
            stream_->read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            if (stream_->gcount() != static_cast<std::streamsize>(bytes.size()))
                throw TruncatedError(path_ + ": short read at sample " + std::to_string(i));
        }
        Tensor<double> t({header_.T, header_.H, header_.W});
        detail::decode_values(bytes.data(), header_.sample_elements(), header_.dtype, t.mutable_data());
        return t;
    }

private:
    std::string path_;
    DatasetHeader header_;
    std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
    std::unique_ptr<std::ifstream> stream_;
};

/// Convenience writer for in-memory sequences, each shaped [T, H, W].
inline void write_dataset(const std::string& path, const std::vector<Tensor<double>>& samples, DatasetHeader header) {
    header.kind = ContainerKind::dataset;
    header.n_samples = static_cast<std::uint32_t>(samples.size());
    DatasetWriter w(path, header);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].shape() != Shape{header.T, header.H, header.W})
            throw ShapeError("sample " + std::to_string(i) + " has shape " + to_string(samples[i].shape()));
        w.write_sample(i, samples[i].data());
    }
    w.close();
}

inline DatasetReader read_dataset(const std::string& path, std::optional<DType> expected = std::nullopt) {
    return DatasetReader(path, expected);
}

}  // namespace stormbench
