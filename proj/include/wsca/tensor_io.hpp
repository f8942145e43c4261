#pragma once

// TensorFile: "WSC1" magic, dtype byte (1 = float32, 2 = float64), ndims byte,
// ndims little-endian u64 dims, then the row-major little-endian payload.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "wsca/data_model.hpp"
#include "wsca/error.hpp"

namespace wsca {

enum class DType : std::uint8_t { Float32 = 1, Float64 = 2 };

inline std::size_t element_size(DType t) { return t == DType::Float32 ? 4 : 8; }

struct Tensor {
    DType dtype = DType::Float64;
    std::vector<std::uint64_t> dims;
    std::vector<double> values;  // row-major, widened to double

    std::uint64_t elements() const {
        std::uint64_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

inline constexpr std::array<char, 4> kTensorMagic{'W', 'S', 'C', '1'};

namespace detail {

inline void put_le(std::vector<char>& out, std::uint64_t v, std::size_t bytes) {
    for (std::size_t i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_le(const char* p, std::size_t bytes) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

}  // namespace detail

inline std::vector<char> encode_tensor(const Tensor& t) {
    require(t.dims.size() <= 255, ErrorKind::Shape, "too many tensor dimensions");
    require(t.values.size() == t.elements(), ErrorKind::Shape, "tensor payload does not match dims");
    std::vector<char> out(kTensorMagic.begin(), kTensorMagic.end());
    out.push_back(static_cast<char>(t.dtype));
    out.push_back(static_cast<char>(t.dims.size()));
    for (auto d : t.dims) detail::put_le(out, d, 8);
    out.reserve(out.size() + t.values.size() * element_size(t.dtype));
    for (double v : t.values) {
        if (t.dtype == DType::Float64) {
            detail::put_le(out, std::bit_cast<std::uint64_t>(v), 8);
        } else {
            detail::put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
        }
    }
    return out;
}

inline Tensor decode_tensor(const std::vector<char>& bytes) {
    require(bytes.size() >= 6, ErrorKind::Format, "truncated tensor header");
    require(std::equal(kTensorMagic.begin(), kTensorMagic.end(), bytes.begin()), ErrorKind::Format,
            "bad magic, expected WSC1");
    Tensor t;
    const auto dtype = static_cast<std::uint8_t>(bytes[4]);
    require(dtype == 1 || dtype == 2, ErrorKind::Format, "unknown dtype code " + std::to_string(dtype));
    t.dtype = static_cast<DType>(dtype);
    const auto ndims = static_cast<std::size_t>(static_cast<unsigned char>(bytes[5]));
    std::size_t pos = 6;
    require(bytes.size() >= pos + 8 * ndims, ErrorKind::Format, "truncated tensor dims");
    const std::uint64_t esize = element_size(t.dtype);
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < ndims; ++i, pos += 8) {
        const std::uint64_t d = detail::get_le(bytes.data() + pos, 8);
        require(d == 0 || count <= std::numeric_limits<std::uint64_t>::max() / esize / d, ErrorKind::Format,
                "tensor dims overflow");
        count *= d;
        t.dims.push_back(d);
    }
    const std::uint64_t payload = bytes.size() - pos;
    require(payload >= count * esize, ErrorKind::Format,
            "truncated payload: " + std::to_string(payload) + " bytes for " + std::to_string(count) + " elements");
    require(payload == count * esize, ErrorKind::Format, "trailing bytes after tensor payload");
    t.values.resize(count);
    for (std::uint64_t i = 0; i < count; ++i, pos += esize) {
        if (t.dtype == DType::Float64) {
            t.values[i] = std::bit_cast<double>(detail::get_le(bytes.data() + pos, 8));
        } else {
            t.values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(bytes.data() + pos, 4)));
        }
    }
    return t;
}

inline std::vector<char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::InvalidInput, "cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::InvalidInput, "cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::InvalidInput, "write failed for '" + path.string() + "'");
}

inline Tensor read_tensor(const std::filesystem::path& path) {
    try {
        return decode_tensor(read_file_bytes(path));
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Format) throw;
        fail(ErrorKind::Format, path.string() + ": " + e.detail());
    }
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    write_file_bytes(path, encode_tensor(t));
}

inline Tensor to_tensor(const Matrix& m, DType dtype = DType::Float64) {
    Tensor t;
    t.dtype = dtype;
    t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    t.values.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) t.values.push_back(m(i, j));
    }
    return t;
}

inline Tensor to_tensor(const Vector& v, DType dtype = DType::Float64) {
    Tensor t;
    t.dtype = dtype;
    t.dims = {static_cast<std::uint64_t>(v.size())};
    t.values.assign(v.data(), v.data() + v.size());
    return t;
}

inline Matrix to_matrix(const Tensor& t) {
    require(t.dims.size() == 2, ErrorKind::Format, "expected a 2-D tensor, got " + std::to_string(t.dims.size()) + "-D");
    const auto rows = static_cast<Eigen::Index>(t.dims[0]);
    const auto cols = static_cast<Eigen::Index>(t.dims[1]);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = t.values[static_cast<std::size_t>(i * cols + j)];
    }
    return m;
}

inline Vector to_vector(const Tensor& t) {
    require(t.dims.size() == 1, ErrorKind::Format, "expected a 1-D tensor, got " + std::to_string(t.dims.size()) + "-D");
    return Eigen::Map<const Vector>(t.values.data(), static_cast<Eigen::Index>(t.values.size()));
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m, DType dtype = DType::Float64) {
    write_tensor(path, to_tensor(m, dtype));
}

inline Matrix read_matrix(const std::filesystem::path& path) { return to_matrix(read_tensor(path)); }

}  // namespace wsca
