#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "bcs/errors.hpp"
#include "bcs/sensing.hpp"

// Binary container formats. Byte layouts are fixed (see FORMATS.md) and all
// multi-byte fields are little-endian regardless of host order.

namespace bcs {

namespace wire {

inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v & 0xff));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::vector<std::uint8_t>& b, double v) {
    put_u64(b, std::bit_cast<std::uint64_t>(v));
}

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t len, std::string context)
        : data_(data), len_(len), ctx_(std::move(context)) {}

    std::uint8_t u8() { return take(1)[0]; }

    std::uint16_t u16() {
        const std::uint8_t* p = take(2);
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }

    std::uint32_t u32() {
        const std::uint8_t* p = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
        return v;
    }

    std::uint64_t u64() {
        const std::uint8_t* p = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    const std::uint8_t* take(std::size_t n) {
        if (pos_ + n > len_) throw FormatError(ctx_ + ": truncated payload");
        const std::uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }

    std::size_t remaining() const { return len_ - pos_; }

private:
    const std::uint8_t* data_;
    std::size_t len_;
    std::size_t pos_ = 0;
    std::string ctx_;
};

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + path);
}

}  // namespace wire

// ---- BCSM1: block measurement matrix -------------------------------------

inline std::vector<std::uint8_t> encode_matrix(const BlockMatrix& m) {
    std::vector<std::uint8_t> b;
    b.reserve(17 + m.bits.size());
    b.insert(b.end(), {'B', 'C', 'S', 'M'});
    b.push_back(0x01);
    wire::put_u16(b, static_cast<std::uint16_t>(m.block_size));
    wire::put_u16(b, static_cast<std::uint16_t>(m.rows));
    wire::put_u64(b, m.seed);
    b.insert(b.end(), m.bits.begin(), m.bits.end());
    return b;
}

inline BlockMatrix decode_matrix(const std::vector<std::uint8_t>& bytes) {
    wire::Reader r(bytes.data(), bytes.size(), "BCSM1");
    const std::uint8_t* magic = r.take(4);
    if (magic[0] != 'B' || magic[1] != 'C' || magic[2] != 'S' || magic[3] != 'M') {
        throw FormatError("BCSM1: bad magic");
    }
    if (r.u8() != 0x01) throw FormatError("BCSM1: unsupported version");
    BlockMatrix m;
    m.block_size = r.u16();
    m.rows = r.u16();
    m.seed = r.u64();
    if (m.block_size < 1 || m.rows < 1) throw FormatError("BCSM1: invalid dimensions");
    const std::size_t n = static_cast<std::size_t>(m.rows) * m.cols();
    const std::uint8_t* payload = r.take(n);
    if (r.remaining() != 0) throw FormatError("BCSM1: trailing bytes");
    m.bits.assign(payload, payload + n);
    for (std::uint8_t bit : m.bits) {
        if (bit > 1) throw FormatError("BCSM1: matrix entries must be 0 or 1");
    }
    m.fingerprint = compute_fingerprint(m);
    return m;
}

inline void write_matrix(const BlockMatrix& m, const std::string& path) {
    wire::write_file(path, encode_matrix(m));
}

inline BlockMatrix read_matrix(const std::string& path) {
    return decode_matrix(wire::read_file(path));
}

// ---- BCSY1: measurement tensor -------------------------------------------

inline std::vector<std::uint8_t> encode_tensor(const MeasurementTensor& t) {
    std::vector<std::uint8_t> b;
    b.reserve(43 + 8 * t.values.size());
    b.insert(b.end(), {'B', 'C', 'S', 'Y'});
    b.push_back(0x01);
    wire::put_u16(b, static_cast<std::uint16_t>(t.grid_h));
    wire::put_u16(b, static_cast<std::uint16_t>(t.grid_w));
    wire::put_u16(b, static_cast<std::uint16_t>(t.channels));
    b.insert(b.end(), t.matrix_fingerprint.begin(), t.matrix_fingerprint.end());
    for (double v : t.values) wire::put_f64(b, v);
    return b;
}

inline MeasurementTensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
    wire::Reader r(bytes.data(), bytes.size(), "BCSY1");
    const std::uint8_t* magic = r.take(4);
    if (magic[0] != 'B' || magic[1] != 'C' || magic[2] != 'S' || magic[3] != 'Y') {
        throw FormatError("BCSY1: bad magic");
    }
    if (r.u8() != 0x01) throw FormatError("BCSY1: unsupported version");
    MeasurementTensor t;
    t.grid_h = r.u16();
    t.grid_w = r.u16();
    t.channels = r.u16();
    if (t.grid_h < 1 || t.grid_w < 1 || t.channels < 1) {
        throw FormatError("BCSY1: invalid dimensions");
    }
    const std::uint8_t* fp = r.take(32);
    std::copy(fp, fp + 32, t.matrix_fingerprint.begin());
    const std::size_t n = static_cast<std::size_t>(t.grid_h) * t.grid_w * t.channels;
    if (r.remaining() != 8 * n) {
        throw FormatError("BCSY1: header is inconsistent with payload length");
    }
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) t.values[i] = r.f64();
    return t;
}

inline void write_tensor(const MeasurementTensor& t, const std::string& path) {
    wire::write_file(path, encode_tensor(t));
}

inline MeasurementTensor read_tensor(const std::string& path) {
    return decode_tensor(wire::read_file(path));
}

}  // namespace bcs
