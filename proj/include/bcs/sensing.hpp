#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bcs/errors.hpp"
#include "bcs/fingerprint.hpp"
#include "bcs/image.hpp"
#include "bcs/rng.hpp"

namespace bcs {

// Sampling parameters: block side B, sampling ratio S in (0, 1], generator seed.
// Measurements per block come out as floor(S * B^2) and must be >= 1.
struct SamplingConfig {
    int block_size = 4;
    double ratio = 0.25;
    std::uint64_t seed = 0;
};

// floor(S * B^2) with a one-ulp guard so that exact lattice ratios p/B^2
// stored as doubles never round down to p - 1.
inline int measurements_per_block(int block_size, double ratio) {
    const double n = static_cast<double>(block_size) * block_size;
    return static_cast<int>(std::floor(ratio * n * (1.0 + 1e-12) + 1e-9));
}

inline void validate(const SamplingConfig& cfg) {
    if (cfg.block_size < 1) throw ValidationError("block size must be >= 1");
    if (!(cfg.ratio > 0.0) || cfg.ratio > 1.0) {
        throw ValidationError("sampling ratio must lie in (0, 1]");
    }
    if (measurements_per_block(cfg.block_size, cfg.ratio) < 1) {
        throw ValidationError("invalid ratio: floor(S*B^2) must be >= 1");
    }
}

// The realizable ratios for block size B: {p / B^2 : p = 1..B^2}.
inline std::vector<double> valid_ratios(int block_size) {
    if (block_size < 1) throw ValidationError("block size must be >= 1");
    const int n = block_size * block_size;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int p = 1; p <= n; ++p) out.push_back(static_cast<double>(p) / n);
    return out;
}

// Binary block measurement matrix: rows x B^2 entries in {0, 1}, one row per
// per-block measurement. The fingerprint is SHA-256 over a canonical encoding
// of (B, rows, bits) -- see FORMATS.md -- so it survives serialization and
// ignores the seed.
struct BlockMatrix {
    int block_size = 0;
    int rows = 0;  // M_B = floor(S * B^2)
    std::vector<std::uint8_t> bits;  // row-major, each 0 or 1
    std::uint64_t seed = 0;
    Fingerprint fingerprint{};

    int cols() const { return block_size * block_size; }

    std::uint8_t bit(int row, int col) const {
        return bits[static_cast<std::size_t>(row) * cols() + col];
    }
};

inline Fingerprint compute_fingerprint(const BlockMatrix& m) {
    std::vector<std::uint8_t> buf;
    buf.reserve(9 + m.bits.size());
    buf.insert(buf.end(), {'B', 'C', 'S', 'M', 0x01});
    buf.push_back(static_cast<std::uint8_t>(m.block_size & 0xff));
    buf.push_back(static_cast<std::uint8_t>((m.block_size >> 8) & 0xff));
    buf.push_back(static_cast<std::uint8_t>(m.rows & 0xff));
    buf.push_back(static_cast<std::uint8_t>((m.rows >> 8) & 0xff));
    buf.insert(buf.end(), m.bits.begin(), m.bits.end());
    return sha256(buf);
}

// Draws floor(S*B^2) rows of B^2 fair coin flips from a deterministic
// generator. Identical configs produce bit-identical matrices on every
// platform.
inline BlockMatrix generate_block_matrix(const SamplingConfig& cfg) {
    validate(cfg);
    BlockMatrix m;
    m.block_size = cfg.block_size;
    m.rows = measurements_per_block(cfg.block_size, cfg.ratio);
    m.seed = cfg.seed;
    m.bits.resize(static_cast<std::size_t>(m.rows) * m.cols());
    Rng rng(cfg.seed);
    for (auto& b : m.bits) b = static_cast<std::uint8_t>(rng.coin());
    m.fingerprint = compute_fingerprint(m);
    return m;
}

inline std::vector<int> matrix_row_sums(const BlockMatrix& m) {
    std::vector<int> sums(static_cast<std::size_t>(m.rows), 0);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols(); ++c) sums[static_cast<std::size_t>(r)] += m.bit(r, c);
    return sums;
}

// y_j = A x_j for one raster-scanned block. Summation is strictly
// left-to-right so results are bit-reproducible.
inline std::vector<double> sample_block(const BlockMatrix& m, std::span<const double> block) {
    if (static_cast<int>(block.size()) != m.cols()) {
        throw DimensionError("sample_block: block length must equal B^2");
    }
    std::vector<double> y(static_cast<std::size_t>(m.rows), 0.0);
    for (int r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        const std::uint8_t* row = m.bits.data() + static_cast<std::size_t>(r) * m.cols();
        for (int c = 0; c < m.cols(); ++c) {
            if (row[c]) acc += block[static_cast<std::size_t>(c)];
        }
        y[static_cast<std::size_t>(r)] = acc;
    }
    return y;
}

// Measurements on the block grid: entry (i, j, m) is row m of A applied to
// image block (i, j). Stored in (row, col, channel) order.
struct MeasurementTensor {
    int grid_h = 0;
    int grid_w = 0;
    int channels = 0;
    std::vector<double> values;
    Fingerprint matrix_fingerprint{};

    double& at(int i, int j, int m) {
        return values[(static_cast<std::size_t>(i) * grid_w + j) * channels + m];
    }
    double at(int i, int j, int m) const {
        return values[(static_cast<std::size_t>(i) * grid_w + j) * channels + m];
    }
    std::size_t size() const { return values.size(); }

    bool operator==(const MeasurementTensor& o) const {
        return grid_h == o.grid_h && grid_w == o.grid_w && channels == o.channels &&
               values == o.values && matrix_fingerprint == o.matrix_fingerprint;
    }
};

// Block compressive sensing of a full image: non-overlapping B x B tiles in
// row-major order, each sampled with the same block matrix.
inline MeasurementTensor sample_image(const BlockMatrix& m, const ImagePlane& img) {
    const int b = m.block_size;
    if (img.width % b != 0 || img.height % b != 0) {
        throw DimensionError("sample_image: image dimensions must be divisible by the block size");
    }
    MeasurementTensor t;
    t.grid_h = img.height / b;
    t.grid_w = img.width / b;
    t.channels = m.rows;
    t.matrix_fingerprint = m.fingerprint;
    t.values.resize(static_cast<std::size_t>(t.grid_h) * t.grid_w * t.channels);
    std::vector<double> block(static_cast<std::size_t>(b) * b);
    for (int i = 0; i < t.grid_h; ++i) {
        for (int j = 0; j < t.grid_w; ++j) {
            for (int y = 0; y < b; ++y)
                for (int x = 0; x < b; ++x)
                    block[static_cast<std::size_t>(y) * b + x] = img.at(i * b + y, j * b + x);
            const std::vector<double> y = sample_block(m, block);
            for (int c = 0; c < t.channels; ++c) t.at(i, j, c) = y[static_cast<std::size_t>(c)];
        }
    }
    return t;
}

// Dense matrix helper for the assembled block-diagonal operator.
struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

// Phi: A repeated num_blocks times along the diagonal, zero elsewhere.
inline DenseMatrix assemble_block_diagonal(const BlockMatrix& m, int num_blocks) {
    if (num_blocks < 1) throw ValidationError("num_blocks must be >= 1");
    DenseMatrix phi;
    phi.rows = m.rows * num_blocks;
    phi.cols = m.cols() * num_blocks;
    phi.v.assign(static_cast<std::size_t>(phi.rows) * phi.cols, 0.0);
    for (int k = 0; k < num_blocks; ++k)
        for (int r = 0; r < m.rows; ++r)
            for (int c = 0; c < m.cols(); ++c)
                phi.at(k * m.rows + r, k * m.cols() + c) = static_cast<double>(m.bit(r, c));
    return phi;
}

// Flattens an image in (block-row, block-col, within-block raster) order, the
// vector layout matched by the assembled block-diagonal operator.
inline std::vector<double> flatten_by_blocks(const ImagePlane& img, int block_size) {
    if (img.width % block_size != 0 || img.height % block_size != 0) {
        throw DimensionError("flatten_by_blocks: dimensions must be divisible by block size");
    }
    std::vector<double> out;
    out.reserve(img.pixel_count());
    for (int i = 0; i < img.height / block_size; ++i)
        for (int j = 0; j < img.width / block_size; ++j)
            for (int y = 0; y < block_size; ++y)
                for (int x = 0; x < block_size; ++x)
                    out.push_back(img.at(i * block_size + y, j * block_size + x));
    return out;
}

}  // namespace bcs
