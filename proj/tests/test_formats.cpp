#include <gtest/gtest.h>

#include <bcs/acquisition.hpp>
#include <bcs/formats.hpp>
#include <bcs/sensing.hpp>

#include "support/oracles.hpp"

namespace {

TEST(Bcsm1, ExactByteLayout) {
    bcs::BlockMatrix m;
    m.block_size = 2;
    m.rows = 1;
    m.seed = 0x0102030405060708ULL;
    m.bits = {1, 0, 1, 1};
    m.fingerprint = bcs::compute_fingerprint(m);
    const auto bytes = bcs::encode_matrix(m);
    const std::vector<std::uint8_t> expected = {
        'B', 'C', 'S', 'M', 0x01,            // magic, version
        0x02, 0x00,                          // B = 2 LE
        0x01, 0x00,                          // rows = 1 LE
        0x08, 0x07, 0x06, 0x05, 0x04, 0x03, 0x02, 0x01,  // seed LE
        1, 0, 1, 1};                         // payload
    EXPECT_EQ(bytes, expected);
}

TEST(Bcsm1, RoundTripIsByteIdentical) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const bcs::BlockMatrix m = bcs::generate_block_matrix({4, 0.25, seed});
        const auto bytes = bcs::encode_matrix(m);
        const bcs::BlockMatrix back = bcs::decode_matrix(bytes);
        EXPECT_EQ(bcs::encode_matrix(back), bytes);
        EXPECT_EQ(back.fingerprint, m.fingerprint);
        EXPECT_EQ(back.seed, m.seed);
    }
}

TEST(Bcsm1, DecodeErrors) {
    const bcs::BlockMatrix m = bcs::generate_block_matrix({4, 0.25, 1});
    auto good = bcs::encode_matrix(m);

    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(bcs::decode_matrix(bad_magic), bcs::FormatError);

    auto bad_version = good;
    bad_version[4] = 0x02;
    EXPECT_THROW(bcs::decode_matrix(bad_version), bcs::FormatError);

    auto truncated = good;
    truncated.resize(truncated.size() - 3);
    EXPECT_THROW(bcs::decode_matrix(truncated), bcs::FormatError);

    auto trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(bcs::decode_matrix(trailing), bcs::FormatError);

    auto bad_bit = good;
    bad_bit.back() = 7;
    EXPECT_THROW(bcs::decode_matrix(bad_bit), bcs::FormatError);
}

TEST(Bcsm1, FileRoundTrip) {
    oracle::TempDir dir;
    const bcs::BlockMatrix m = bcs::generate_block_matrix({4, 0.5, 31});
    const std::string path = dir.file("m.bcsm");
    bcs::write_matrix(m, path);
    const bcs::BlockMatrix back = bcs::read_matrix(path);
    EXPECT_EQ(back.bits, m.bits);
    EXPECT_EQ(back.fingerprint, m.fingerprint);
}

bcs::MeasurementTensor random_tensor(std::uint64_t seed) {
    bcs::Rng rng(seed);
    bcs::MeasurementTensor t;
    t.grid_h = 2 + static_cast<int>(rng.bits() % 6);
    t.grid_w = 2 + static_cast<int>(rng.bits() % 6);
    t.channels = 1 + static_cast<int>(rng.bits() % 8);
    t.values.resize(static_cast<std::size_t>(t.grid_h) * t.grid_w * t.channels);
    for (double& v : t.values) v = rng.uniform(-5.0, 20.0);
    for (auto& b : t.matrix_fingerprint) b = static_cast<std::uint8_t>(rng.bits());
    return t;
}

TEST(Bcsy1, RoundTripIsByteIdentical) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const bcs::MeasurementTensor t = random_tensor(seed);
        const auto bytes = bcs::encode_tensor(t);
        const bcs::MeasurementTensor back = bcs::decode_tensor(bytes);
        EXPECT_TRUE(back == t);
        EXPECT_EQ(bcs::encode_tensor(back), bytes);
    }
}

TEST(Bcsy1, HeaderPayloadMismatch) {
    const bcs::MeasurementTensor t = random_tensor(3);
    auto bytes = bcs::encode_tensor(t);
    auto truncated = bytes;
    truncated.resize(truncated.size() - 8);
    EXPECT_THROW(bcs::decode_tensor(truncated), bcs::FormatError);
    auto extended = bytes;
    extended.resize(extended.size() + 8, 0);
    EXPECT_THROW(bcs::decode_tensor(extended), bcs::FormatError);
}

TEST(Bcsy1, PreservesNonFiniteAndNegativeValues) {
    bcs::MeasurementTensor t = random_tensor(4);
    t.values[0] = -0.0;
    t.values[1] = 1e-308;
    const auto bytes = bcs::encode_tensor(t);
    const bcs::MeasurementTensor back = bcs::decode_tensor(bytes);
    EXPECT_EQ(std::signbit(back.values[0]), true);
    EXPECT_EQ(back.values[1], 1e-308);
}

bcs::RawMeasurementSet random_raw(std::uint64_t seed) {
    bcs::Rng rng(seed);
    bcs::RawMeasurementSet raw;
    raw.voltages.resize(1 + rng.bits() % 64);
    for (double& v : raw.voltages) v = rng.uniform(0.0, 10.0);
    for (auto& b : raw.matrix_fingerprint) b = static_cast<std::uint8_t>(rng.bits());
    raw.dark_reading = rng.uniform();
    raw.bright_reading = rng.uniform(5.0, 50.0);
    return raw;
}

TEST(Bcsr1, RoundTripIsByteIdentical) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const bcs::RawMeasurementSet raw = random_raw(seed);
        const auto bytes = bcs::encode_raw(raw);
        const bcs::RawMeasurementSet back = bcs::decode_raw(bytes);
        EXPECT_EQ(bcs::encode_raw(back), bytes);
        EXPECT_EQ(back.voltages, raw.voltages);
        EXPECT_EQ(back.dark_reading, raw.dark_reading);
        EXPECT_EQ(back.bright_reading, raw.bright_reading);
        EXPECT_EQ(back.matrix_fingerprint, raw.matrix_fingerprint);
    }
}

TEST(Bcsr1, DecodeErrors) {
    const auto bytes = bcs::encode_raw(random_raw(1));
    auto truncated = bytes;
    truncated.resize(truncated.size() - 1);
    EXPECT_THROW(bcs::decode_raw(truncated), bcs::FormatError);
    auto bad_magic = bytes;
    bad_magic[3] = 'X';
    EXPECT_THROW(bcs::decode_raw(bad_magic), bcs::FormatError);
}

TEST(WireReader, TruncationReportsContext) {
    const std::vector<std::uint8_t> tiny = {1, 2};
    bcs::wire::Reader r(tiny.data(), tiny.size(), "test");
    EXPECT_EQ(r.u16(), 0x0201u);
    try {
        r.u32();
        FAIL() << "expected FormatError";
    } catch (const bcs::FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
    }
}

}  // namespace
