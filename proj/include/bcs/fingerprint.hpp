#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "bcs/errors.hpp"

namespace bcs {

// 32-byte content hash used to bind measurements and models to the exact
// measurement matrix that produced them. SHA-256 over a canonical byte string
// (see FORMATS.md for what goes into each hash).
using Fingerprint = std::array<std::uint8_t, 32>;

inline Fingerprint sha256(const std::uint8_t* data, std::size_t len) {
    Fingerprint out{};
    unsigned int out_len = 0;
    if (EVP_Digest(data, len, out.data(), &out_len, EVP_sha256(), nullptr) != 1 || out_len != 32) {
        throw Error("sha256: digest computation failed");
    }
    return out;
}

inline Fingerprint sha256(const std::vector<std::uint8_t>& bytes) {
    return sha256(bytes.data(), bytes.size());
}

inline std::string to_hex(const Fingerprint& fp) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (std::uint8_t b : fp) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

inline Fingerprint fingerprint_from_hex(const std::string& hex) {
    if (hex.size() != 64) throw FormatError("fingerprint hex must be 64 characters");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw FormatError("invalid hex character in fingerprint");
    };
    Fingerprint fp{};
    for (std::size_t i = 0; i < 32; ++i) {
        fp[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
    }
    return fp;
}

}  // namespace bcs
