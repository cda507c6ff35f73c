#pragma once

#include <stdexcept>
#include <string>

namespace bcs {

// Error taxonomy mirrored by the CLI exit codes:
//   validation/dimension/format -> 2, provenance -> 3, numerical -> 4.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-supplied values (invalid ratio, empty input, malformed config).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Shape or tiling mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Malformed or truncated container files.
class FormatError : public Error {
public:
    using Error::Error;
};

// Calibration-specific failures (b <= a, no light).
class CalibrationError : public Error {
public:
    using Error::Error;
};

// Fingerprint mismatch between measurements and the matrix/model they claim.
class ProvenanceError : public Error {
public:
    using Error::Error;
};

// Non-finite objective or diverging iteration.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace bcs
