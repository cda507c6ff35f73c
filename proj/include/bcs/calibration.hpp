#pragma once

#include <vector>

#include "bcs/acquisition.hpp"
#include "bcs/errors.hpp"
#include "bcs/sensing.hpp"

namespace bcs {

// Scene intensity range used for the distribution-shift transform: a is the
// per-pixel minimum, b the per-pixel maximum, both in volts.
struct CalibrationParams {
    double a = 0.0;
    double b = 1.0;
};

// The affine transform for one measurement. y has already been dark-subtracted.
inline double calibrate_value(double y, double a, double b, double row_sum) {
    return y / (b - a) - (a / (b - a)) * row_sum;
}

// Maps raw voltages into the measurement distribution the reconstruction
// models were trained on:
//   y'_m = y_m - dark,   y~_m = y'_m / (b-a) - (a / (b-a)) * sum_i phi_{m,i}.
// Results are packed on the block grid in (row, col, channel) order.
inline MeasurementTensor calibrate(const RawMeasurementSet& raw, const CalibrationParams& params,
                                   const BlockMatrix& m, int grid_h, int grid_w) {
    if (!(params.b > params.a)) throw CalibrationError("calibrate: requires b > a");
    if (raw.matrix_fingerprint != m.fingerprint) {
        throw ProvenanceError("calibrate: raw measurements were acquired under a different matrix");
    }
    const std::size_t expected = static_cast<std::size_t>(grid_h) * grid_w * m.rows;
    if (raw.voltages.size() != expected) {
        throw DimensionError("calibrate: voltage count does not match the block grid");
    }
    const std::vector<int> row_sums = matrix_row_sums(m);

    MeasurementTensor t;
    t.grid_h = grid_h;
    t.grid_w = grid_w;
    t.channels = m.rows;
    t.matrix_fingerprint = m.fingerprint;
    t.values.resize(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        const int channel = static_cast<int>(i % m.rows);
        const double y = raw.voltages[i] - raw.dark_reading;
        t.values[i] = calibrate_value(y, params.a, params.b,
                                      static_cast<double>(row_sums[static_cast<std::size_t>(channel)]));
    }
    return t;
}

}  // namespace bcs
