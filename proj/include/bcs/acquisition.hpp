#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "bcs/errors.hpp"
#include "bcs/formats.hpp"
#include "bcs/rng.hpp"
#include "bcs/sensing.hpp"

// Simulated single-pixel camera signal chain: each projected pattern row
// produces one photodetector voltage
//     v_m = gain * (phi_m . x) + dark_offset + noise,
// plus one all-OFF (dark) and one all-ON (bright) reference frame.

namespace bcs {

struct DetectorModel {
    double gain = 1.0;         // volts per unit integrated intensity
    double dark_offset = 0.0;  // volts
    double noise_sigma = 0.0;  // volts, additive Gaussian
};

inline void validate(const DetectorModel& d) {
    if (!(d.gain > 0.0)) throw ValidationError("detector gain must be > 0");
    if (d.dark_offset < 0.0) throw ValidationError("dark offset must be >= 0");
    if (d.noise_sigma < 0.0) throw ValidationError("noise sigma must be >= 0");
}

// Scene as seen by the detector: per-pixel transmittance in [0, 1].
struct TargetScene {
    int width = 0;
    int height = 0;
    std::vector<double> transmittance;

    TargetScene() = default;
    TargetScene(int w, int h, double fill = 0.0)
        : width(w), height(h), transmittance(static_cast<std::size_t>(w) * h, fill) {}
    explicit TargetScene(const ImagePlane& img)
        : width(img.width), height(img.height), transmittance(img.pixels) {}

    double& at(int y, int x) { return transmittance[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return transmittance[static_cast<std::size_t>(y) * width + x]; }
};

// Uncalibrated voltages in (block row, block col, channel) order, tagged with
// the fingerprint of the matrix they were acquired under.
struct RawMeasurementSet {
    std::vector<double> voltages;
    Fingerprint matrix_fingerprint{};
    double dark_reading = 0.0;
    double bright_reading = 0.0;
};

inline RawMeasurementSet acquire(const TargetScene& scene, const BlockMatrix& m,
                                 const DetectorModel& detector, std::uint64_t seed) {
    validate(detector);
    const int b = m.block_size;
    if (scene.width % b != 0 || scene.height % b != 0) {
        throw DimensionError("acquire: scene dimensions must be divisible by the block size");
    }
    ImagePlane img(scene.width, scene.height);
    img.pixels = scene.transmittance;
    const MeasurementTensor ideal = sample_image(m, img);

    Rng rng(seed);
    auto noise = [&]() { return detector.noise_sigma > 0.0 ? detector.noise_sigma * rng.gaussian() : 0.0; };

    RawMeasurementSet raw;
    raw.matrix_fingerprint = m.fingerprint;
    raw.voltages.resize(ideal.values.size());
    for (std::size_t i = 0; i < ideal.values.size(); ++i) {
        raw.voltages[i] = detector.gain * ideal.values[i] + detector.dark_offset + noise();
    }
    const double total = std::accumulate(scene.transmittance.begin(), scene.transmittance.end(), 0.0);
    raw.dark_reading = detector.dark_offset + noise();
    raw.bright_reading = detector.gain * total + detector.dark_offset + noise();
    return raw;
}

// Mean of repeated all-OFF frames.
inline double estimate_dark(const std::vector<double>& readings) {
    if (readings.empty()) throw ValidationError("estimate_dark: no readings");
    return std::accumulate(readings.begin(), readings.end(), 0.0) /
           static_cast<double>(readings.size());
}

// Per-pixel maximum intensity from an all-ON frame. Uses the per-pixel
// convention a = dark / (m*n), so b = a + (all_on - dark) / (m*n).
inline double estimate_bright(double all_on_reading, double dark, int m, int n) {
    if (m <= 0 || n <= 0) throw ValidationError("estimate_bright: pixel counts must be positive");
    if (all_on_reading <= dark) {
        throw CalibrationError("estimate_bright: all-ON reading does not exceed dark (no light)");
    }
    const double pixels = static_cast<double>(m) * n;
    const double a = dark / pixels;
    return a + (all_on_reading - dark) / pixels;
}

// ---- BCSR1: raw measurement file ------------------------------------------

inline std::vector<std::uint8_t> encode_raw(const RawMeasurementSet& raw) {
    std::vector<std::uint8_t> b;
    b.reserve(57 + 8 * raw.voltages.size());
    b.insert(b.end(), {'B', 'C', 'S', 'R'});
    b.push_back(0x01);
    wire::put_u32(b, static_cast<std::uint32_t>(raw.voltages.size()));
    b.insert(b.end(), raw.matrix_fingerprint.begin(), raw.matrix_fingerprint.end());
    wire::put_f64(b, raw.dark_reading);
    wire::put_f64(b, raw.bright_reading);
    for (double v : raw.voltages) wire::put_f64(b, v);
    return b;
}

inline RawMeasurementSet decode_raw(const std::vector<std::uint8_t>& bytes) {
    wire::Reader r(bytes.data(), bytes.size(), "BCSR1");
    const std::uint8_t* magic = r.take(4);
    if (magic[0] != 'B' || magic[1] != 'C' || magic[2] != 'S' || magic[3] != 'R') {
        throw FormatError("BCSR1: bad magic");
    }
    if (r.u8() != 0x01) throw FormatError("BCSR1: unsupported version");
    RawMeasurementSet raw;
    const std::uint32_t count = r.u32();
    const std::uint8_t* fp = r.take(32);
    std::copy(fp, fp + 32, raw.matrix_fingerprint.begin());
    raw.dark_reading = r.f64();
    raw.bright_reading = r.f64();
    if (r.remaining() != 8ull * count) {
        throw FormatError("BCSR1: header is inconsistent with payload length");
    }
    raw.voltages.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) raw.voltages[i] = r.f64();
    return raw;
}

inline void write_raw(const RawMeasurementSet& raw, const std::string& path) {
    wire::write_file(path, encode_raw(raw));
}

inline RawMeasurementSet read_raw(const std::string& path) {
    return decode_raw(wire::read_file(path));
}

}  // namespace bcs
