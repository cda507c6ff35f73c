#pragma once

// Deterministic synthetic grayscale scenes: gradient background, soft Gaussian
// blobs, and a few hard-edged rectangles. Varied enough to train on, with both
// smooth shading and sharp structure.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <bcs/image.hpp>
#include <bcs/rng.hpp>

namespace synth {

inline bcs::ImagePlane scene(std::uint64_t seed, int w, int h) {
    bcs::Rng rng(seed);
    bcs::ImagePlane img(w, h);

    const double base = rng.uniform(0.15, 0.55);
    const double gx = rng.uniform(-0.3, 0.3) / w;
    const double gy = rng.uniform(-0.3, 0.3) / h;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(y, x) = base + gx * x + gy * y;

    const int blobs = 2 + static_cast<int>(rng.uniform() * 4);
    for (int k = 0; k < blobs; ++k) {
        const double cx = rng.uniform(0.1, 0.9) * w;
        const double cy = rng.uniform(0.1, 0.9) * h;
        const double sx = rng.uniform(0.05, 0.25) * w;
        const double sy = rng.uniform(0.05, 0.25) * h;
        const double amp = rng.uniform(-0.5, 0.7);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double dx = (x - cx) / sx, dy = (y - cy) / sy;
                img.at(y, x) += amp * std::exp(-0.5 * (dx * dx + dy * dy));
            }
    }

    const int rects = static_cast<int>(rng.uniform() * 3);
    for (int k = 0; k < rects; ++k) {
        const int rw = 2 + static_cast<int>(rng.uniform() * 0.4 * w);
        const int rh = 2 + static_cast<int>(rng.uniform() * 0.4 * h);
        const int x0 = static_cast<int>(rng.uniform() * (w - rw));
        const int y0 = static_cast<int>(rng.uniform() * (h - rh));
        const double level = rng.uniform(0.05, 0.95);
        const double blend = rng.uniform(0.5, 1.0);
        for (int y = y0; y < y0 + rh; ++y)
            for (int x = x0; x < x0 + rw; ++x)
                img.at(y, x) = (1.0 - blend) * img.at(y, x) + blend * level;
    }

    img.clamp_unit();
    return img;
}

// scene() plus sinusoidal grating texture. Oscillatory content is what
// total-variation priors flatten, while the grating family is low-dimensional
// enough for a learned reconstructor to capture; this is the corpus used when
// comparing the two.
inline bcs::ImagePlane textured_scene(std::uint64_t seed, int w, int h) {
    bcs::ImagePlane img = scene(seed, w, h);
    bcs::Rng rng(bcs::derive_seed(seed, 0x746578));  // "tex"
    const int gratings = 2 + (rng.uniform(0.0, 1.0) < 0.5 ? 0 : 1);
    for (int g = 0; g < gratings; ++g) {
        const double theta = rng.uniform(0.0, 3.14159265358979);
        const double freq = rng.uniform(0.55, 1.6);  // rad/px: period 4 - 11.4 px
        const double phase = rng.uniform(0.0, 6.283185307179586);
        const double amp = rng.uniform(0.10, 0.18);
        const double kx = freq * std::cos(theta), ky = freq * std::sin(theta);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.at(y, x) += amp * std::sin(kx * x + ky * y + phase);
    }
    img.clamp_unit();
    return img;
}

// Hard-edged binary letter "F" on a dark background; a simple single-pixel
// imaging target with known structure.
inline bcs::ImagePlane letter_target(int w, int h, double fg = 1.0, double bg = 0.1) {
    bcs::ImagePlane img(w, h);
    for (double& v : img.pixels) v = bg;
    const int x0 = w / 4, x1 = w - w / 4;
    const int y0 = h / 5, y1 = h - h / 5;
    const int bar = std::max(1, h / 8);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x0 + bar; ++x) img.at(y, x) = fg;
    for (int y = y0; y < y0 + bar; ++y)
        for (int x = x0; x < x1; ++x) img.at(y, x) = fg;
    const int mid = (y0 + y1) / 2;
    for (int y = mid; y < mid + bar && y < h; ++y)
        for (int x = x0; x < x0 + (x1 - x0) * 2 / 3; ++x) img.at(y, x) = fg;
    return img;
}

}  // namespace synth
