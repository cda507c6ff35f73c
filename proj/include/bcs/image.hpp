#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bcs/errors.hpp"

namespace bcs {

// Grayscale image, row-major, pixel values in [0, 1].
struct ImagePlane {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    ImagePlane() = default;
    ImagePlane(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0) throw DimensionError("image dimensions must be positive");
    }

    double& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    std::size_t pixel_count() const { return pixels.size(); }

    bool in_unit_range() const {
        return std::all_of(pixels.begin(), pixels.end(),
                           [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; });
    }

    void clamp_unit() {
        for (double& p : pixels) p = std::clamp(p, 0.0, 1.0);
    }

    bool operator==(const ImagePlane& o) const {
        return width == o.width && height == o.height && pixels == o.pixels;
    }
};

inline ImagePlane center_crop(const ImagePlane& img, int crop_w, int crop_h) {
    if (crop_w > img.width || crop_h > img.height) {
        throw DimensionError("center_crop: crop size exceeds image size");
    }
    const int x0 = (img.width - crop_w) / 2;
    const int y0 = (img.height - crop_h) / 2;
    ImagePlane out(crop_w, crop_h);
    for (int y = 0; y < crop_h; ++y)
        for (int x = 0; x < crop_w; ++x) out.at(y, x) = img.at(y0 + y, x0 + x);
    return out;
}

}  // namespace bcs
