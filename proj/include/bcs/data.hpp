#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "bcs/errors.hpp"
#include "bcs/image.hpp"
#include "bcs/image_io.hpp"
#include "bcs/rng.hpp"
#include "bcs/sensing.hpp"

namespace bcs {

struct CorpusImage {
    std::string name;
    ImagePlane image;
};

// Loads every readable raster image under `dir` (non-recursive), grayscale
// in [0,1], center-cropped so both dimensions are divisible by 32.
// Unreadable files are skipped with a warning on `warn`.
inline std::vector<CorpusImage> load_corpus(const std::string& dir,
                                            std::ostream* warn = &std::cerr) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ValidationError("corpus path is not a directory: " + dir);
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm" || ext == ".png")
            paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    std::vector<CorpusImage> corpus;
    for (const auto& p : paths) {
        try {
            ImagePlane img = read_image(p.string());
            const int w = img.width / 32 * 32;
            const int h = img.height / 32 * 32;
            if (w == 0 || h == 0) throw ValidationError("image smaller than 32x32");
            if (w != img.width || h != img.height) img = center_crop(img, w, h);
            corpus.push_back({p.stem().string(), std::move(img)});
        } catch (const std::exception& e) {
            if (warn) *warn << "warning: skipping " << p.string() << ": " << e.what() << "\n";
        }
    }
    if (corpus.empty()) throw ValidationError("no readable images in " + dir);
    return corpus;
}

struct DatasetSplit {
    std::vector<CorpusImage> train, validation, test;
    uint64_t split_seed = 0;
};

// 8:1:1 shuffled split; validation and test each get floor(n/10).
inline DatasetSplit split_corpus(std::vector<CorpusImage> corpus, uint64_t seed) {
    const std::size_t n = corpus.size();
    if (n < 10) throw ValidationError("corpus must contain at least 10 images to split");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t n_val = n / 10, n_test = n / 10;
    DatasetSplit split;
    split.split_seed = seed;
    for (std::size_t i = 0; i < n; ++i) {
        CorpusImage& item = corpus[order[i]];
        if (i < n - n_val - n_test) split.train.push_back(std::move(item));
        else if (i < n - n_test) split.validation.push_back(std::move(item));
        else split.test.push_back(std::move(item));
    }
    return split;
}

struct AugmentConfig {
    double brightness_delta = 0.2;
    double contrast_lo = 0.8;
    double contrast_hi = 1.2;
    double hflip_prob = 0.5;
    double rotation_degrees = 10.0;
    bool enabled = true;

    void validate() const {
        if (brightness_delta < 0.0) throw ValidationError("brightness_delta must be >= 0");
        if (contrast_lo <= 0.0 || contrast_hi < contrast_lo)
            throw ValidationError("contrast range must be positive and ordered");
        if (hflip_prob < 0.0 || hflip_prob > 1.0)
            throw ValidationError("hflip_prob must lie in [0,1]");
        if (rotation_degrees < 0.0) throw ValidationError("rotation_degrees must be >= 0");
    }
};

namespace detail {

// Inverse-map rotation about the image center, bilinear sampling with
// edge-replicate (clamped) source coordinates. angle 0 is an exact identity.
inline ImagePlane rotate_edge_replicate(const ImagePlane& img, double degrees) {
    ImagePlane out(img.width, img.height);
    const double rad = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cy = (img.height - 1) / 2.0, cx = (img.width - 1) / 2.0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double dy = y - cy, dx = x - cx;
            const double sx = c * dx + s * dy + cx;
            const double sy = -s * dx + c * dy + cy;
            const double fx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
            const double fy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
            const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
            const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
            const double wx = fx - x0, wy = fy - y0;
            out.at(y, x) = (1 - wy) * ((1 - wx) * img.at(y0, x0) + wx * img.at(y0, x1)) +
                           wy * ((1 - wx) * img.at(y1, x0) + wx * img.at(y1, x1));
        }
    return out;
}

}  // namespace detail

// Pure function of (image, config, seed). Draw order: brightness, contrast,
// flip, rotation.
inline ImagePlane augment(const ImagePlane& img, const AugmentConfig& cfg, uint64_t seed) {
    cfg.validate();
    if (!cfg.enabled) return img;
    Rng rng(seed);
    const double delta = rng.uniform(-cfg.brightness_delta, cfg.brightness_delta);
    const double contrast = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
    const bool flip = rng.uniform() < cfg.hflip_prob;
    const double degrees = rng.uniform(-cfg.rotation_degrees, cfg.rotation_degrees);

    ImagePlane out = img;
    for (double& v : out.pixels) v += delta;
    double mean = 0.0;
    for (double v : out.pixels) mean += v;
    mean /= static_cast<double>(out.pixels.size());
    for (double& v : out.pixels) v = mean + contrast * (v - mean);
    if (flip)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width / 2; ++x)
                std::swap(out.at(y, x), out.at(y, out.width - 1 - x));
    if (degrees != 0.0) out = detail::rotate_edge_replicate(out, degrees);
    out.clamp_unit();
    return out;
}

struct TrainingPair {
    MeasurementTensor tensor;
    ImagePlane target;
};

// One (tensor, target) pair per input image, in input order. Per-item
// augmentation seeds derive from `seed`, so equal seeds give equal streams.
inline std::vector<TrainingPair> make_pairs(const std::vector<CorpusImage>& images,
                                            const BlockMatrix& matrix,
                                            const AugmentConfig& aug, uint64_t seed) {
    std::vector<TrainingPair> pairs;
    pairs.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        ImagePlane target = aug.enabled ? augment(images[i].image, aug, derive_seed(seed, i))
                                        : images[i].image;
        MeasurementTensor tensor = sample_image(matrix, target);
        pairs.push_back({std::move(tensor), std::move(target)});
    }
    return pairs;
}

}  // namespace bcs
