#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bcs/errors.hpp"
#include "bcs/image.hpp"

namespace bcs {

// Reported in place of +inf when MSE is exactly zero, keeping averages finite.
inline constexpr double kPsnrCapDb = 100.0;

inline double mse(const ImagePlane& reference, const ImagePlane& test) {
    if (reference.width != test.width || reference.height != test.height) {
        throw DimensionError("mse: image dimensions differ");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < reference.pixels.size(); ++i) {
        const double d = reference.pixels[i] - test.pixels[i];
        acc += d * d;
    }
    return acc / static_cast<double>(reference.pixels.size());
}

// 10 * log10(1 / MSE) for unit dynamic range, capped at 100 dB.
inline double psnr(const ImagePlane& reference, const ImagePlane& test) {
    const double e = mse(reference, test);
    if (e <= 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / e));
}

namespace detail {

inline std::vector<double> ssim_gaussian_kernel() {
    // 11 taps, sigma 1.5, normalized to unit sum.
    std::vector<double> k(11);
    double total = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5;
        k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        total += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= total;
    return k;
}

// Separable 'valid' filtering: output is (h-10) x (w-10).
inline std::vector<double> filter_valid(const std::vector<double>& img, int w, int h,
                                        const std::vector<double>& k) {
    const int out_w = w - 10, out_h = h - 10;
    std::vector<double> rows(static_cast<std::size_t>(out_w) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < out_w; ++x) {
            double acc = 0.0;
            for (int t = 0; t < 11; ++t) acc += k[static_cast<std::size_t>(t)] * img[static_cast<std::size_t>(y) * w + x + t];
            rows[static_cast<std::size_t>(y) * out_w + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(out_w) * out_h, 0.0);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            double acc = 0.0;
            for (int t = 0; t < 11; ++t) acc += k[static_cast<std::size_t>(t)] * rows[static_cast<std::size_t>(y + t) * out_w + x];
            out[static_cast<std::size_t>(y) * out_w + x] = acc;
        }
    return out;
}

}  // namespace detail

// Mean local SSIM over the valid region: Gaussian window 11x11 (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range L = 1.
inline double ssim(const ImagePlane& reference, const ImagePlane& test) {
    if (reference.width != test.width || reference.height != test.height) {
        throw DimensionError("ssim: image dimensions differ");
    }
    if (reference.width < 11 || reference.height < 11) {
        throw DimensionError("ssim: images must be at least 11x11");
    }
    const int w = reference.width, h = reference.height;
    const std::vector<double> kernel = detail::ssim_gaussian_kernel();

    const std::size_t n = reference.pixels.size();
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = reference.pixels[i] * reference.pixels[i];
        yy[i] = test.pixels[i] * test.pixels[i];
        xy[i] = reference.pixels[i] * test.pixels[i];
    }
    const auto mu_x = detail::filter_valid(reference.pixels, w, h, kernel);
    const auto mu_y = detail::filter_valid(test.pixels, w, h, kernel);
    const auto m_xx = detail::filter_valid(xx, w, h, kernel);
    const auto m_yy = detail::filter_valid(yy, w, h, kernel);
    const auto m_xy = detail::filter_valid(xy, w, h, kernel);

    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        const double var_x = m_xx[i] - mu_x[i] * mu_x[i];
        const double var_y = m_yy[i] - mu_y[i] * mu_y[i];
        const double cov = m_xy[i] - mu_x[i] * mu_y[i];
        acc += ((2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * cov + c2)) /
               ((mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (var_x + var_y + c2));
    }
    return acc / static_cast<double>(mu_x.size());
}

struct ImageScore {
    std::string name;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct EvalReport {
    std::string method;
    std::string dataset;
    double ratio = 0.0;
    std::vector<ImageScore> scores;
    double mean_psnr_db = 0.0;
    double mean_ssim = 0.0;
};

// Per-image PSNR/SSIM plus arithmetic means over the set.
inline EvalReport evaluate_set(const std::vector<std::pair<ImagePlane, ImagePlane>>& pairs,
                               const std::vector<std::string>& names, const std::string& method,
                               const std::string& dataset, double ratio) {
    if (pairs.empty()) throw ValidationError("evaluate_set: no image pairs");
    EvalReport rep;
    rep.method = method;
    rep.dataset = dataset;
    rep.ratio = ratio;
    double psnr_acc = 0.0, ssim_acc = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        ImageScore s;
        s.name = i < names.size() ? names[i] : ("image" + std::to_string(i));
        s.psnr_db = psnr(pairs[i].first, pairs[i].second);
        s.ssim = ssim(pairs[i].first, pairs[i].second);
        psnr_acc += s.psnr_db;
        ssim_acc += s.ssim;
        rep.scores.push_back(std::move(s));
    }
    rep.mean_psnr_db = psnr_acc / static_cast<double>(rep.scores.size());
    rep.mean_ssim = ssim_acc / static_cast<double>(rep.scores.size());
    return rep;
}

// CSV layout: header, one row per image, then a summary row. LF endings.
inline void write_report_csv(const EvalReport& rep, std::ostream& out) {
    out << "method,dataset,ratio,image,psnr_db,ssim\n";
    out << std::setprecision(12);
    for (const ImageScore& s : rep.scores) {
        out << rep.method << ',' << rep.dataset << ',' << rep.ratio << ',' << s.name << ','
            << s.psnr_db << ',' << s.ssim << '\n';
    }
    out << rep.method << ',' << rep.dataset << ',' << rep.ratio << ",average," << rep.mean_psnr_db
        << ',' << rep.mean_ssim << '\n';
}

// Aligned summary table (ratio, PSNR, SSIM).
inline void write_report_table(const EvalReport& rep, std::ostream& out) {
    std::ostringstream ratio;
    ratio << std::fixed << std::setprecision(2) << rep.ratio * 100.0 << "%";
    out << std::left << std::setw(12) << "Method" << std::setw(12) << "Dataset" << std::setw(8)
        << "Ratio" << std::right << std::setw(10) << "PSNR" << std::setw(10) << "SSIM" << "\n";
    out << std::left << std::setw(12) << rep.method << std::setw(12) << rep.dataset << std::setw(8)
        << ratio.str() << std::right << std::fixed << std::setprecision(2) << std::setw(10)
        << rep.mean_psnr_db << std::setprecision(4) << std::setw(10) << rep.mean_ssim << "\n";
}

}  // namespace bcs
