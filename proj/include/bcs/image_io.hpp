#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "bcs/errors.hpp"
#include "bcs/image.hpp"

namespace bcs {

// Rec. 601 luminance, the conversion used for all color inputs.
inline double luminance(double r, double g, double b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

namespace detail {

inline int pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments, then reads one non-negative integer.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) throw FormatError("PNM: malformed header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

}  // namespace detail

// Reads binary PGM (P5) or PPM (P6); color is reduced to luminance and sample
// values map linearly onto [0, 1].
inline ImagePlane read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("PNM: cannot open " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6')) throw FormatError("PNM: bad magic in " + path);
    const bool color = (m1 == '6');
    const int w = detail::pnm_token(in);
    const int h = detail::pnm_token(in);
    const int maxval = detail::pnm_token(in);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
        throw FormatError("PNM: invalid header in " + path);
    }
    const int bytes_per_sample = maxval > 255 ? 2 : 1;
    const int samples = color ? 3 : 1;
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * samples * bytes_per_sample);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw FormatError("PNM: truncated payload in " + path);
    }
    ImagePlane img(w, h);
    const double scale = 1.0 / maxval;
    std::size_t pos = 0;
    auto next_sample = [&]() {
        int v = raw[pos++];
        if (bytes_per_sample == 2) v = (v << 8) | raw[pos++];  // big-endian per Netpbm
        return v * scale;
    };
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        if (color) {
            const double r = next_sample(), g = next_sample(), b = next_sample();
            img.pixels[i] = luminance(r, g, b);
        } else {
            img.pixels[i] = next_sample();
        }
    }
    return img;
}

// Writes binary 8-bit PGM (P5, maxval 255).
inline void write_pgm(const ImagePlane& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("PGM: cannot open " + path + " for writing");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width));
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double p = std::clamp(img.at(y, x), 0.0, 1.0);
            row[static_cast<std::size_t>(x)] = static_cast<std::uint8_t>(std::lround(p * 255.0));
        }
        out.write(reinterpret_cast<const char*>(row.data()), img.width);
    }
    if (!out) throw FormatError("PGM: write failed for " + path);
}

// Reads a PNG of any color type as 8-bit grayscale in [0, 1].
inline ImagePlane read_png(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw FormatError("PNG: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw FormatError("PNG: init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw FormatError("PNG: decode error in " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_expand(png);
    const int color_type = png_get_color_type(png, info);
    if (color_type & PNG_COLOR_MASK_COLOR) {
        // error_action 1: silently use the luminance approximation.
        png_set_rgb_to_gray(png, 1, -1, -1);
    }
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    std::vector<std::uint8_t> rowbuf(png_get_rowbytes(png, info));
    ImagePlane img(w, h);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, rowbuf.data(), nullptr);
        for (int x = 0; x < w; ++x) img.at(y, x) = rowbuf[static_cast<std::size_t>(x)] / 255.0;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

// Dispatch on extension. Throws FormatError for anything unreadable.
inline ImagePlane read_image(const std::string& path) {
    std::string ext = std::filesystem::path(path).extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
    if (ext == ".png") return read_png(path);
    throw FormatError("unsupported image extension: " + path);
}

}  // namespace bcs
