#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "bcs/errors.hpp"

namespace bcs::nn {

// Dense NCHW tensor of doubles. All layer math runs in 64-bit.
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    std::size_t size() const { return v.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t item_size() const { return static_cast<std::size_t>(c) * h * w; }

    double& at(int ni, int ci, int y, int x) {
        return v[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x];
    }
    double at(int ni, int ci, int y, int x) const {
        return v[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x];
    }

    double* item(int ni) { return v.data() + static_cast<std::size_t>(ni) * item_size(); }
    const double* item(int ni) const { return v.data() + static_cast<std::size_t>(ni) * item_size(); }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

inline Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w) {
        throw DimensionError("concat_channels: spatial/batch shapes differ");
    }
    Tensor4 out(a.n, a.c + b.c, a.h, a.w);
    for (int ni = 0; ni < a.n; ++ni) {
        double* dst = out.item(ni);
        std::copy(a.item(ni), a.item(ni) + a.item_size(), dst);
        std::copy(b.item(ni), b.item(ni) + b.item_size(), dst + a.item_size());
    }
    return out;
}

// Inverse of concat_channels for gradients.
inline std::pair<Tensor4, Tensor4> split_channels(const Tensor4& g, int c_first) {
    if (c_first < 0 || c_first > g.c) throw DimensionError("split_channels: bad channel count");
    Tensor4 ga(g.n, c_first, g.h, g.w);
    Tensor4 gb(g.n, g.c - c_first, g.h, g.w);
    for (int ni = 0; ni < g.n; ++ni) {
        const double* src = g.item(ni);
        std::copy(src, src + ga.item_size(), ga.item(ni));
        std::copy(src + ga.item_size(), src + g.item_size(), gb.item(ni));
    }
    return {std::move(ga), std::move(gb)};
}

}  // namespace bcs::nn
