#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bcs/errors.hpp"
#include "bcs/image.hpp"
#include "bcs/sensing.hpp"

// Total-variation baseline: approximately minimizes
//     F(x) = ||Phi x - y||^2 + lambda * TV(x)   over x in [0,1]^N,
// with anisotropic TV (l1 of forward differences, replicate boundary) and the
// block-diagonal operator applied implicitly per block. Forward-backward
// iterations with the TV proximal step approximated by a fixed number of dual
// projections; a backtracking accept test keeps the objective non-increasing
// even though the prox is inexact.

namespace bcs {

struct TVConfig {
    double lambda = 0.01;
    int max_iters = 2000;
    double tol = 1e-5;
    double smoothing_eps = 0.0;  // > 0 switches to smoothed-TV gradient descent
    int prox_iters = 20;         // inner dual iterations per prox evaluation
};

inline void validate(const TVConfig& cfg) {
    if (!(cfg.lambda > 0.0)) throw ValidationError("tv: lambda must be > 0");
    if (!(cfg.tol > 0.0)) throw ValidationError("tv: tol must be > 0");
    if (cfg.max_iters < 1) throw ValidationError("tv: max_iters must be >= 1");
    if (cfg.smoothing_eps < 0.0) throw ValidationError("tv: smoothing_eps must be >= 0");
}

namespace tv_detail {

// Phi and Phi^T applied block-by-block; vectors use image raster order and
// tensor (row, col, channel) order.
struct BlockOperator {
    const BlockMatrix* m;
    int width, height;
    int grid_h, grid_w;

    BlockOperator(const BlockMatrix& mat, int w, int h)
        : m(&mat), width(w), height(h), grid_h(h / mat.block_size), grid_w(w / mat.block_size) {}

    std::size_t measurement_count() const {
        return static_cast<std::size_t>(grid_h) * grid_w * m->rows;
    }

    void forward(const std::vector<double>& x, std::vector<double>& y) const {
        const int b = m->block_size;
        y.assign(measurement_count(), 0.0);
        std::size_t out = 0;
        for (int i = 0; i < grid_h; ++i)
            for (int j = 0; j < grid_w; ++j)
                for (int r = 0; r < m->rows; ++r) {
                    const std::uint8_t* row = m->bits.data() + static_cast<std::size_t>(r) * m->cols();
                    double acc = 0.0;
                    for (int yy = 0; yy < b; ++yy)
                        for (int xx = 0; xx < b; ++xx)
                            if (row[yy * b + xx]) acc += x[static_cast<std::size_t>(i * b + yy) * width + j * b + xx];
                    y[out++] = acc;
                }
    }

    void adjoint(const std::vector<double>& y, std::vector<double>& x) const {
        const int b = m->block_size;
        x.assign(static_cast<std::size_t>(width) * height, 0.0);
        std::size_t in = 0;
        for (int i = 0; i < grid_h; ++i)
            for (int j = 0; j < grid_w; ++j)
                for (int r = 0; r < m->rows; ++r) {
                    const double v = y[in++];
                    if (v == 0.0) continue;
                    const std::uint8_t* row = m->bits.data() + static_cast<std::size_t>(r) * m->cols();
                    for (int yy = 0; yy < b; ++yy)
                        for (int xx = 0; xx < b; ++xx)
                            if (row[yy * b + xx]) x[static_cast<std::size_t>(i * b + yy) * width + j * b + xx] += v;
                }
    }
};

// Largest eigenvalue of A^T A by a fixed number of power-iteration steps,
// started from the normalized all-ones vector.
inline double spectral_bound(const BlockMatrix& m, int steps = 20) {
    const int n = m.cols();
    std::vector<double> gram(static_cast<std::size_t>(n) * n, 0.0);
    for (int r = 0; r < m.rows; ++r)
        for (int i = 0; i < n; ++i)
            if (m.bit(r, i))
                for (int j = 0; j < n; ++j)
                    if (m.bit(r, j)) gram[static_cast<std::size_t>(i) * n + j] += 1.0;
    std::vector<double> v(static_cast<std::size_t>(n), 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> gv(static_cast<std::size_t>(n));
    double lambda = 1.0;
    for (int s = 0; s < steps; ++s) {
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += gram[static_cast<std::size_t>(i) * n + j] * v[static_cast<std::size_t>(j)];
            gv[static_cast<std::size_t>(i)] = acc;
        }
        double norm = 0.0;
        for (double g : gv) norm += g * g;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 1.0;  // all-zero matrix; any step works
        lambda = norm;
        for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = gv[static_cast<std::size_t>(i)] / norm;
    }
    return lambda;
}

inline double anisotropic_tv(const std::vector<double>& x, int w, int h, double eps) {
    double acc = 0.0;
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            const double v = x[static_cast<std::size_t>(y) * w + xx];
            if (xx + 1 < w) {
                const double d = x[static_cast<std::size_t>(y) * w + xx + 1] - v;
                acc += eps > 0.0 ? std::sqrt(d * d + eps * eps) : std::abs(d);
            }
            if (y + 1 < h) {
                const double d = x[static_cast<std::size_t>(y + 1) * w + xx] - v;
                acc += eps > 0.0 ? std::sqrt(d * d + eps * eps) : std::abs(d);
            }
        }
    return acc;
}

// prox of alpha*TV + box indicator at z, by accelerated projected gradient on
// the dual (anisotropic flavor of the FGP scheme). Exact when alpha == 0.
inline void tv_prox(const std::vector<double>& z, int w, int h, double alpha, int iters,
                    std::vector<double>& out) {
    const std::size_t n = z.size();
    out.resize(n);
    if (alpha <= 0.0) {
        for (std::size_t i = 0; i < n; ++i) out[i] = std::clamp(z[i], 0.0, 1.0);
        return;
    }
    std::vector<double> p(static_cast<std::size_t>(h) * (w - 1), 0.0);   // horizontal dual
    std::vector<double> q(static_cast<std::size_t>(h - 1) * w, 0.0);     // vertical dual
    std::vector<double> rp = p, rq = q;                                  // momentum points
    std::vector<double> u(n);
    double t_prev = 1.0;

    auto primal_from_dual = [&](const std::vector<double>& pp, const std::vector<double>& qq) {
        // u = clamp(z - alpha * D^T (p, q))
        for (std::size_t i = 0; i < n; ++i) u[i] = z[i];
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w - 1; ++x) {
                const double v = alpha * pp[static_cast<std::size_t>(y) * (w - 1) + x];
                u[static_cast<std::size_t>(y) * w + x] += v;
                u[static_cast<std::size_t>(y) * w + x + 1] -= v;
            }
        for (int y = 0; y < h - 1; ++y)
            for (int x = 0; x < w; ++x) {
                const double v = alpha * qq[static_cast<std::size_t>(y) * w + x];
                u[static_cast<std::size_t>(y) * w + x] += v;
                u[static_cast<std::size_t>(y + 1) * w + x] -= v;
            }
        for (std::size_t i = 0; i < n; ++i) u[i] = std::clamp(u[i], 0.0, 1.0);
    };

    for (int it = 0; it < iters; ++it) {
        primal_from_dual(rp, rq);
        // dual ascent step 1/(8*alpha) on <D u, (p,q)>, then l-inf projection
        std::vector<double> p_new(p.size()), q_new(q.size());
        const double step = 1.0 / (8.0 * alpha);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w - 1; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * (w - 1) + x;
                const double d = u[static_cast<std::size_t>(y) * w + x + 1] - u[static_cast<std::size_t>(y) * w + x];
                p_new[i] = std::clamp(rp[i] + step * d, -1.0, 1.0);
            }
        for (int y = 0; y < h - 1; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                const double d = u[static_cast<std::size_t>(y + 1) * w + x] - u[static_cast<std::size_t>(y) * w + x];
                q_new[i] = std::clamp(rq[i] + step * d, -1.0, 1.0);
            }
        const double t = (1.0 + std::sqrt(1.0 + 4.0 * t_prev * t_prev)) / 2.0;
        const double mom = (t_prev - 1.0) / t;
        for (std::size_t i = 0; i < p.size(); ++i) rp[i] = p_new[i] + mom * (p_new[i] - p[i]);
        for (std::size_t i = 0; i < q.size(); ++i) rq[i] = q_new[i] + mom * (q_new[i] - q[i]);
        p.swap(p_new);
        q.swap(q_new);
        t_prev = t;
    }
    primal_from_dual(p, q);
    out = u;
}

}  // namespace tv_detail

// F(x) with the module's fixed summation order: data residual in tensor
// order, then TV scanned row-major.
inline double objective_value(const BlockMatrix& m, const MeasurementTensor& tensor,
                              const ImagePlane& x, const TVConfig& cfg) {
    validate(cfg);
    if (x.width % m.block_size != 0 || x.height % m.block_size != 0 ||
        x.height / m.block_size != tensor.grid_h || x.width / m.block_size != tensor.grid_w ||
        tensor.channels != m.rows) {
        throw DimensionError("objective_value: inconsistent shapes");
    }
    tv_detail::BlockOperator op(m, x.width, x.height);
    std::vector<double> yx;
    op.forward(x.pixels, yx);
    double data = 0.0;
    for (std::size_t i = 0; i < yx.size(); ++i) {
        const double r = yx[i] - tensor.values[i];
        data += r * r;
    }
    const double value =
        data + cfg.lambda * tv_detail::anisotropic_tv(x.pixels, x.width, x.height, cfg.smoothing_eps);
    if (!std::isfinite(value)) throw NumericalError("objective_value: non-finite objective");
    return value;
}

struct TVResult {
    ImagePlane image;
    std::vector<double> objective_trace;  // F after every accepted iterate, F(x0) first
    int iterations = 0;
};

inline TVResult tv_reconstruct_traced(const BlockMatrix& m, const MeasurementTensor& tensor,
                                      int out_width, int out_height, const TVConfig& cfg) {
    validate(cfg);
    if (out_width % m.block_size != 0 || out_height % m.block_size != 0) {
        throw DimensionError("tv_reconstruct: output dimensions must be divisible by block size");
    }
    if (tensor.grid_h != out_height / m.block_size || tensor.grid_w != out_width / m.block_size ||
        tensor.channels != m.rows) {
        throw DimensionError("tv_reconstruct: tensor inconsistent with matrix and output size");
    }

    const int w = out_width, h = out_height;
    tv_detail::BlockOperator op(m, w, h);
    const double lip = 2.0 * tv_detail::spectral_bound(m) + 1e-12;
    double step = 1.0 / lip;
    const double step_cap = step;

    ImagePlane x(w, h, 0.0);
    TVResult res;
    res.image = x;
    double fx = objective_value(m, tensor, x, cfg);
    res.objective_trace.push_back(fx);

    std::vector<double> yx, grad_meas, grad(x.pixel_count()), z(x.pixel_count()), x_new;
    for (int it = 0; it < cfg.max_iters; ++it) {
        // gradient of the data term: 2 Phi^T (Phi x - y); smoothed-TV gradient
        // is folded in when smoothing_eps > 0
        op.forward(x.pixels, yx);
        for (std::size_t i = 0; i < yx.size(); ++i) yx[i] = 2.0 * (yx[i] - tensor.values[i]);
        op.adjoint(yx, grad);
        if (cfg.smoothing_eps > 0.0) {
            const double eps = cfg.smoothing_eps;
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) {
                    const std::size_t i = static_cast<std::size_t>(yy) * w + xx;
                    if (xx + 1 < w) {
                        const double d = x.pixels[i + 1] - x.pixels[i];
                        const double g = cfg.lambda * d / std::sqrt(d * d + eps * eps);
                        grad[i] -= g;
                        grad[i + 1] += g;
                    }
                    if (yy + 1 < h) {
                        const double d = x.pixels[i + w] - x.pixels[i];
                        const double g = cfg.lambda * d / std::sqrt(d * d + eps * eps);
                        grad[i] -= g;
                        grad[i + w] += g;
                    }
                }
        }

        bool accepted = false;
        double f_new = fx;
        for (int bt = 0; bt < 30; ++bt) {
            for (std::size_t i = 0; i < z.size(); ++i) z[i] = x.pixels[i] - step * grad[i];
            if (cfg.smoothing_eps > 0.0) {
                x_new.resize(z.size());
                for (std::size_t i = 0; i < z.size(); ++i) x_new[i] = std::clamp(z[i], 0.0, 1.0);
            } else {
                tv_detail::tv_prox(z, w, h, step * cfg.lambda, cfg.prox_iters, x_new);
            }
            ImagePlane cand(w, h);
            cand.pixels = x_new;
            f_new = objective_value(m, tensor, cand, cfg);
            if (f_new <= fx) {
                x = std::move(cand);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no decrease possible at any step size: done

        res.iterations = it + 1;
        const double rel_change = (fx - f_new) / std::max(1.0, std::abs(fx));
        fx = f_new;
        res.objective_trace.push_back(fx);
        step = std::min(step * 1.25, step_cap);  // recover step size after backtracks
        if (rel_change < cfg.tol) break;
    }
    res.image = x;
    res.image.clamp_unit();
    return res;
}

inline ImagePlane tv_reconstruct(const BlockMatrix& m, const MeasurementTensor& tensor,
                                 int out_width, int out_height, const TVConfig& cfg) {
    return tv_reconstruct_traced(m, tensor, out_width, out_height, cfg).image;
}

}  // namespace bcs
