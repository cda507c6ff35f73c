#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bcs/errors.hpp"
#include "bcs/nn/tensor.hpp"
#include "bcs/rng.hpp"

namespace bcs::nn {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Named view of one parameter (or buffer) vector and its gradient.
struct ParamRef {
    std::string name;
    std::vector<double>* value = nullptr;
    std::vector<double>* grad = nullptr;  // null for non-trainable buffers
};

namespace detail {

// Unfolds conv patches: col is (c*k*k) x (out_h*out_w), row-major.
inline void im2col(const double* x, int c, int h, int w, int k, int stride, int pad,
                   std::vector<double>& col) {
    const int out_h = (h + 2 * pad - k) / stride + 1;
    const int out_w = (w + 2 * pad - k) / stride + 1;
    const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
    col.assign(static_cast<std::size_t>(c) * k * k * cols, 0.0);
    for (int ci = 0; ci < c; ++ci)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                double* dst = col.data() + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * cols;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    const double* src = x + (static_cast<std::size_t>(ci) * h + iy) * w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < w) dst[static_cast<std::size_t>(oy) * out_w + ox] = src[ix];
                    }
                }
            }
}

// Adjoint of im2col: scatter-adds columns back onto the (c, h, w) grid.
inline void col2im(const std::vector<double>& col, int c, int h, int w, int k, int stride, int pad,
                   double* x) {
    const int out_h = (h + 2 * pad - k) / stride + 1;
    const int out_w = (w + 2 * pad - k) / stride + 1;
    const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
    for (int ci = 0; ci < c; ++ci)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const double* src = col.data() + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * cols;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    double* dst = x + (static_cast<std::size_t>(ci) * h + iy) * w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < w) dst[ix] += src[static_cast<std::size_t>(oy) * out_w + ox];
                    }
                }
            }
}

}  // namespace detail

class Conv2d {
public:
    Conv2d(int in_c, int out_c, int k, int stride, int pad)
        : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad),
          weight_(static_cast<std::size_t>(out_c) * in_c * k * k, 0.0),
          bias_(static_cast<std::size_t>(out_c), 0.0),
          wgrad_(weight_.size(), 0.0), bgrad_(bias_.size(), 0.0) {}

    void init(Rng& rng) {
        // He-normal on fan-in, the usual choice ahead of (leaky-)ReLU.
        const double std_dev = std::sqrt(2.0 / (static_cast<double>(in_c_) * k_ * k_));
        for (double& v : weight_) v = std_dev * rng.gaussian();
        std::fill(bias_.begin(), bias_.end(), 0.0);
    }

    int out_h(int h) const { return (h + 2 * pad_ - k_) / stride_ + 1; }
    int out_w(int w) const { return (w + 2 * pad_ - k_) / stride_ + 1; }

    Tensor4 forward(const Tensor4& x) {
        if (x.c != in_c_) throw DimensionError("Conv2d: channel mismatch");
        input_ = x;
        const int oh = out_h(x.h), ow = out_w(x.w);
        Tensor4 out(x.n, out_c_, oh, ow);
        const std::size_t cols = static_cast<std::size_t>(oh) * ow;
        const int ckk = in_c_ * k_ * k_;
        ConstMatMap w_mat(weight_.data(), out_c_, ckk);
        for (int ni = 0; ni < x.n; ++ni) {
            detail::im2col(x.item(ni), in_c_, x.h, x.w, k_, stride_, pad_, col_);
            ConstMatMap col_mat(col_.data(), ckk, static_cast<Eigen::Index>(cols));
            MatMap out_mat(out.item(ni), out_c_, static_cast<Eigen::Index>(cols));
            out_mat.noalias() = w_mat * col_mat;
            for (int oc = 0; oc < out_c_; ++oc) out_mat.row(oc).array() += bias_[static_cast<std::size_t>(oc)];
        }
        return out;
    }

    Tensor4 backward(const Tensor4& gout) {
        const Tensor4& x = input_;
        const int oh = out_h(x.h), ow = out_w(x.w);
        const std::size_t cols = static_cast<std::size_t>(oh) * ow;
        const int ckk = in_c_ * k_ * k_;
        Tensor4 gin(x.n, in_c_, x.h, x.w);
        ConstMatMap w_mat(weight_.data(), out_c_, ckk);
        MatMap gw_mat(wgrad_.data(), out_c_, ckk);
        std::vector<double> gcol(static_cast<std::size_t>(ckk) * cols);
        for (int ni = 0; ni < x.n; ++ni) {
            detail::im2col(x.item(ni), in_c_, x.h, x.w, k_, stride_, pad_, col_);
            ConstMatMap col_mat(col_.data(), ckk, static_cast<Eigen::Index>(cols));
            ConstMatMap go_mat(gout.item(ni), out_c_, static_cast<Eigen::Index>(cols));
            gw_mat.noalias() += go_mat * col_mat.transpose();
            // Strict left-to-right accumulation: Eigen's .sum() groups SIMD
            // lanes by runtime pointer alignment, which breaks bit-level
            // reproducibility across allocations.
            for (int oc = 0; oc < out_c_; ++oc) {
                const double* grow = gout.item(ni) + static_cast<std::size_t>(oc) * cols;
                double acc = 0.0;
                for (std::size_t i = 0; i < cols; ++i) acc += grow[i];
                bgrad_[static_cast<std::size_t>(oc)] += acc;
            }
            MatMap gcol_mat(gcol.data(), ckk, static_cast<Eigen::Index>(cols));
            gcol_mat.noalias() = w_mat.transpose() * go_mat;
            detail::col2im(gcol, in_c_, x.h, x.w, k_, stride_, pad_, gin.item(ni));
        }
        return gin;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".weight", &weight_, &wgrad_});
        out.push_back({prefix + ".bias", &bias_, &bgrad_});
    }

    std::size_t param_count() const { return weight_.size() + bias_.size(); }

private:
    int in_c_, out_c_, k_, stride_, pad_;
    std::vector<double> weight_, bias_, wgrad_, bgrad_;
    std::vector<double> col_;
    Tensor4 input_;
};

class ConvTranspose2d {
public:
    ConvTranspose2d(int in_c, int out_c, int k, int stride, int pad)
        : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad),
          weight_(static_cast<std::size_t>(in_c) * out_c * k * k, 0.0),
          bias_(static_cast<std::size_t>(out_c), 0.0),
          wgrad_(weight_.size(), 0.0), bgrad_(bias_.size(), 0.0) {}

    void init(Rng& rng) {
        const double std_dev = std::sqrt(2.0 / (static_cast<double>(in_c_) * k_ * k_));
        for (double& v : weight_) v = std_dev * rng.gaussian();
        std::fill(bias_.begin(), bias_.end(), 0.0);
    }

    int out_h(int h) const { return (h - 1) * stride_ - 2 * pad_ + k_; }
    int out_w(int w) const { return (w - 1) * stride_ - 2 * pad_ + k_; }

    // Transpose convolution as the adjoint of a conv with the same geometry:
    // scatter (col2im) of W^T x over the output grid.
    Tensor4 forward(const Tensor4& x) {
        if (x.c != in_c_) throw DimensionError("ConvTranspose2d: channel mismatch");
        input_ = x;
        const int oh = out_h(x.h), ow = out_w(x.w);
        Tensor4 out(x.n, out_c_, oh, ow);
        const std::size_t cols = static_cast<std::size_t>(x.h) * x.w;
        const int ckk = out_c_ * k_ * k_;
        ConstMatMap w_mat(weight_.data(), in_c_, ckk);
        std::vector<double> colt(static_cast<std::size_t>(ckk) * cols);
        for (int ni = 0; ni < x.n; ++ni) {
            ConstMatMap x_mat(x.item(ni), in_c_, static_cast<Eigen::Index>(cols));
            MatMap colt_mat(colt.data(), ckk, static_cast<Eigen::Index>(cols));
            colt_mat.noalias() = w_mat.transpose() * x_mat;
            detail::col2im(colt, out_c_, oh, ow, k_, stride_, pad_, out.item(ni));
            for (int oc = 0; oc < out_c_; ++oc) {
                double* plane = out.item(ni) + static_cast<std::size_t>(oc) * oh * ow;
                for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i)
                    plane[i] += bias_[static_cast<std::size_t>(oc)];
            }
        }
        return out;
    }

    Tensor4 backward(const Tensor4& gout) {
        const Tensor4& x = input_;
        const int oh = out_h(x.h), ow = out_w(x.w);
        const std::size_t cols = static_cast<std::size_t>(x.h) * x.w;
        const int ckk = out_c_ * k_ * k_;
        Tensor4 gin(x.n, in_c_, x.h, x.w);
        ConstMatMap w_mat(weight_.data(), in_c_, ckk);
        MatMap gw_mat(wgrad_.data(), in_c_, ckk);
        for (int ni = 0; ni < x.n; ++ni) {
            detail::im2col(gout.item(ni), out_c_, oh, ow, k_, stride_, pad_, col_);
            ConstMatMap colg_mat(col_.data(), ckk, static_cast<Eigen::Index>(cols));
            ConstMatMap x_mat(x.item(ni), in_c_, static_cast<Eigen::Index>(cols));
            MatMap gin_mat(gin.item(ni), in_c_, static_cast<Eigen::Index>(cols));
            gin_mat.noalias() = w_mat * colg_mat;
            gw_mat.noalias() += x_mat * colg_mat.transpose();
            for (int oc = 0; oc < out_c_; ++oc) {
                const double* plane = gout.item(ni) + static_cast<std::size_t>(oc) * oh * ow;
                double acc = 0.0;
                for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) acc += plane[i];
                bgrad_[static_cast<std::size_t>(oc)] += acc;
            }
        }
        return gin;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".weight", &weight_, &wgrad_});
        out.push_back({prefix + ".bias", &bias_, &bgrad_});
    }

    std::size_t param_count() const { return weight_.size() + bias_.size(); }

private:
    int in_c_, out_c_, k_, stride_, pad_;
    std::vector<double> weight_, bias_, wgrad_, bgrad_;
    std::vector<double> col_;
    Tensor4 input_;
};

class BatchNorm2d {
public:
    explicit BatchNorm2d(int c, double eps = 1e-5, double momentum = 0.1)
        : c_(c), eps_(eps), momentum_(momentum),
          gamma_(static_cast<std::size_t>(c), 1.0), beta_(static_cast<std::size_t>(c), 0.0),
          ggrad_(static_cast<std::size_t>(c), 0.0), bgrad_(static_cast<std::size_t>(c), 0.0),
          running_mean_(static_cast<std::size_t>(c), 0.0),
          running_var_(static_cast<std::size_t>(c), 1.0) {}

    Tensor4 forward(const Tensor4& x, bool training) {
        if (x.c != c_) throw DimensionError("BatchNorm2d: channel mismatch");
        Tensor4 out(x.n, x.c, x.h, x.w);
        const std::size_t plane = x.plane();
        const double m = static_cast<double>(x.n) * plane;
        if (training) {
            training_ = true;
            xhat_ = Tensor4(x.n, x.c, x.h, x.w);
            inv_std_.assign(static_cast<std::size_t>(c_), 0.0);
            for (int ci = 0; ci < c_; ++ci) {
                double mean = 0.0;
                for (int ni = 0; ni < x.n; ++ni) {
                    const double* p = x.item(ni) + static_cast<std::size_t>(ci) * plane;
                    for (std::size_t i = 0; i < plane; ++i) mean += p[i];
                }
                mean /= m;
                double var = 0.0;
                for (int ni = 0; ni < x.n; ++ni) {
                    const double* p = x.item(ni) + static_cast<std::size_t>(ci) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        const double d = p[i] - mean;
                        var += d * d;
                    }
                }
                var /= m;
                const double istd = 1.0 / std::sqrt(var + eps_);
                inv_std_[static_cast<std::size_t>(ci)] = istd;
                for (int ni = 0; ni < x.n; ++ni) {
                    const double* p = x.item(ni) + static_cast<std::size_t>(ci) * plane;
                    double* xh = xhat_.item(ni) + static_cast<std::size_t>(ci) * plane;
                    double* o = out.item(ni) + static_cast<std::size_t>(ci) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        xh[i] = (p[i] - mean) * istd;
                        o[i] = gamma_[static_cast<std::size_t>(ci)] * xh[i] + beta_[static_cast<std::size_t>(ci)];
                    }
                }
                // running_var tracks the unbiased estimate
                const double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
                running_mean_[static_cast<std::size_t>(ci)] =
                    (1.0 - momentum_) * running_mean_[static_cast<std::size_t>(ci)] + momentum_ * mean;
                running_var_[static_cast<std::size_t>(ci)] =
                    (1.0 - momentum_) * running_var_[static_cast<std::size_t>(ci)] + momentum_ * unbiased;
            }
        } else {
            training_ = false;
            for (int ci = 0; ci < c_; ++ci) {
                const double istd = 1.0 / std::sqrt(running_var_[static_cast<std::size_t>(ci)] + eps_);
                const double mean = running_mean_[static_cast<std::size_t>(ci)];
                for (int ni = 0; ni < x.n; ++ni) {
                    const double* p = x.item(ni) + static_cast<std::size_t>(ci) * plane;
                    double* o = out.item(ni) + static_cast<std::size_t>(ci) * plane;
                    for (std::size_t i = 0; i < plane; ++i)
                        o[i] = gamma_[static_cast<std::size_t>(ci)] * (p[i] - mean) * istd + beta_[static_cast<std::size_t>(ci)];
                }
            }
        }
        return out;
    }

    Tensor4 backward(const Tensor4& gout) {
        if (!training_) throw Error("BatchNorm2d: backward requires a training-mode forward");
        const std::size_t plane = gout.plane();
        const double m = static_cast<double>(gout.n) * plane;
        Tensor4 gin(gout.n, gout.c, gout.h, gout.w);
        for (int ci = 0; ci < c_; ++ci) {
            double dgamma = 0.0, dbeta = 0.0;
            for (int ni = 0; ni < gout.n; ++ni) {
                const double* g = gout.item(ni) + static_cast<std::size_t>(ci) * plane;
                const double* xh = xhat_.item(ni) + static_cast<std::size_t>(ci) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    dgamma += g[i] * xh[i];
                    dbeta += g[i];
                }
            }
            ggrad_[static_cast<std::size_t>(ci)] += dgamma;
            bgrad_[static_cast<std::size_t>(ci)] += dbeta;
            const double scale = gamma_[static_cast<std::size_t>(ci)] * inv_std_[static_cast<std::size_t>(ci)] / m;
            for (int ni = 0; ni < gout.n; ++ni) {
                const double* g = gout.item(ni) + static_cast<std::size_t>(ci) * plane;
                const double* xh = xhat_.item(ni) + static_cast<std::size_t>(ci) * plane;
                double* gi = gin.item(ni) + static_cast<std::size_t>(ci) * plane;
                for (std::size_t i = 0; i < plane; ++i)
                    gi[i] = scale * (m * g[i] - dbeta - xh[i] * dgamma);
            }
        }
        return gin;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".gamma", &gamma_, &ggrad_});
        out.push_back({prefix + ".beta", &beta_, &bgrad_});
    }

    void collect_buffers(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".running_mean", &running_mean_, nullptr});
        out.push_back({prefix + ".running_var", &running_var_, nullptr});
    }

    std::size_t param_count() const { return gamma_.size() + beta_.size(); }

private:
    int c_;
    double eps_, momentum_;
    std::vector<double> gamma_, beta_, ggrad_, bgrad_;
    std::vector<double> running_mean_, running_var_;
    Tensor4 xhat_;
    std::vector<double> inv_std_;
    bool training_ = false;
};

// slope 0 gives plain ReLU.
class LeakyReLU {
public:
    explicit LeakyReLU(double slope = 0.0) : slope_(slope) {}

    Tensor4 forward(const Tensor4& x) {
        input_ = x;
        Tensor4 out = x;
        for (double& v : out.v) v = v > 0.0 ? v : slope_ * v;
        return out;
    }

    Tensor4 backward(const Tensor4& gout) {
        Tensor4 gin = gout;
        for (std::size_t i = 0; i < gin.v.size(); ++i)
            gin.v[i] = input_.v[i] > 0.0 ? gout.v[i] : slope_ * gout.v[i];
        return gin;
    }

private:
    double slope_;
    Tensor4 input_;
};

class Sigmoid {
public:
    Tensor4 forward(const Tensor4& x) {
        output_ = x;
        for (double& v : output_.v) v = 1.0 / (1.0 + std::exp(-v));
        return output_;
    }

    Tensor4 backward(const Tensor4& gout) {
        Tensor4 gin = gout;
        for (std::size_t i = 0; i < gin.v.size(); ++i)
            gin.v[i] = gout.v[i] * output_.v[i] * (1.0 - output_.v[i]);
        return gin;
    }

private:
    Tensor4 output_;
};

// 2x nearest-neighbor upsampling (used by the residual projection path).
class NearestUpsample2x {
public:
    Tensor4 forward(const Tensor4& x) {
        in_h_ = x.h;
        in_w_ = x.w;
        Tensor4 out(x.n, x.c, 2 * x.h, 2 * x.w);
        for (int ni = 0; ni < x.n; ++ni)
            for (int ci = 0; ci < x.c; ++ci)
                for (int y = 0; y < out.h; ++y)
                    for (int xx = 0; xx < out.w; ++xx)
                        out.at(ni, ci, y, xx) = x.at(ni, ci, y / 2, xx / 2);
        return out;
    }

    Tensor4 backward(const Tensor4& gout) {
        Tensor4 gin(gout.n, gout.c, in_h_, in_w_);
        for (int ni = 0; ni < gout.n; ++ni)
            for (int ci = 0; ci < gout.c; ++ci)
                for (int y = 0; y < gout.h; ++y)
                    for (int xx = 0; xx < gout.w; ++xx)
                        gin.at(ni, ci, y / 2, xx / 2) += gout.at(ni, ci, y, xx);
        return gin;
    }

private:
    int in_h_ = 0, in_w_ = 0;
};

}  // namespace bcs::nn
