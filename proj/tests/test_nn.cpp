#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include <bcs/nn/layers.hpp>
#include <bcs/nn/optim.hpp>
#include <bcs/nn/tensor.hpp>
#include <bcs/rng.hpp>

namespace {

using bcs::nn::Tensor4;

Tensor4 random_tensor(bcs::Rng& rng, int n, int c, int h, int w, double lo = -1.0, double hi = 1.0) {
    Tensor4 t(n, c, h, w);
    for (double& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

double dot(const Tensor4& a, const Tensor4& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) acc += a.v[i] * b.v[i];
    return acc;
}

// Naive direct convolution, written independently of the im2col path.
Tensor4 conv_naive(const Tensor4& x, const std::vector<double>& w, const std::vector<double>& b,
                   int out_c, int k, int stride, int pad) {
    const int oh = (x.h + 2 * pad - k) / stride + 1;
    const int ow = (x.w + 2 * pad - k) / stride + 1;
    Tensor4 out(x.n, out_c, oh, ow);
    for (int n = 0; n < x.n; ++n)
        for (int oc = 0; oc < out_c; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = b[static_cast<std::size_t>(oc)];
                    for (int ic = 0; ic < x.c; ++ic)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy * stride + ky - pad;
                                const int ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                                acc += w[((static_cast<std::size_t>(oc) * x.c + ic) * k + ky) * k + kx] *
                                       x.at(n, ic, iy, ix);
                            }
                    out.at(n, oc, oy, ox) = acc;
                }
    return out;
}

// Naive transpose convolution by direct scatter.
Tensor4 tconv_naive(const Tensor4& x, const std::vector<double>& w, const std::vector<double>& b,
                    int out_c, int k, int stride, int pad) {
    const int oh = (x.h - 1) * stride - 2 * pad + k;
    const int ow = (x.w - 1) * stride - 2 * pad + k;
    Tensor4 out(x.n, out_c, oh, ow);
    for (int n = 0; n < x.n; ++n)
        for (int oc = 0; oc < out_c; ++oc)
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) out.at(n, oc, y, xx) = b[static_cast<std::size_t>(oc)];
    for (int n = 0; n < x.n; ++n)
        for (int ic = 0; ic < x.c; ++ic)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix)
                    for (int oc = 0; oc < out_c; ++oc)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int oy = iy * stride + ky - pad;
                                const int ox = ix * stride + kx - pad;
                                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                                out.at(n, oc, oy, ox) +=
                                    w[((static_cast<std::size_t>(ic) * out_c + oc) * k + ky) * k + kx] *
                                    x.at(n, ic, iy, ix);
                            }
    return out;
}

// Central finite difference through an arbitrary scalar function.
double fd(const std::function<double()>& f, double* slot, double h = 1e-6) {
    const double saved = *slot;
    *slot = saved + h;
    const double hi = f();
    *slot = saved - h;
    const double lo = f();
    *slot = saved;
    return (hi - lo) / (2.0 * h);
}

TEST(Im2col, AdjointOfCol2im) {
    // <im2col(x), c> == <x, col2im(c)> makes the conv backward-data pass the
    // exact adjoint of the forward unfold.
    bcs::Rng rng(1);
    const int ch = 2, h = 5, w = 6, k = 3, stride = 2, pad = 1;
    Tensor4 x = random_tensor(rng, 1, ch, h, w);
    const int oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
    std::vector<double> col;
    bcs::nn::detail::im2col(x.item(0), ch, h, w, k, stride, pad, col);
    std::vector<double> c(col.size());
    for (double& v : c) v = rng.uniform(-1.0, 1.0);
    std::vector<double> back(static_cast<std::size_t>(ch) * h * w, 0.0);
    bcs::nn::detail::col2im(c, ch, h, w, k, stride, pad, back.data());
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < col.size(); ++i) lhs += col[i] * c[i];
    for (std::size_t i = 0; i < back.size(); ++i) rhs += x.v[i] * back[i];
    EXPECT_NEAR(lhs, rhs, 1e-10);
    EXPECT_EQ(col.size(), static_cast<std::size_t>(ch) * k * k * oh * ow);
}

TEST(Conv2d, ForwardMatchesNaive) {
    bcs::Rng rng(2);
    bcs::nn::Conv2d conv(3, 4, 3, 2, 1);
    conv.init(rng);
    std::vector<bcs::nn::ParamRef> params;
    conv.collect("c", params);
    const Tensor4 x = random_tensor(rng, 2, 3, 7, 6);
    for (double& v : *params[1].value) v = rng.uniform(-0.5, 0.5);  // nonzero bias
    const Tensor4 got = conv.forward(x);
    const Tensor4 want = conv_naive(x, *params[0].value, *params[1].value, 4, 3, 2, 1);
    ASSERT_TRUE(got.same_shape(want));
    for (std::size_t i = 0; i < got.v.size(); ++i) EXPECT_NEAR(got.v[i], want.v[i], 1e-10);
}

TEST(Conv2d, GradcheckAllSlots) {
    bcs::Rng rng(3);
    bcs::nn::Conv2d conv(2, 3, 3, 2, 1);
    conv.init(rng);
    std::vector<bcs::nn::ParamRef> params;
    conv.collect("c", params);
    Tensor4 x = random_tensor(rng, 2, 2, 5, 5);
    const Tensor4 r = random_tensor(rng, 2, 3, 3, 3);  // fixed cotangent

    auto loss = [&]() { return dot(conv.forward(x), r); };
    loss();
    for (auto& p : params) std::fill(p.grad->begin(), p.grad->end(), 0.0);
    const Tensor4 gx = conv.backward(r);

    for (std::size_t i = 0; i < x.v.size(); i += 7)
        EXPECT_NEAR(gx.v[i], fd(loss, &x.v[i]), 1e-6) << "input slot " << i;
    for (auto& p : params)
        for (std::size_t i = 0; i < p.value->size(); ++i)
            EXPECT_NEAR((*p.grad)[i], fd(loss, &(*p.value)[i]), 1e-6) << p.name << "[" << i << "]";
}

TEST(ConvTranspose2d, ForwardMatchesNaive) {
    bcs::Rng rng(4);
    bcs::nn::ConvTranspose2d tconv(3, 2, 4, 2, 1);
    tconv.init(rng);
    std::vector<bcs::nn::ParamRef> params;
    tconv.collect("t", params);
    for (double& v : *params[1].value) v = rng.uniform(-0.5, 0.5);
    const Tensor4 x = random_tensor(rng, 2, 3, 5, 4);
    const Tensor4 got = tconv.forward(x);
    const Tensor4 want = tconv_naive(x, *params[0].value, *params[1].value, 2, 4, 2, 1);
    ASSERT_TRUE(got.same_shape(want));
    EXPECT_EQ(got.h, 10);
    EXPECT_EQ(got.w, 8);
    for (std::size_t i = 0; i < got.v.size(); ++i) EXPECT_NEAR(got.v[i], want.v[i], 1e-10);
}

TEST(ConvTranspose2d, GradcheckAllSlots) {
    bcs::Rng rng(5);
    bcs::nn::ConvTranspose2d tconv(2, 2, 4, 2, 1);
    tconv.init(rng);
    std::vector<bcs::nn::ParamRef> params;
    tconv.collect("t", params);
    Tensor4 x = random_tensor(rng, 1, 2, 3, 3);
    const Tensor4 r = random_tensor(rng, 1, 2, 6, 6);

    auto loss = [&]() { return dot(tconv.forward(x), r); };
    loss();
    for (auto& p : params) std::fill(p.grad->begin(), p.grad->end(), 0.0);
    const Tensor4 gx = tconv.backward(r);

    for (std::size_t i = 0; i < x.v.size(); i += 3)
        EXPECT_NEAR(gx.v[i], fd(loss, &x.v[i]), 1e-6) << "input slot " << i;
    for (auto& p : params)
        for (std::size_t i = 0; i < p.value->size(); ++i)
            EXPECT_NEAR((*p.grad)[i], fd(loss, &(*p.value)[i]), 1e-6) << p.name << "[" << i << "]";
}

TEST(BatchNorm2d, TrainingModeNormalizesPerChannel) {
    bcs::Rng rng(6);
    bcs::nn::BatchNorm2d bn(3);
    Tensor4 x = random_tensor(rng, 4, 3, 5, 5, -2.0, 5.0);
    const Tensor4 y = bn.forward(x, true);
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        const double cnt = 4 * 5 * 5;
        for (int n = 0; n < 4; ++n)
            for (int yy = 0; yy < 5; ++yy)
                for (int xx = 0; xx < 5; ++xx) mean += y.at(n, c, yy, xx);
        mean /= cnt;
        for (int n = 0; n < 4; ++n)
            for (int yy = 0; yy < 5; ++yy)
                for (int xx = 0; xx < 5; ++xx) {
                    const double d = y.at(n, c, yy, xx) - mean;
                    var += d * d;
                }
        var /= cnt;
        EXPECT_NEAR(mean, 0.0, 1e-10);
        EXPECT_NEAR(var, 1.0, 1e-3);  // eps keeps it slightly below 1
    }
}

TEST(BatchNorm2d, RunningStatsFollowTorchConvention) {
    // momentum 0.1, unbiased running variance
    bcs::nn::BatchNorm2d bn(1);
    Tensor4 x(2, 1, 1, 2);
    x.v = {1.0, 2.0, 3.0, 6.0};  // mean 3, biased var 3.5, unbiased 14/3
    (void)bn.forward(x, true);
    std::vector<bcs::nn::ParamRef> bufs;
    bn.collect_buffers("bn", bufs);
    const auto& mean = *bufs[0].value;
    const auto& var = *bufs[1].value;
    EXPECT_NEAR(mean[0], 0.9 * 0.0 + 0.1 * 3.0, 1e-12);
    EXPECT_NEAR(var[0], 0.9 * 1.0 + 0.1 * (14.0 / 3.0), 1e-12);
}

TEST(BatchNorm2d, EvalModeUsesRunningStats) {
    bcs::Rng rng(7);
    bcs::nn::BatchNorm2d bn(2);
    for (int i = 0; i < 5; ++i) (void)bn.forward(random_tensor(rng, 3, 2, 4, 4, 1.0, 3.0), true);
    std::vector<bcs::nn::ParamRef> bufs;
    bn.collect_buffers("bn", bufs);
    const Tensor4 x = random_tensor(rng, 1, 2, 4, 4, 1.0, 3.0);
    const Tensor4 y = bn.forward(x, false);
    for (int c = 0; c < 2; ++c) {
        const double istd = 1.0 / std::sqrt((*bufs[1].value)[static_cast<std::size_t>(c)] + 1e-5);
        const double mean = (*bufs[0].value)[static_cast<std::size_t>(c)];
        for (int yy = 0; yy < 4; ++yy)
            for (int xx = 0; xx < 4; ++xx)
                EXPECT_NEAR(y.at(0, c, yy, xx), (x.at(0, c, yy, xx) - mean) * istd, 1e-12);
    }
}

TEST(BatchNorm2d, Gradcheck) {
    bcs::Rng rng(8);
    bcs::nn::BatchNorm2d bn(2);
    std::vector<bcs::nn::ParamRef> params;
    bn.collect("bn", params);
    for (double& v : *params[0].value) v = rng.uniform(0.5, 1.5);  // gamma
    for (double& v : *params[1].value) v = rng.uniform(-0.5, 0.5);  // beta
    Tensor4 x = random_tensor(rng, 2, 2, 3, 3);
    const Tensor4 r = random_tensor(rng, 2, 2, 3, 3);

    auto loss = [&]() { return dot(bn.forward(x, true), r); };
    loss();
    for (auto& p : params) std::fill(p.grad->begin(), p.grad->end(), 0.0);
    const Tensor4 gx = bn.backward(r);

    for (std::size_t i = 0; i < x.v.size(); ++i)
        EXPECT_NEAR(gx.v[i], fd(loss, &x.v[i]), 1e-5) << "input slot " << i;
    for (auto& p : params)
        for (std::size_t i = 0; i < p.value->size(); ++i)
            EXPECT_NEAR((*p.grad)[i], fd(loss, &(*p.value)[i]), 1e-5) << p.name << "[" << i << "]";
}

TEST(Activations, ForwardValuesAndGradcheck) {
    bcs::Rng rng(9);
    bcs::nn::LeakyReLU relu(0.0), leaky(0.02);
    bcs::nn::Sigmoid sig;

    Tensor4 x(1, 1, 1, 4);
    x.v = {-2.0, -0.5, 0.5, 2.0};
    const Tensor4 yr = relu.forward(x);
    EXPECT_EQ(yr.v, (std::vector<double>{0.0, 0.0, 0.5, 2.0}));
    const Tensor4 yl = leaky.forward(x);
    EXPECT_EQ(yl.v, (std::vector<double>{-0.04, -0.01, 0.5, 2.0}));
    const Tensor4 ys = sig.forward(x);
    EXPECT_NEAR(ys.v[3], 1.0 / (1.0 + std::exp(-2.0)), 1e-15);

    Tensor4 xs = random_tensor(rng, 1, 2, 3, 3);
    const Tensor4 r = random_tensor(rng, 1, 2, 3, 3);
    auto loss_leaky = [&]() { return dot(leaky.forward(xs), r); };
    loss_leaky();
    const Tensor4 gl = leaky.backward(r);
    for (std::size_t i = 0; i < xs.v.size(); ++i)
        EXPECT_NEAR(gl.v[i], fd(loss_leaky, &xs.v[i]), 1e-7);

    auto loss_sig = [&]() { return dot(sig.forward(xs), r); };
    loss_sig();
    const Tensor4 gs = sig.backward(r);
    for (std::size_t i = 0; i < xs.v.size(); ++i)
        EXPECT_NEAR(gs.v[i], fd(loss_sig, &xs.v[i]), 1e-7);
}

TEST(NearestUpsample2x, ForwardAndAdjoint) {
    bcs::nn::NearestUpsample2x up;
    Tensor4 x(1, 1, 2, 2);
    x.v = {1, 2, 3, 4};
    const Tensor4 y = up.forward(x);
    EXPECT_EQ(y.h, 4);
    EXPECT_EQ(y.w, 4);
    EXPECT_EQ(y.at(0, 0, 0, 0), 1);
    EXPECT_EQ(y.at(0, 0, 0, 1), 1);
    EXPECT_EQ(y.at(0, 0, 1, 1), 1);
    EXPECT_EQ(y.at(0, 0, 3, 3), 4);
    Tensor4 g(1, 1, 4, 4, 1.0);
    const Tensor4 gx = up.backward(g);
    for (double v : gx.v) EXPECT_EQ(v, 4.0);  // each input feeds 4 outputs
}

TEST(Adam, SingleStepMatchesHandComputation) {
    std::vector<double> w = {1.0};
    std::vector<double> g = {0.5};
    bcs::nn::Adam opt({{"w", &w, &g}}, 0.1);
    opt.step();
    // bias-corrected first step moves by ~lr regardless of gradient scale
    EXPECT_NEAR(w[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-12);
}

TEST(Adam, ZeroGradClears) {
    std::vector<double> w = {1.0};
    std::vector<double> g = {0.5};
    bcs::nn::Adam opt({{"w", &w, &g}}, 0.1);
    opt.zero_grad();
    EXPECT_EQ(g[0], 0.0);
    opt.step();
    EXPECT_EQ(w[0], 1.0);  // zero gradient, no movement
}

TEST(PlateauScheduler, HalvesAfterPatienceExactlyOnce) {
    std::vector<double> w = {1.0}, g = {0.0};
    bcs::nn::Adam opt({{"w", &w, &g}}, 0.0002);
    bcs::nn::PlateauScheduler sched(0.5, 2);
    EXPECT_FALSE(sched.step(1.0, opt));  // new best
    EXPECT_FALSE(sched.step(1.0, opt));  // bad 1
    EXPECT_FALSE(sched.step(1.0, opt));  // bad 2
    EXPECT_TRUE(sched.step(1.0, opt));   // bad 3 > patience -> halve
    EXPECT_DOUBLE_EQ(opt.lr(), 0.0001);
    EXPECT_FALSE(sched.step(0.5, opt));  // improvement resets
    EXPECT_DOUBLE_EQ(opt.lr(), 0.0001);
}

TEST(PlateauScheduler, RespectsMinLr) {
    std::vector<double> w = {1.0}, g = {0.0};
    bcs::nn::Adam opt({{"w", &w, &g}}, 2e-7);
    bcs::nn::PlateauScheduler sched(0.5, 0, 1e-7);
    EXPECT_FALSE(sched.step(1.0, opt));
    EXPECT_TRUE(sched.step(1.0, opt));
    EXPECT_DOUBLE_EQ(opt.lr(), 1e-7);
    sched.step(1.0, opt);
    sched.step(1.0, opt);
    EXPECT_DOUBLE_EQ(opt.lr(), 1e-7);  // clamped
}

}  // namespace
