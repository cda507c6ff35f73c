#include <gtest/gtest.h>

#include <cmath>

#include <bcs/sensing.hpp>
#include <bcs/tv.hpp>

#include "support/oracles.hpp"
#include "support/synth.hpp"

namespace {

TEST(TVConfigValidate, RejectsBadValues) {
    bcs::TVConfig cfg;
    cfg.lambda = 0.0;
    EXPECT_THROW(bcs::validate(cfg), bcs::ValidationError);
    cfg = {};
    cfg.tol = 0.0;
    EXPECT_THROW(bcs::validate(cfg), bcs::ValidationError);
    cfg = {};
    cfg.max_iters = 0;
    EXPECT_THROW(bcs::validate(cfg), bcs::ValidationError);
    EXPECT_NO_THROW(bcs::validate(bcs::TVConfig{}));
}

TEST(AnisotropicTV, KnownValues) {
    // constant image: zero TV
    EXPECT_DOUBLE_EQ(bcs::tv_detail::anisotropic_tv(std::vector<double>(9, 0.4), 3, 3, 0.0), 0.0);
    // 2x2 checkerboard 0/1: horizontal diffs 2 x 1, vertical diffs 2 x 1 -> 4
    const std::vector<double> cb = {0, 1, 1, 0};
    EXPECT_DOUBLE_EQ(bcs::tv_detail::anisotropic_tv(cb, 2, 2, 0.0), 4.0);
    // single step edge in a 1x3 row: |1-0| + |1-1| = 1
    const std::vector<double> row = {0, 1, 1};
    EXPECT_DOUBLE_EQ(bcs::tv_detail::anisotropic_tv(row, 3, 1, 0.0), 1.0);
    // smoothed TV of a constant image: each of the 12 edges contributes eps
    const double eps = 0.01;
    EXPECT_NEAR(bcs::tv_detail::anisotropic_tv(std::vector<double>(9, 0.4), 3, 3, eps), 12 * eps,
                1e-15);
}

TEST(BlockOperator, AdjointConsistency) {
    // <Phi x, y> == <x, Phi^T y> for random vectors.
    const bcs::BlockMatrix m = bcs::generate_block_matrix({4, 0.5, 3});
    bcs::tv_detail::BlockOperator op(m, 12, 8);
    bcs::Rng rng(5);
    std::vector<double> x(12 * 8), y(op.measurement_count());
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    for (double& v : y) v = rng.uniform(-1.0, 1.0);
    std::vector<double> ax, aty;
    op.forward(x, ax);
    op.adjoint(y, aty);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) lhs += ax[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i];
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));
}

TEST(BlockOperator, ForwardMatchesSampleImage) {
    const bcs::BlockMatrix m = bcs::generate_block_matrix({4, 0.25, 3});
    bcs::Rng rng(6);
    const bcs::ImagePlane img = oracle::random_image(rng, 16, 12);
    const bcs::MeasurementTensor t = bcs::sample_image(m, img);
    bcs::tv_detail::BlockOperator op(m, 16, 12);
    std::vector<double> y;
    op.forward(img.pixels, y);
    ASSERT_EQ(y.size(), t.values.size());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], t.values[i], 1e-12);
}

TEST(SpectralBound, DominatesRayleighQuotients) {
    const bcs::BlockMatrix m = bcs::generate_block_matrix({4, 0.5, 17});
    const double bound = bcs::tv_detail::spectral_bound(m);
    bcs::Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(16);
        double nx = 0.0;
        for (double& v : x) {
            v = rng.uniform(-1.0, 1.0);
            nx += v * v;
        }
        std::vector<double> ax(static_cast<std::size_t>(m.rows), 0.0);
        for (int r = 0; r < m.rows; ++r)
            for (int c = 0; c < 16; ++c) ax[static_cast<std::size_t>(r)] += m.bit(r, c) * x[static_cast<std::size_t>(c)];
        double na = 0.0;
        for (double v : ax) na += v * v;
        EXPECT_LE(na / nx, bound * 1.0001);
    }
}

TEST(ObjectiveValue, MatchesBruteForce) {
    const bcs::BlockMatrix m = bcs::generate_block_matrix({4, 0.25, 9});
    bcs::Rng rng(10);
    const bcs::ImagePlane target = oracle::random_image(rng, 16, 16);
    const bcs::MeasurementTensor tensor = bcs::sample_image(m, target);
    const bcs::ImagePlane x = oracle::random_image(rng, 16, 16);
    bcs::TVConfig cfg;
    cfg.lambda = 0.37;

    // brute force: dense residual + direct TV sum
    const bcs::DenseMatrix phi = bcs::assemble_block_diagonal(m, 16);
    const auto yx = oracle::dense_multiply(phi, bcs::flatten_by_blocks(x, 4));
    const auto yt = oracle::dense_multiply(phi, bcs::flatten_by_blocks(target, 4));
    double data = 0.0;
    for (std::size_t i = 0; i < yx.size(); ++i) data += (yx[i] - yt[i]) * (yx[i] - yt[i]);
    double tv = 0.0;
    for (int yy = 0; yy < 16; ++yy)
        for (int xx = 0; xx < 16; ++xx) {
            if (xx + 1 < 16) tv += std::abs(x.at(yy, xx + 1) - x.at(yy, xx));
            if (yy + 1 < 16) tv += std::abs(x.at(yy + 1, xx) - x.at(yy, xx));
        }
    EXPECT_NEAR(bcs::objective_value(m, tensor, x, cfg), data + cfg.lambda * tv,
                1e-9 * (1.0 + data));
}

TEST(ObjectiveValue, RejectsInconsistentShapes) {
    const bcs::BlockMatrix m = bcs::generate_block_matrix({4, 0.25, 9});
    bcs::Rng rng(10);
    const bcs::ImagePlane img = oracle::random_image(rng, 16, 16);
    const bcs::MeasurementTensor tensor = bcs::sample_image(m, img);
    const bcs::ImagePlane wrong = oracle::random_image(rng, 20, 16);
    EXPECT_THROW(bcs::objective_value(m, tensor, wrong, bcs::TVConfig{}), bcs::DimensionError);
}

TEST(TVProx, LambdaZeroIsBoxProjection) {
    std::vector<double> z = {-0.5, 0.2, 1.7, 0.99};
    std::vector<double> out;
    bcs::tv_detail::tv_prox(z, 2, 2, 0.0, 20, out);
    const std::vector<double> expected = {0.0, 0.2, 1.0, 0.99};
    EXPECT_EQ(out, expected);
}

TEST(TVProx, SmoothsANoisySpike) {
    // prox of TV at a one-pixel spike must pull the spike toward its flat
    // surroundings and stay inside [0,1].
    std::vector<double> z(25, 0.4);
    z[12] = 1.0;
    std::vector<double> out;
    bcs::tv_detail::tv_prox(z, 5, 5, 0.05, 40, out);
    EXPECT_LT(out[12], 0.99);
    EXPECT_GT(out[12], 0.4);
    for (double v : out) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(TVReconstruct, TraceIsMonotoneNonIncreasing) {
    bcs::Rng rng(14);
    for (int trial = 0; trial < 5; ++trial) {
        const bcs::BlockMatrix m =
            bcs::generate_block_matrix({4, trial % 2 == 0 ? 0.25 : 0.5, 100 + static_cast<std::uint64_t>(trial)});
        const bcs::ImagePlane img = oracle::random_image(rng, 16, 16);
        const bcs::MeasurementTensor t = bcs::sample_image(m, img);
        bcs::TVConfig cfg;
        cfg.max_iters = 120;
        const bcs::TVResult res = bcs::tv_reconstruct_traced(m, t, 16, 16, cfg);
        ASSERT_GE(res.objective_trace.size(), 2u);
        for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
            EXPECT_LE(res.objective_trace[i], res.objective_trace[i - 1]);
    }
}

TEST(TVReconstruct, DeterministicRepeat) {
    const bcs::BlockMatrix m = bcs::generate_block_matrix({4, 0.25, 4});
    const bcs::ImagePlane img = synth::letter_target(16, 16);
    const bcs::MeasurementTensor t = bcs::sample_image(m, img);
    bcs::TVConfig cfg;
    cfg.max_iters = 100;
    const bcs::ImagePlane a = bcs::tv_reconstruct(m, t, 16, 16, cfg);
    const bcs::ImagePlane b = bcs::tv_reconstruct(m, t, 16, 16, cfg);
    EXPECT_EQ(a.pixels, b.pixels);
}

TEST(TVReconstruct, FullSamplingRecoversExactSolve) {
    // S = 1 with an invertible A and tiny lambda: the minimizer is essentially
    // the per-block exact solution. The seed picks a well-conditioned draw
    // (cond(A) ~ 14): the forward-backward rate scales with cond(A)^2, so a
    // generic draw (cond ~ 100+) would need far more iterations than the cap.
    const bcs::BlockMatrix m = bcs::generate_block_matrix({4, 1.0, 87111});
    ASSERT_TRUE(oracle::block_matrix_invertible(m));

    bcs::Rng rng(8);
    bcs::ImagePlane img(16, 16);
    for (double& v : img.pixels) v = rng.uniform(0.15, 0.85);
    const bcs::MeasurementTensor t = bcs::sample_image(m, img);

    bcs::TVConfig cfg;
    cfg.lambda = 1e-6;
    cfg.max_iters = 4000;
    cfg.tol = 1e-12;
    const bcs::ImagePlane rec = bcs::tv_reconstruct(m, t, 16, 16, cfg);
    const bcs::ImagePlane exact = oracle::solve_blocks_exact(m, t);
    for (std::size_t i = 0; i < rec.pixels.size(); ++i)
        EXPECT_NEAR(rec.pixels[i], exact.pixels[i], 1e-3);
}

TEST(TVReconstruct, SmoothedVariantDescendsToo) {
    const bcs::BlockMatrix m = bcs::generate_block_matrix({4, 0.25, 4});
    const bcs::ImagePlane img = synth::letter_target(16, 16);
    const bcs::MeasurementTensor t = bcs::sample_image(m, img);
    bcs::TVConfig cfg;
    cfg.smoothing_eps = 0.01;
    cfg.max_iters = 150;
    const bcs::TVResult res = bcs::tv_reconstruct_traced(m, t, 16, 16, cfg);
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
        EXPECT_LE(res.objective_trace[i], res.objective_trace[i - 1]);
    EXPECT_TRUE(res.image.in_unit_range());
}

TEST(TVReconstruct, ImprovesOverZeroInit) {
    // reconstruction quality on a letter target must clearly beat the trivial
    // all-zero image at S = 0.25
    const bcs::BlockMatrix m = bcs::generate_block_matrix({4, 0.25, 4});
    const bcs::ImagePlane img = synth::letter_target(32, 32);
    const bcs::MeasurementTensor t = bcs::sample_image(m, img);
    const bcs::ImagePlane rec = bcs::tv_reconstruct(m, t, 32, 32, bcs::TVConfig{});
    const bcs::ImagePlane zero(32, 32, 0.0);
    EXPECT_GT(oracle::psnr_bruteforce(img, rec), oracle::psnr_bruteforce(img, zero) + 6.0);
}

TEST(TVReconstruct, RejectsBadShapes) {
    const bcs::BlockMatrix m = bcs::generate_block_matrix({4, 0.25, 4});
    const bcs::ImagePlane img = synth::letter_target(16, 16);
    bcs::MeasurementTensor t = bcs::sample_image(m, img);
    EXPECT_THROW(bcs::tv_reconstruct(m, t, 15, 16, bcs::TVConfig{}), bcs::DimensionError);
    EXPECT_THROW(bcs::tv_reconstruct(m, t, 20, 16, bcs::TVConfig{}), bcs::DimensionError);
    t.channels = 2;
    EXPECT_THROW(bcs::tv_reconstruct(m, t, 16, 16, bcs::TVConfig{}), bcs::DimensionError);
}

}  // namespace
