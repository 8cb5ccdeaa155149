#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "stormbench/simulate/grf.hpp"
#include "stormbench/simulate/navier_stokes.hpp"

using namespace stormbench;

namespace {

constexpr double kPi = std::numbers::pi;

SimConfig small_config(double nu, double dt, std::size_t frames, std::size_t n = 32) {
    SimConfig c;
    c.nu = nu;
    c.dt_internal = dt;
    c.frames = frames;
    c.height = c.width = n;
    return c;
}

Field make_field(std::size_t h, std::size_t w, auto fn) {
    Field f({h, w});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            f.mutable_data()[i * w + j] = fn(static_cast<double>(j) / w, static_cast<double>(i) / h);
    return f;
}

double rel_l2(std::span<const double> a, std::span<const double> b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

}  // namespace

TEST(Grf, ZeroMean) {
    GrfParams p;
    for (std::uint64_t s = 0; s < 5; ++s) {
        Field f = sample_grf(p, s);
        EXPECT_LT(std::abs(spatial_mean(f.data())), 1e-14);
    }
}

TEST(Grf, Deterministic) {
    GrfParams p;
    Field a = sample_grf(p, 42), b = sample_grf(p, 42), c = sample_grf(p, 43);
    EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
    EXPECT_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
}

TEST(Grf, RejectsBadParams) {
    GrfParams p;
    p.alpha = 1.0;
    EXPECT_THROW(sample_grf(p, 0), ConfigError);
    p = GrfParams{};
    p.tau = 0.0;
    EXPECT_THROW(sample_grf(p, 0), ConfigError);
}

TEST(Grf, ShellVarianceMatchesSpectrum) {
    GrfParams p;
    p.height = p.width = 32;
    const std::size_t n = 32;
    // Bins with |k| = 1 and |k| = 4 along the axes.
    const std::vector<std::size_t> shell1 = {0 * n + 1, 0 * n + (n - 1), 1 * n + 0, (n - 1) * n + 0};
    const std::vector<std::size_t> shell4 = {0 * n + 4, 0 * n + (n - 4), 4 * n + 0, (n - 4) * n + 0};
    double e1 = 0, e4 = 0;
    for (std::uint64_t s = 0; s < 2000; ++s) {
        Field f = sample_grf(p, mix_seed(7, s));
        std::vector<double> re(f.data().begin(), f.data().end()), im(re.size(), 0.0);
        fft::transform2d<double>(re, im, 1, n, n, false);
        for (auto b : shell1) e1 += re[b] * re[b] + im[b] * im[b];
        for (auto b : shell4) e4 += re[b] * re[b] + im[b] * im[b];
    }
    const double expected = std::pow(grf_sigma(p, 1.0) / grf_sigma(p, 16.0), 2);
    EXPECT_NEAR(e1 / e4 / expected, 1.0, 0.10);
}

TEST(Velocity, ZeroVorticity) {
    NavierStokes2d solver(small_config(1e-3, 1e-2, 2, 16));
    Velocity v = solver.velocity(Spectrum(16, 16));
    for (double x : v.u.data()) EXPECT_EQ(x, 0.0);
    for (double x : v.v.data()) EXPECT_EQ(x, 0.0);
}

TEST(Velocity, SingleCosineMode) {
    const std::size_t n = 32;
    NavierStokes2d solver(small_config(1e-3, 1e-2, 2, n));
    Field w = make_field(n, n, [](double x, double) { return std::cos(2 * kPi * x); });
    Velocity vel = solver.velocity(to_spectrum(w));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double x = static_cast<double>(j) / n;
            EXPECT_NEAR(vel.u.data()[i * n + j], 0.0, 1e-14);
            EXPECT_NEAR(vel.v.data()[i * n + j], std::sin(2 * kPi * x) / (2 * kPi), 1e-14);
        }
}

TEST(Velocity, DivergenceFree) {
    SimConfig c = small_config(1e-3, 1e-2, 2, 64);
    NavierStokes2d solver(c);
    for (std::uint64_t s = 0; s < 3; ++s) {
        Velocity vel = solver.velocity(to_spectrum(sample_grf(c.grf_params(), s)));
        EXPECT_LE(solver.max_spectral_divergence(vel), 1e-10);
    }
}

TEST(Step, SingleModeDecay) {
    const std::size_t n = 32;
    SimConfig c = small_config(1e-3, 1e-2, 2, n);
    c.forcing_amplitude = 0.0;
    NavierStokes2d solver(c);
    Field w = make_field(n, n, [](double x, double) { return std::cos(2 * kPi * x); });
    Spectrum s = to_spectrum(w);
    for (int k = 0; k < 100; ++k) solver.step(s);
    Field out = to_field(s);
    const double amp = std::exp(-c.nu * 4 * kPi * kPi * 1.0);
    for (std::size_t p = 0; p < n * n; ++p) {
        const double expected = amp * w.data()[p];
        EXPECT_NEAR(out.data()[p], expected, 1e-4 * amp);
    }
}

TEST(Step, ZeroStaysZero) {
    SimConfig c = small_config(1e-3, 1e-2, 2, 16);
    c.forcing_amplitude = 0.0;
    NavierStokes2d solver(c);
    Spectrum s(16, 16);
    for (int k = 0; k < 50; ++k) solver.step(s);
    for (double x : s.re) EXPECT_EQ(x, 0.0);
    for (double x : s.im) EXPECT_EQ(x, 0.0);
}

TEST(Step, MeanPreservedUnderForcing) {
    SimConfig c = small_config(1e-3, 1e-2, 2, 64);
    NavierStokes2d solver(c);
    Spectrum s = to_spectrum(sample_grf(c.grf_params(), 3));
    for (int k = 0; k < 1000; ++k) solver.step(s);
    EXPECT_LE(std::abs(spatial_mean(to_field(s).data())), 1e-12);
}

TEST(Step, NonFiniteStateReportsStep) {
    SimConfig c = small_config(1e-3, 1e-2, 2, 16);
    NavierStokes2d solver(c);
    Spectrum s(16, 16);
    solver.step(s);
    s.re[1] = std::numeric_limits<double>::quiet_NaN();
    try {
        solver.step(s);
        FAIL() << "expected blow-up";
    } catch (const BlowUpError& e) {
        EXPECT_EQ(e.step(), 2u);
    }
}

TEST(Simulate, Re1e3Sequence) {
    SimConfig c = small_config(1e-3, 1e-2, 50, 64);
    SimDiagnostics d;
    FieldSequence seq = simulate(c, sample_seed(0, 0), &d);
    EXPECT_EQ(seq.length(), 50u);
    EXPECT_EQ(seq.height(), 64u);
    for (double x : seq.frames.data()) ASSERT_TRUE(std::isfinite(x));
    for (double e : d.enstrophy) EXPECT_TRUE(std::isfinite(e));
    EXPECT_LE(d.max_divergence, 1e-10);
    EXPECT_LE(d.max_abs_mean, 1e-10);
}

TEST(Simulate, Re1e4SequenceLength) {
    SimConfig c = small_config(1e-4, 1e-4, 30, 16);
    FieldSequence seq = simulate(c, 5);
    EXPECT_EQ(seq.length(), 30u);
    for (double x : seq.frames.data()) ASSERT_TRUE(std::isfinite(x));
}

TEST(Simulate, PureDecayEnstrophyNonIncreasing) {
    SimConfig c = small_config(1.0, 1e-2, 6, 32);
    c.forcing_amplitude = 0.0;
    SimDiagnostics d;
    simulate(c, 9, &d);
    ASSERT_EQ(d.enstrophy.size(), 6u);
    for (std::size_t t = 1; t < d.enstrophy.size(); ++t) EXPECT_LE(d.enstrophy[t], d.enstrophy[t - 1] * (1 + 1e-6));
}

TEST(Simulate, InviscidLikeDecayWithoutForcing) {
    SimConfig c = small_config(1e-2, 1e-2, 5, 32);
    c.forcing_amplitude = 0.0;
    SimDiagnostics d;
    simulate(c, 11, &d);
    for (std::size_t t = 1; t < d.enstrophy.size(); ++t) EXPECT_LE(d.enstrophy[t], d.enstrophy[t - 1] * (1 + 1e-6));
}

TEST(Simulate, HalvingStepConverges) {
    SimConfig a = small_config(1e-3, 1e-2, 10, 64);
    SimConfig b = a;
    b.dt_internal = 5e-3;
    FieldSequence sa = simulate(a, 21), sb = simulate(b, 21);
    EXPECT_LE(rel_l2(sa.frame(9), sb.frame(9)), 1e-3);
}

TEST(Simulate, Deterministic) {
    SimConfig c = small_config(1e-3, 1e-2, 4, 32);
    FieldSequence a = simulate(c, 77), b = simulate(c, 77);
    EXPECT_TRUE(std::equal(a.frames.data().begin(), a.frames.data().end(), b.frames.data().begin()));
}

TEST(Simulate, FrameZeroIsInitialCondition) {
    SimConfig c = small_config(1e-3, 1e-2, 3, 32);
    FieldSequence seq = simulate(c, 4);
    Field ic = sample_grf(c.grf_params(), 4);
    EXPECT_TRUE(std::equal(ic.data().begin(), ic.data().end(), seq.frame(0).begin()));
}

TEST(SimConfig, Validation) {
    SimConfig c;
    c.nu = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = SimConfig{};
    c.dt_internal = 0.3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = SimConfig{};
    c.frames = 1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = SimConfig{};
    EXPECT_EQ(c.steps_per_frame(), 100u);
    c.dt_internal = 1e-4;
    EXPECT_EQ(c.steps_per_frame(), 10000u);
}

TEST(Generate, ParallelMatchesSerial) {
    SimConfig c = small_config(1e-3, 1e-2, 3, 16);
    c.seed = 99;
    std::vector<std::vector<double>> par(4), ser(4);
    generate_samples(c, 0, 4, 3, [&](std::size_t i, const FieldSequence& s) {
        par[i].assign(s.frames.data().begin(), s.frames.data().end());
    });
    generate_samples(c, 0, 4, 1, [&](std::size_t i, const FieldSequence& s) {
        ser[i].assign(s.frames.data().begin(), s.frames.data().end());
    });
    EXPECT_EQ(par, ser);
    EXPECT_NE(par[0], par[1]);
}
