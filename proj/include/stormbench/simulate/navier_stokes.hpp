#pragma once

#include <algorithm>
#include <mutex>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stormbench/simulate/grf.hpp"
#include "stormbench/tensor/fft.hpp"
#include "stormbench/util/errors.hpp"
#include "stormbench/util/rng.hpp"
#include "stormbench/util/workers.hpp"

namespace stormbench {

/// Recipe for one Navier-Stokes dataset. Time is measured in simulation units;
/// consecutive recorded frames are 1.0 apart.
struct SimConfig {
    double nu = 1e-3;              // viscosity, 1/Re
    double dt_internal = 1e-2;     // solver step
    std::size_t frames = 50;       // recorded sequence length T
    double forcing_amplitude = 0.1;
    std::size_t height = 64;
    std::size_t width = 64;
    std::uint64_t seed = 0;
    std::size_t n_samples = 1;
    GrfParams grf{};

    GrfParams grf_params() const {
        GrfParams p = grf;
        p.height = height;
        p.width = width;
        return p;
    }

    std::size_t steps_per_frame() const { return static_cast<std::size_t>(std::llround(1.0 / dt_internal)); }

    void validate() const {
        if (!(nu > 0.0)) throw ConfigError("nu must be > 0");
        if (!(dt_internal > 0.0) || dt_internal > 1.0) throw ConfigError("dt must be in (0, 1]");
        const double steps = 1.0 / dt_internal;
        if (std::abs(steps - std::round(steps)) > 1e-9 * steps)
            throw ConfigError("dt must divide the recording interval 1.0 exactly");
        if (frames < 2) throw ConfigError("T must be >= 2");
        if (!std::isfinite(forcing_amplitude)) throw ConfigError("forcing amplitude must be finite");
        grf_params().validate();
    }
};

/// Full complex spectrum of a real H x W field, split storage.
struct Spectrum {
    std::size_t height = 0, width = 0;
    std::vector<double> re, im;

    Spectrum() = default;
    Spectrum(std::size_t h, std::size_t w) : height(h), width(w), re(h * w, 0.0), im(h * w, 0.0) {}
};

inline Spectrum to_spectrum(const Field& f) {
    Spectrum s(f.extent(0), f.extent(1));
    std::copy(f.data().begin(), f.data().end(), s.re.begin());
    fft::transform2d<double>(s.re, s.im, 1, s.height, s.width, false);
    return s;
}

inline Field to_field(const Spectrum& s) {
    std::vector<double> re = s.re, im = s.im;
    fft::transform2d<double>(re, im, 1, s.height, s.width, true, 1.0 / static_cast<double>(s.height * s.width));
    return Field({s.height, s.width}, std::move(re));
}

/// Velocity (u, v) in physical space together with its spectra.
struct Velocity {
    Field u, v;
    Spectrum u_hat, v_hat;
};

/// Pseudo-spectral vorticity-form solver on the doubly periodic unit square.
///
/// State is the full spectrum of the vorticity. Each step treats advection
/// explicitly (pseudo-spectral product, 2/3-rule dealiased) and diffusion with
/// Crank-Nicolson:
///   w' = [w (1 - dt nu |2 pi k|^2 / 2) + dt (f - N)] / (1 + dt nu |2 pi k|^2 / 2)
class NavierStokes2d {
public:
    explicit NavierStokes2d(const SimConfig& cfg) : cfg_(cfg), h_(cfg.height), w_(cfg.width) {
        cfg_.validate();
        const std::size_t n = h_ * w_;
        const double two_pi = 2.0 * std::numbers::pi;
        kx_.resize(n);
        ky_.resize(n);
        lap_.resize(n);
        dealias_.resize(n);
        const double kmax_x = static_cast<double>(w_ / 2), kmax_y = static_cast<double>(h_ / 2);
        for (std::size_t i = 0; i < h_; ++i)
            for (std::size_t j = 0; j < w_; ++j) {
                const long ky = fft::wavenumber(i, h_), kx = fft::wavenumber(j, w_);
                const std::size_t p = i * w_ + j;
                // Nyquist bins carry no derivative so derived fields stay real.
                kx_[p] = (j == w_ / 2) ? 0.0 : two_pi * static_cast<double>(kx);
                ky_[p] = (i == h_ / 2) ? 0.0 : two_pi * static_cast<double>(ky);
                lap_[p] = two_pi * two_pi * static_cast<double>(kx * kx + ky * ky);
                dealias_[p] = std::abs(static_cast<double>(kx)) <= 2.0 / 3.0 * kmax_x &&
                              std::abs(static_cast<double>(ky)) <= 2.0 / 3.0 * kmax_y;
            }
        forcing_ = Spectrum(h_, w_);
        if (cfg_.forcing_amplitude != 0.0) {
            Field f({h_, w_});
            for (std::size_t i = 0; i < h_; ++i)
                for (std::size_t j = 0; j < w_; ++j) {
                    const double x = static_cast<double>(j) / static_cast<double>(w_);
                    const double y = static_cast<double>(i) / static_cast<double>(h_);
                    const double phase = two_pi * (x + y);
                    f.mutable_data()[i * w_ + j] = cfg_.forcing_amplitude * (std::sin(phase) + std::cos(phase));
                }
            forcing_ = to_spectrum(f);
            forcing_.re[0] = forcing_.im[0] = 0.0;
        }
        za_re_.resize(n);
        za_im_.resize(n);
        zb_re_.resize(n);
        zb_im_.resize(n);
    }

    const SimConfig& config() const { return cfg_; }
    std::size_t steps_taken() const { return steps_; }

    /// Velocity from vorticity via psi_hat = w_hat / |2 pi k|^2 (psi_0 = 0),
    /// u = d(psi)/dy, v = -d(psi)/dx.
    Velocity velocity(const Spectrum& w_hat) const {
        const std::size_t n = h_ * w_;
        Velocity vel{Field({h_, w_}), Field({h_, w_}), Spectrum(h_, w_), Spectrum(h_, w_)};
        for (std::size_t p = 0; p < n; ++p) {
            if (lap_[p] == 0.0) continue;
            const double pr = w_hat.re[p] / lap_[p], pi = w_hat.im[p] / lap_[p];
            // u_hat = i ky psi_hat ; v_hat = -i kx psi_hat
            vel.u_hat.re[p] = -ky_[p] * pi;
            vel.u_hat.im[p] = ky_[p] * pr;
            vel.v_hat.re[p] = kx_[p] * pi;
            vel.v_hat.im[p] = -kx_[p] * pr;
        }
        vel.u = to_field(vel.u_hat);
        vel.v = to_field(vel.v_hat);
        return vel;
    }

    /// max |i 2 pi k . (u_hat, v_hat)| over all bins.
    double max_spectral_divergence(const Velocity& vel) const {
        double m = 0.0;
        for (std::size_t p = 0; p < h_ * w_; ++p) {
            const double dr = -(kx_[p] * vel.u_hat.im[p] + ky_[p] * vel.v_hat.im[p]);
            const double di = kx_[p] * vel.u_hat.re[p] + ky_[p] * vel.v_hat.re[p];
            m = std::max(m, std::hypot(dr, di));
        }
        return m;
    }

    /// Advances the spectral state by one solver step.
    void step(Spectrum& w_hat) {
        const std::size_t n = h_ * w_;
        const double dt = cfg_.dt_internal, nu = cfg_.nu;
        // Pack u + i v and w_x + i w_y; both pairs are Hermitian so one
        // inverse transform recovers two real fields.
        for (std::size_t p = 0; p < n; ++p) {
            const double wr = w_hat.re[p], wi = w_hat.im[p];
            double ur = 0, ui = 0, vr = 0, vi = 0;
            if (lap_[p] != 0.0) {
                const double pr = wr / lap_[p], pi = wi / lap_[p];
                ur = -ky_[p] * pi;
                ui = ky_[p] * pr;
                vr = kx_[p] * pi;
                vi = -kx_[p] * pr;
            }
            za_re_[p] = ur - vi;
            za_im_[p] = ui + vr;
            const double dxr = -kx_[p] * wi, dxi = kx_[p] * wr;
            const double dyr = -ky_[p] * wi, dyi = ky_[p] * wr;
            zb_re_[p] = dxr - dyi;
            zb_im_[p] = dxi + dyr;
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        fft::transform2d<double>(za_re_, za_im_, 1, h_, w_, true, inv_n);
        fft::transform2d<double>(zb_re_, zb_im_, 1, h_, w_, true, inv_n);
        for (std::size_t p = 0; p < n; ++p) {
            za_re_[p] = za_re_[p] * zb_re_[p] + za_im_[p] * zb_im_[p];  // u w_x + v w_y
            za_im_[p] = 0.0;
        }
        fft::transform2d<double>(za_re_, za_im_, 1, h_, w_, false);
        ++steps_;
        for (std::size_t p = 0; p < n; ++p) {
            const bool keep = dealias_[p] && p != 0;
            const double nr = keep ? za_re_[p] : 0.0;
            const double ni = keep ? za_im_[p] : 0.0;
            const double half = 0.5 * dt * nu * lap_[p];
            const double denom = 1.0 + half;
            const double re = (w_hat.re[p] * (1.0 - half) + dt * (forcing_.re[p] - nr)) / denom;
            const double im = (w_hat.im[p] * (1.0 - half) + dt * (forcing_.im[p] - ni)) / denom;
            if (!std::isfinite(re) || !std::isfinite(im)) throw BlowUpError("vorticity became non-finite", steps_);
            w_hat.re[p] = re;
            w_hat.im[p] = im;
        }
    }

private:
    SimConfig cfg_;
    std::size_t h_, w_;
    std::size_t steps_ = 0;
    std::vector<double> kx_, ky_, lap_;
    std::vector<char> dealias_;
    Spectrum forcing_;
    std::vector<double> za_re_, za_im_, zb_re_, zb_im_;
};

/// Mean of w^2 over the grid.
inline double enstrophy(std::span<const double> w) {
    long double acc = 0;
    for (double v : w) acc += static_cast<long double>(v) * v;
    return static_cast<double>(acc / static_cast<long double>(w.size()));
}

inline double spatial_mean(std::span<const double> w) {
    long double acc = 0;
    for (double v : w) acc += v;
    return static_cast<double>(acc / static_cast<long double>(w.size()));
}

/// Time-stacked vorticity snapshots, [T, H, W], one time unit apart.
struct FieldSequence {
    Tensor<double> frames;
    double time_delta = 1.0;

    std::size_t length() const { return frames.extent(0); }
    std::size_t height() const { return frames.extent(1); }
    std::size_t width() const { return frames.extent(2); }
    std::span<const double> frame(std::size_t t) const {
        const std::size_t plane = height() * width();
        return frames.data().subspan(t * plane, plane);
    }
};

/// Sanity figures gathered while a sequence is generated.
struct SimDiagnostics {
    double max_divergence = 0.0;
    double max_abs_mean = 0.0;
    std::vector<double> enstrophy;  // per recorded frame
};

/// Samples the initial condition from the GRF with `seed`, records it as frame
/// 0, then records every 1/dt solver steps until T frames exist.
inline FieldSequence simulate(const SimConfig& cfg, std::uint64_t seed, SimDiagnostics* diag = nullptr) {
    cfg.validate();
    NavierStokes2d solver(cfg);
    const std::size_t H = cfg.height, W = cfg.width, plane = H * W;
    Field ic = sample_grf(cfg.grf_params(), seed);
    Spectrum w_hat = to_spectrum(ic);
    FieldSequence seq{Tensor<double>({cfg.frames, H, W}), 1.0};
    auto out = seq.frames.mutable_data();
    auto record = [&](std::size_t t, const Field& f) {
        std::copy(f.data().begin(), f.data().end(), out.begin() + static_cast<std::ptrdiff_t>(t * plane));
        if (diag) {
            diag->enstrophy.push_back(enstrophy(f.data()));
            diag->max_abs_mean = std::max(diag->max_abs_mean, std::abs(spatial_mean(f.data())));
            diag->max_divergence = std::max(diag->max_divergence, solver.max_spectral_divergence(solver.velocity(w_hat)));
        }
    };
    record(0, ic);
    const std::size_t per_frame = cfg.steps_per_frame();
    for (std::size_t t = 1; t < cfg.frames; ++t) {
        for (std::size_t s = 0; s < per_frame; ++s) solver.step(w_hat);
        record(t, to_field(w_hat));
    }
    return seq;
}

/// Seed of sample `index` in a dataset seeded with `dataset_seed`.
inline std::uint64_t sample_seed(std::uint64_t dataset_seed, std::size_t index) {
    return mix_seed(dataset_seed, index);
}

/// Simulates samples [begin, end) of `cfg` on `workers` threads. `sink(i, seq)`
/// is called once per sample, serialized, in completion order.
template <class Sink>
void generate_samples(const SimConfig& cfg, std::size_t begin, std::size_t end, std::size_t workers, Sink&& sink) {
    cfg.validate();
    if (end < begin) throw ConfigError("sample range is reversed");
    std::mutex mu;
    parallel_for(end - begin, workers, [&](std::size_t k) {
        const std::size_t i = begin + k;
        FieldSequence seq = simulate(cfg, sample_seed(cfg.seed, i));
        std::lock_guard lock(mu);
        sink(i, seq);
    });
}

}  // namespace stormbench
