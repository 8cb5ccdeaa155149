// Acceptance suite: one PASS/FAIL line per criterion on stdout, progress on stderr.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stormbench/evaluate/forecast.hpp"
#include "stormbench/evaluate/report.hpp"
#include "stormbench/evaluate/stability.hpp"
#include "stormbench/models/build.hpp"
#include "stormbench/models/fno.hpp"
#include "stormbench/simulate/navier_stokes.hpp"
#include "stormbench/storage/dataset.hpp"
#include "stormbench/train/trainer.hpp"
#include "stormbench/util/workers.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace stormbench;
using stormbench::testing::gradcheck;
using stormbench::testing::random_tensor;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s << std::setprecision(prec) << v;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// y = factor * last frame.
class ScaledLast : public Model<double> {
public:
    explicit ScaledLast(double factor) : Model<double>(config()), factor_(factor) {}
    Tensor<double> forward_step(const Tensor<double>& x) const override {
        return scalar_mul(slice_channels(x, history() - 1, history()), factor_);
    }

private:
    static ModelConfig config() {
        ModelConfig c;
        c.family = Family::persistence;
        c.history = 1;
        return c;
    }
    double factor_;
};

class Suite {
public:
    explicit Suite(fs::path work) : work_(std::move(work)) { fs::create_directories(work_); }

    // ------------------------------------------------------------ 1
    Outcome autodiff() {
        const auto t0 = std::chrono::steady_clock::now();
        constexpr double tol = 1e-4;
        double worst = 0.0;
        std::string worst_name;
        std::size_t checks = 0;
        for (int seed = 0; seed < 20; ++seed) {
            std::mt19937_64 rng(5000 + seed);
            std::uniform_int_distribution<int> ext(1, 3);
            const std::size_t B = ext(rng), C = ext(rng), O = ext(rng), H = 4, W = 4;
            auto away_from_zero = [&](Shape s) {
                auto t = random_tensor(s, rng, 0.1, 1.0);
                std::bernoulli_distribution flip(0.5);
                for (auto& v : t.mutable_data()) v = flip(rng) ? -v : v;
                return t;
            };
            using Fn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;
            std::vector<std::tuple<std::string, Fn, std::vector<Tensor<double>>>> cases;
            cases.emplace_back("add", [](auto& in) { return add(in[0], in[1]); },
                               std::vector{random_tensor({B, C}, rng), random_tensor({1, C}, rng)});
            cases.emplace_back("sub", [](auto& in) { return sub(in[0], in[1]); },
                               std::vector{random_tensor({B, C}, rng), random_tensor({B, C}, rng)});
            cases.emplace_back("mul", [](auto& in) { return mul(in[0], in[1]); },
                               std::vector{random_tensor({B, C, 2}, rng), random_tensor({B, C, 2}, rng)});
            cases.emplace_back("scalar_mul", [](auto& in) { return scalar_mul(in[0], -1.7); },
                               std::vector{random_tensor({B, 3}, rng)});
            cases.emplace_back("tanh", [](auto& in) { return tanh(in[0]); }, std::vector{random_tensor({B, 5}, rng, -2, 2)});
            cases.emplace_back("sigmoid", [](auto& in) { return sigmoid(in[0]); },
                               std::vector{random_tensor({B, 5}, rng, -3, 3)});
            cases.emplace_back("relu", [](auto& in) { return relu(in[0]); }, std::vector{away_from_zero({B, 6})});
            cases.emplace_back("gelu", [](auto& in) { return gelu(in[0]); }, std::vector{random_tensor({B, 6}, rng, -3, 3)});
            cases.emplace_back("avgpool2", [](auto& in) { return avgpool2(in[0]); },
                               std::vector{random_tensor({B, C, H, W}, rng)});
            cases.emplace_back("conv_transpose2_stride2",
                               [](auto& in) { return conv_transpose2_stride2(in[0], in[1], in[2]); },
                               std::vector{random_tensor({B, C, 2, 3}, rng), random_tensor({C, O, 2, 2}, rng),
                                           random_tensor({O}, rng)});
            cases.emplace_back("linear", [](auto& in) { return linear(in[0], in[1], in[2]); },
                               std::vector{random_tensor({B, 2, C}, rng), random_tensor({O, C}, rng), random_tensor({O}, rng)});
            cases.emplace_back("concat", [](auto& in) { return concat<double>({in[0], in[1]}); },
                               std::vector{random_tensor({B, C, 2, 2}, rng), random_tensor({B, O, 2, 2}, rng)});
            cases.emplace_back("slice_channels", [](auto& in) { return slice_channels(in[0], 1, 3); },
                               std::vector{random_tensor({B, 4, 2, 2}, rng)});
            cases.emplace_back("mse", [](auto& in) { return mse(in[0], in[1]); },
                               std::vector{random_tensor({B, C, 3}, rng), random_tensor({B, C, 3}, rng)});
            cases.emplace_back("sum", [](auto& in) { return sum(in[0]); }, std::vector{random_tensor({B, C}, rng)});
            for (PadMode mode : {PadMode::zero, PadMode::circular_both, PadMode::circular_x_zero_y})
                cases.emplace_back(std::string("conv2d/") + to_string(mode),
                                   [mode](auto& in) { return conv2d(in[0], in[1], in[2], mode); },
                                   std::vector{random_tensor({B, C, H, W}, rng), random_tensor({O, C, 3, 3}, rng),
                                               random_tensor({O}, rng)});
            cases.emplace_back("fft2.re", [](auto& in) { return fft2(in[0]).re; }, std::vector{random_tensor({B, H, W}, rng)});
            cases.emplace_back("fft2.im", [](auto& in) { return fft2(in[0]).im; }, std::vector{random_tensor({B, H, W}, rng)});
            cases.emplace_back("ifft2",
                               [](auto& in) {
                                   auto y = ifft2(ComplexTensor<double>(in[0], in[1]));
                                   return add(y.re, scalar_mul(y.im, 0.5));
                               },
                               std::vector{random_tensor({B, H, W}, rng), random_tensor({B, H, W}, rng)});
            cases.emplace_back("spectral_mul",
                               [](auto& in) {
                                   auto y = spectral_mul(ComplexTensor<double>(in[0], in[1]),
                                                         ComplexTensor<double>(in[2], in[3]));
                                   return add(y.re, scalar_mul(y.im, -0.3));
                               },
                               std::vector{random_tensor({B, C, 8, 4}, rng), random_tensor({B, C, 8, 4}, rng),
                                           random_tensor({C, O, 4, 3}, rng), random_tensor({C, O, 4, 3}, rng)});
            cases.emplace_back("mode_product",
                               [](auto& in) {
                                   auto y = mode_product(ComplexTensor<double>(in[0], in[1]),
                                                         ComplexTensor<double>(in[2], in[3]), 1);
                                   return add(y.re, scalar_mul(y.im, 0.7));
                               },
                               std::vector{random_tensor({2, 3, 2}, rng), random_tensor({2, 3, 2}, rng),
                                           random_tensor({4, 3}, rng), random_tensor({4, 3}, rng)});
            for (auto& [name, fn, inputs] : cases) {
                const double e = gradcheck(fn, inputs, rng).max_rel_error;
                ++checks;
                if (!(e <= worst)) {
                    worst = e;
                    worst_name = name;
                }
            }
        }
        const double secs = seconds_since(t0);
        return {worst <= tol && secs < 60.0, std::to_string(checks) + " checks over 20 seeds, worst rel err " +
                                                 fmt(worst) + " (" + worst_name + "), " + fmt(secs, 3) + " s"};
    }

    // ------------------------------------------------------------ 2
    Outcome solver() {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::string> bad;

        SimConfig c;
        c.height = c.width = 64;
        NavierStokes2d ns(c);
        double div = 0.0;
        for (std::uint64_t s = 0; s < 5; ++s)
            div = std::max(div, ns.max_spectral_divergence(ns.velocity(to_spectrum(sample_grf(c.grf_params(), s)))));
        if (div > 1e-10) bad.push_back("divergence " + fmt(div));

        SimConfig d = c;
        d.nu = 1e-3;
        d.dt_internal = 1e-2;
        d.forcing_amplitude = 0.0;
        NavierStokes2d decay(d);
        const std::size_t n = d.height;
        Field w({n, n});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) w.mutable_data()[i * n + j] = std::cos(2 * kPi * double(j) / n);
        Spectrum sw = to_spectrum(w);
        for (int k = 0; k < 100; ++k) decay.step(sw);
        const Field out = to_field(sw);
        const double amp = std::exp(-d.nu * 4 * kPi * kPi);
        double num = 0.0, den = 0.0;
        for (std::size_t p = 0; p < n * n; ++p) {
            const double e = amp * w.data()[p];
            num += (out.data()[p] - e) * (out.data()[p] - e);
            den += e * e;
        }
        const double decay_err = std::sqrt(num / den);
        if (decay_err > 1e-4) bad.push_back("decay rel err " + fmt(decay_err));

        SimConfig f0 = c;
        f0.forcing_amplitude = 0.0;
        f0.frames = 20;
        SimDiagnostics diag;
        simulate(f0, 17, &diag);
        std::size_t rises = 0;
        for (std::size_t t = 1; t < diag.enstrophy.size(); ++t)
            if (diag.enstrophy[t] > diag.enstrophy[t - 1]) ++rises;
        if (rises) bad.push_back(std::to_string(rises) + " enstrophy increases");

        Spectrum sm = to_spectrum(sample_grf(c.grf_params(), 3));
        double mean = 0.0;
        for (int k = 0; k < 1000; ++k) {
            ns.step(sm);
            if (k % 100 == 99) mean = std::max(mean, std::abs(spatial_mean(to_field(sm).data())));
        }
        if (mean > 1e-10) bad.push_back("mean drift " + fmt(mean));

        const double secs = seconds_since(t0);
        if (secs >= 120.0) bad.push_back("runtime " + fmt(secs, 3) + " s");
        return {bad.empty(), "max div " + fmt(div) + ", decay rel err " + fmt(decay_err) + ", enstrophy rises " +
                                 std::to_string(rises) + ", max |mean| " + fmt(mean) + ", " + fmt(secs, 3) + " s" +
                                 (bad.empty() ? "" : "; failed: " + join(bad))};
    }

    // ------------------------------------------------------------ 3
    Outcome generation() {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            generate(dataset_path(), kSamples);
        } catch (const BlowUpError& e) {
            return {false, std::string("blow-up: ") + e.what()};
        }
        const double secs = seconds_since(t0);
        DatasetReader r(dataset_path().string());
        bool finite = true;
        for (std::size_t i = 0; i < r.size() && finite; ++i)
            for (double v : r.sample(i).data())
                if (!std::isfinite(v)) finite = false;

        const fs::path again = work_ / "repeat.dwb";
        generate(again, 4);
        DatasetReader a(again.string());
        bool identical = true;
        std::ifstream fa(again, std::ios::binary), fb(dataset_path(), std::ios::binary);
        std::vector<char> ba(a.header().payload_bytes()), bb(ba.size());
        fa.seekg(DatasetHeader::kSize);
        fb.seekg(DatasetHeader::kSize);
        fa.read(ba.data(), static_cast<std::streamsize>(ba.size()));
        fb.read(bb.data(), static_cast<std::streamsize>(bb.size()));
        identical = fa && fb && ba == bb;
        fs::remove(again);

        const bool ok = r.size() >= 100 && r.header().T == 50 && r.header().H == 64 && finite && identical && secs < 600.0;
        return {ok, std::to_string(r.size()) + " seeds x " + std::to_string(r.header().T) + " frames at 64x64, finite " +
                        (finite ? "yes" : "no") + ", repeat byte-identical " + (identical ? "yes" : "no") + ", " +
                        fmt(secs, 3) + " s"};
    }

    // ------------------------------------------------------------ 4
    Outcome budgets() {
        struct Row {
            std::string name;
            ModelConfig cfg;
            std::size_t oracle;
            double bucket;
        };
        std::vector<Row> rows;
        ModelConfig c;
        c.family = Family::convlstm;
        c.hidden = {13, 13, 13, 13};
        rows.push_back({"convlstm 4x13", c, testing::oracle_convlstm(1, c.hidden), 50e3});
        c = {};
        c.family = Family::unet;
        c.hidden = {3, 6, 12, 24, 48};
        rows.push_back({"unet [3,6,12,24,48]", c, testing::oracle_unet(c.history, c.hidden), 50e3});
        c = {};
        c.family = Family::tfno2d;
        c.width = 27;
        c.n_layers = 4;
        rows.push_back({"tfno2d w27", c, testing::oracle_fno(c.history, c.lifting, 27, 4, c.m1, c.m2, true), 500e3});
        bool ok = true;
        std::string detail;
        for (const auto& r : rows) {
            const std::size_t closed = count_params(r.cfg), built = build_model<float>(r.cfg)->count_params();
            const double dev = (double(built) - r.bucket) / r.bucket;
            const bool in = std::abs(dev) <= 0.15 && closed == r.oracle && built == r.oracle;
            ok = ok && in;
            if (!detail.empty()) detail += "; ";
            detail += r.name + " " + std::to_string(built) + " (oracle " + std::to_string(r.oracle) + ", " +
                      (dev >= 0 ? "+" : "") + fmt(100 * dev, 3) + "% of " + fmt(r.bucket / 1e3, 3) + "k)" +
                      (in ? "" : " OUT");
        }
        return {ok, detail};
    }

    // ------------------------------------------------------------ 5
    Outcome skill() {
        const auto t0 = std::chrono::steady_clock::now();
        load();
        ModelConfig mc;
        mc.family = Family::tfno2d;
        mc = fit_width_to_budget(mc, 50000);
        auto model = build_model<float>(mc);
        TrainConfig tc = protocol();
        tc.total_updates = 10000;
        tc.val_every = 40;
        std::cerr << "[5] tfno2d width " << mc.width << ", " << model->count_params() << " params, " << tc.total_updates
                  << " updates\n";
        const TrainHistory h = train(*model, train_, val_, tc, progress("[5]"));
        const double train_secs = seconds_since(t0);
        ModelConfig pc;
        pc.family = Family::persistence;
        pc.history = mc.history;
        const ForecastScores base = score_forecasts<float>(*build_model<float>(pc), test_);
        const ForecastScores ms = score_forecasts<float>(*model, test_);
        trained_.push_back(scored("tfno2d-50k-10k", *model, ms, h));
        const double ratio = ms.rmse.mean / base.rmse.mean, secs = seconds_since(t0);
        const bool ok = !h.unstable && ratio <= 0.5 && secs < 3600.0;
        return {ok, std::to_string(model->count_params()) + " params, test RMSE " + fmt(ms.rmse.mean) +
                        " vs persistence " + fmt(base.rmse.mean) + " (ratio " + fmt(ratio, 3) + ", gate 0.5), " +
                        (h.unstable ? "UNSTABLE, " : "") + fmt(train_secs / 60, 3) + " min"};
    }

    // ------------------------------------------------------------ 6
    Outcome ranking() {
        load();
        const std::size_t updates = 1000;
        std::vector<ModelScore> rows;
        std::map<std::string, std::vector<double>> means;
        for (Family f : {Family::tfno2d, Family::unet})
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                ModelConfig mc;
                mc.family = f;
                mc.seed = seed;
                mc = fit_width_to_budget(mc, 50000);
                auto model = build_model<float>(mc);
                TrainConfig tc = protocol();
                tc.total_updates = updates;
                tc.seed = seed;
                tc.val_every = 10;
                const std::string tag = "[6] " + to_string(f) + " s" + std::to_string(seed);
                std::cerr << tag << ": " << model->count_params() << " params, " << updates << " updates\n";
                const TrainHistory h = train(*model, train_, val_, tc, progress(tag));
                ModelScore row = scored(to_string(f) + "-50k-s" + std::to_string(seed), *model,
                                        score_forecasts<float>(*model, test_), h);
                row.budget = "50k";
                means[to_string(f)].push_back(row.scores.rmse.mean);
                rows.push_back(row);
                trained_.push_back(row);
            }
        const auto checks = check_rankings(budget_points(rows), {{"tfno2d", "unet"}});
        fs::create_directories(work_ / "report");
        write_ranking_csv(checks, (work_ / "report" / "ranking.csv").string());
        auto avg = [](const std::vector<double>& v) {
            double s = 0;
            for (double x : v) s += x;
            return s / double(v.size());
        };
        const double tf = avg(means["tfno2d"]), un = avg(means["unet"]);
        const bool expected_inversion = !(tf < un);
        const bool flagged = checks.size() == 1 && checks[0].inverted == expected_inversion;
        return {flagged, "soft gate, " + std::to_string(updates) + " updates x 3 seeds: tfno2d mean RMSE " + fmt(tf) +
                             ", unet " + fmt(un) + "; " +
                             (expected_inversion ? "INVERSION flagged in ranking.csv" : "ordering tfno2d < unet holds") +
                             (flagged ? "" : " (report flag disagrees)")};
    }

    // ------------------------------------------------------------ 7
    Outcome equivariance() {
        std::string detail;
        bool ok = true;
        for (Family f : {Family::fno2d, Family::tfno2d, Family::convlstm}) {
            ModelConfig mc;
            mc.family = f;
            mc.width = 8;
            mc.lifting = 32;
            mc.hidden = {6, 6};
            mc.seed = 4;
            auto m = build_model<double>(mc);
            std::mt19937_64 rng(21);
            auto x = random_tensor({1, mc.history, 32, 32}, rng);
            const auto a = m->rollout(testing::roll(x, 7, 13), 3);
            const auto b = testing::roll(m->rollout(x, 3), 7, 13);
            const double err = max_abs_diff(a, b);
            ok = ok && err <= 1e-4;
            detail += to_string(f) + " " + fmt(err, 3) + "; ";
        }
        ModelConfig tc;
        tc.family = Family::tfno2d;
        tc.width = 6;
        tc.lifting = 16;
        tc.n_layers = 2;
        tc.seed = 9;
        ModelConfig dc = tc;
        dc.family = Family::fno2d;
        FNO2d<double> tf(tc), dense(dc);
        std::mt19937_64 rng(8);
        for (auto& p : tf.parameters())
            if (p.name.find("factor") != std::string::npos)
                for (auto& v : p.tensor.mutable_data()) v += std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
        for (auto& p : dense.parameters()) {
            if (p.name.find(".spectral.") != std::string::npos) continue;
            auto src = tf.param(p.name).data();
            std::copy(src.begin(), src.end(), p.tensor.mutable_data().begin());
        }
        for (std::size_t l = 0; l < tc.n_layers; ++l) {
            auto w = tf.spectral_weight(l);
            const std::string b = "block." + std::to_string(l) + ".spectral.";
            std::copy(w.re.data().begin(), w.re.data().end(), dense.param(b + "re").mutable_data().begin());
            std::copy(w.im.data().begin(), w.im.data().end(), dense.param(b + "im").mutable_data().begin());
        }
        auto x = random_tensor({2, tc.history, 32, 32}, rng);
        const double tucker = max_abs_diff(tf.rollout(x, 3), dense.rollout(x, 3));
        ok = ok && tucker <= 1e-6;
        return {ok, "shift error " + detail + "full-rank tucker vs dense " + fmt(tucker, 3)};
    }

    // ------------------------------------------------------------ 8
    Outcome protocol_arithmetic() {
        TrainConfig tc;
        tc.split.n_train = 1000;
        tc.batch_size = 4;
        tc.epochs = 500;
        const std::size_t updates = tc.planned_updates();
        const double lr0 = 1e-3;
        const double a = cosine_lr(0, updates, lr0), b = cosine_lr(updates / 2, updates, lr0),
                     c = cosine_lr(updates, updates, lr0);
        const bool ok = updates == 125000 && a == lr0 && b == lr0 / 2 && c == 0.0;
        std::ostringstream s;
        s << updates << " updates; lr at 0, T/2, T = " << a << ", " << b << ", " << c;
        return {ok, s.str()};
    }

    // ------------------------------------------------------------ 9
    Outcome stability() {
        load();
        const EvalConfig ev;
        const double threshold = ev.blowup_factor * max_abs(train_);
        ModelConfig pc;
        pc.family = Family::persistence;
        auto persistence = build_model<float>(pc);
        std::optional<std::size_t> worst;
        for (std::size_t i = 0; i < std::min<std::size_t>(5, test_.size()); ++i)
            if (auto s = stability_sweep(*persistence, frames(test_[i], 0, pc.history), ev.stability_steps, threshold))
                worst = s;

        ScaledLast doubling(2.0);
        const auto dstep = stability_sweep<double>(doubling, Tensor<double>::full({1, 4, 4}, 1.0), 50, 1e3);

        if (trained_.empty()) {
            ModelConfig mc;
            mc.family = Family::tfno2d;
            mc = fit_width_to_budget(mc, 50000);
            auto model = build_model<float>(mc);
            TrainConfig tc = protocol();
            tc.total_updates = 100;
            const TrainHistory h = train(*model, train_, val_, tc);
            trained_.push_back(scored("tfno2d-50k-100", *model, score_forecasts<float>(*model, test_), h));
        }
        fs::create_directories(work_ / "report");
        const fs::path csv = work_ / "report" / "summary.csv";
        write_summary_csv(trained_, csv.string());
        std::ifstream in(csv);
        std::string header, line;
        std::getline(in, header);
        std::size_t col = 0, recorded = 0, rows = 0;
        {
            std::stringstream hs(header);
            std::string name;
            for (std::size_t k = 0; std::getline(hs, name, ','); ++k)
                if (name == "blowup_step") col = k + 1;
        }
        std::string steps;
        while (std::getline(in, line)) {
            std::vector<std::string> f;
            std::stringstream ls(line);
            for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
            if (line.back() == ',') f.push_back("");
            const auto& want = trained_[rows].blowup_step;
            if (col && f.size() >= col && f[col - 1] == (want ? std::to_string(*want) : "")) ++recorded;
            steps += (steps.empty() ? "" : ",") + (f.size() >= col && col && !f[col - 1].empty() ? f[col - 1] : "none");
            ++rows;
        }
        const bool ok = !worst && dstep == std::optional<std::size_t>(10) && col && rows == trained_.size() &&
                        recorded == rows;
        return {ok, std::string("persistence blow-up ") + (worst ? std::to_string(*worst) : "none") + ", doubling " +
                        (dstep ? std::to_string(*dstep) : "none") + ", trained models " + std::to_string(recorded) +
                        "/" + std::to_string(trained_.size()) + " recorded (steps " + steps + ")"};
    }

    // ------------------------------------------------------------ 10
    Outcome metrics() {
        std::mt19937_64 rng(99);
        const std::size_t S = 4, H = 16, W = 8;
        auto target = random_tensor({S, H, W}, rng), clim = random_tensor({S, H, W}, rng);
        auto pred = random_tensor({S, H, W}, rng);

        double same = 1.0;
        for (double v : acc(target, target, clim)) same = std::min(same, v);
        Tensor<double> anti({S, H, W});
        for (std::size_t k = 0; k < anti.numel(); ++k)
            anti.mutable_data()[k] = 2 * clim.data()[k] - target.data()[k];
        double opposite = -1.0;
        for (double v : acc(anti, target, clim)) opposite = std::max(opposite, v);
        bool undefined = false;
        try {
            acc(clim, target, clim);
        } catch (const UndefinedAcc&) {
            undefined = true;
        }

        const LeadScores r = rmse(pred, target);
        double worst = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            long double acc2 = 0;
            for (std::size_t i = 0; i < H; ++i)
                for (std::size_t j = 0; j < W; ++j) {
                    const long double d = static_cast<long double>(pred.data()[(s * H + i) * W + j]) -
                                          target.data()[(s * H + i) * W + j];
                    acc2 += d * d;
                }
            worst = std::max(worst, std::abs(r.per_lead[s] - double(std::sqrt(acc2 / (H * W)))));
        }
        const bool ok = std::abs(same - 1.0) <= 1e-12 && std::abs(opposite + 1.0) <= 1e-12 && undefined && worst <= 1e-10;
        return {ok, "acc(target) " + fmt(same, 15) + ", acc(anti) " + fmt(opposite, 15) + ", climatology " +
                        (undefined ? "undefined" : "DEFINED") + ", rmse vs loop " + fmt(worst, 3)};
    }

private:
    static constexpr std::size_t kSamples = 130;
    fs::path work_;
    std::vector<Tensor<float>> train_, val_, test_;
    std::vector<ModelScore> trained_;

    fs::path dataset_path() const { return work_ / "re1e3_64.dwb"; }

    static std::string join(const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
        return s;
    }

    static double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
        if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
        double m = 0;
        for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
        return m;
    }

    void generate(const fs::path& path, std::size_t n) const {
        SimConfig c;
        c.height = c.width = 64;
        c.seed = 7;
        c.n_samples = n;
        DatasetHeader h;
        h.dtype = DType::f32;
        h.n_samples = static_cast<std::uint32_t>(n);
        h.T = static_cast<std::uint32_t>(c.frames);
        h.H = h.W = 64;
        h.seed = c.seed;
        DatasetWriter w(path.string(), h);
        std::size_t done = 0;
        generate_samples(c, 0, n, worker_count(), [&](std::size_t i, const FieldSequence& s) {
            w.write_sample(i, s.frames.data());
            if (++done % 25 == 0) std::cerr << "[3] " << done << "/" << n << " sequences\n";
        });
        w.close();
    }

    void load() {
        if (!train_.empty()) return;
        if (!fs::exists(dataset_path())) generate(dataset_path(), kSamples);
        DatasetReader r(dataset_path().string());
        const SplitViews v = split(r.size(), {100, 10, 20});
        train_ = load_samples<float>(r, v.train);
        val_ = load_samples<float>(r, v.val);
        test_ = load_samples<float>(r, v.test);
    }

    static TrainConfig protocol() {
        TrainConfig tc;
        tc.split = {100, 10, 20};
        tc.rollout_steps = 1;
        return tc;
    }

    static EpochCallback progress(std::string tag) {
        return [tag](const EpochRecord& e, const TrainHistory& h) {
            if (!std::isnan(e.val_rmse))
                std::cerr << tag << " epoch " << e.epoch << " update " << h.updates() << " loss " << fmt(h.loss.back())
                          << " val " << fmt(e.val_rmse) << "\n";
        };
    }

    ModelScore scored(const std::string& label, const Model<float>& m, const ForecastScores& s, const TrainHistory& h) {
        ModelScore r;
        r.model = label;
        r.family = to_string(m.config().family);
        r.params = m.count_params();
        r.seed = m.config().seed;
        r.scores = s;
        r.peak_mem_bytes = 3 * r.params * sizeof(float) + h.peak_tape_bytes;
        const EvalConfig ev;
        r.blowup_step = stability_sweep(m, frames(test_.front(), 0, m.history()), ev.stability_steps,
                                        ev.blowup_factor * max_abs(train_));
        return r;
    }
};

std::set<int> parse_ids(const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');)
        if (!tok.empty()) out.insert(std::stoi(tok));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stormbench acceptance suite"};
    std::string only, xfail;
    std::string work = (fs::temp_directory_path() / "stormbench_acceptance").string();
    app.add_option("--only", only, "comma separated criteria to run (default all)");
    app.add_option("--xfail", xfail, "criteria known to fail; exit status ignores exactly these");
    app.add_option("--workdir", work, "directory for generated data and reports");
    CLI11_PARSE(app, argc, argv);

    std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10} : parse_ids(only);
    const std::set<int> expected_fail = parse_ids(xfail);
    Suite suite{fs::path(work)};
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"autodiff gradients", [&] { return suite.autodiff(); }},
        {"solver physics", [&] { return suite.solver(); }},
        {"dataset generation", [&] { return suite.generation(); }},
        {"parameter budgets", [&] { return suite.budgets(); }},
        {"desk-scale skill", [&] { return suite.skill(); }},
        {"desk-scale ranking", [&] { return suite.ranking(); }},
        {"equivariance", [&] { return suite.equivariance(); }},
        {"protocol arithmetic", [&] { return suite.protocol_arithmetic(); }},
        {"stability sweep", [&] { return suite.stability(); }},
        {"verification metrics", [&] { return suite.metrics(); }},
    };

    std::set<int> failed;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!selected.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) failed.insert(id);
        std::cout << "criterion " << std::setw(2) << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first
                  << ": " << o.detail << std::endl;
    }
    std::set<int> expected;
    for (int id : expected_fail)
        if (selected.count(id)) expected.insert(id);
    std::cout << failed.size() << " of " << selected.size() << " criteria failed";
    if (!expected.empty()) std::cout << " (" << expected.size() << " known failure" << (expected.size() > 1 ? "s" : "") << ")";
    std::cout << std::endl;
    return failed == expected ? 0 : 1;
}
