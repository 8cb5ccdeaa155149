#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stormbench/cli/manifest.hpp"
#include "stormbench/evaluate/bench.hpp"
#include "stormbench/evaluate/forecast.hpp"
#include "stormbench/evaluate/report.hpp"
#include "stormbench/evaluate/stability.hpp"
#include "stormbench/models/build.hpp"
#include "stormbench/simulate/navier_stokes.hpp"
#include "stormbench/storage/config.hpp"
#include "stormbench/storage/dataset.hpp"
#include "stormbench/train/trainer.hpp"
#include "stormbench/util/format.hpp"
#include "stormbench/util/workers.hpp"

namespace stormbench::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kConfigError = 2,
    kBlowUp = 3,
    kAllUnstable = 4,
    kMissingCheckpoint = 5,
};

class MissingCheckpoint : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// "100,10,20" -> train/val/test counts.
inline SplitSpec parse_split(const std::string& s) {
    std::vector<std::size_t> v;
    try {
        v = config_detail::parse_list("--split", s);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (v.size() != 3) throw ConfigError("--split expects three counts train,val,test, got '" + s + "'");
    return {v[0], v[1], v[2]};
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        item = config_detail::trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// Options shared by the commands that read a dataset and a config.
struct RunOptions {
    std::string data;
    std::optional<std::string> config;
    std::optional<std::string> split;
    std::optional<std::size_t> updates;

    ExperimentConfig experiment() const {
        ExperimentConfig e = config ? load_config(*config) : ExperimentConfig{};
        if (split) e.train.split = parse_split(*split);
        if (updates) e.train.total_updates = *updates;
        e.validate();
        return e;
    }
};

/// Train, validation and test sequences of a dataset in training precision.
struct Datasets {
    std::string path;
    std::string hash;
    DatasetHeader header;
    std::vector<Tensor<float>> train, val, test;

    static Datasets load(const std::string& path, const SplitSpec& spec) {
        DatasetReader reader(path);
        const SplitViews v = split(reader.size(), spec);
        return {path, hex64(fnv1a_file(path)), reader.header(), load_samples<float>(reader, v.train),
                load_samples<float>(reader, v.val), load_samples<float>(reader, v.test)};
    }

    Json describe() const { return Json{{"path", path}, {"fnv1a", hash}, {"samples", header.n_samples}}; }
};

// ---------------------------------------------------------------- generate

struct GenerateOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    DType dtype = DType::f32;
    std::size_t workers = 1;
};

inline int generate(const GenerateOptions& o, std::ostream& log) {
    ExperimentConfig exp = load_config(o.config);
    SimConfig& sim = exp.sim;
    if (o.seed) sim.seed = *o.seed;
    if (o.samples) sim.n_samples = *o.samples;
    if (sim.n_samples < 1) throw ConfigError("--samples must be >= 1");
    sim.validate();

    Manifest man(o.out + ".manifest.json");
    const std::string dump = dump_config(exp);
    if (man.has("status") && man.doc()["status"] == "complete" && man.doc()["config"] == dump && fs::exists(o.out) &&
        man.doc()["dataset"]["fnv1a"] == hex64(fnv1a_file(o.out))) {
        log << "generate: " << o.out << " is up to date\n";
        return kOk;
    }
    man.doc()["command"] = "generate";
    man.doc()["config"] = dump;
    man.doc()["seed"] = sim.seed;
    man.doc()["status"] = "running";
    man.save();

    DatasetHeader h;
    h.dtype = o.dtype;
    h.n_samples = static_cast<std::uint32_t>(sim.n_samples);
    h.T = static_cast<std::uint32_t>(sim.frames);
    h.H = static_cast<std::uint32_t>(sim.height);
    h.W = static_cast<std::uint32_t>(sim.width);
    h.seed = sim.seed;
    DatasetWriter writer(o.out, h);
    std::mutex mu;
    SimDiagnostics total;
    double ens_min = std::numeric_limits<double>::infinity(), ens_max = 0.0;
    std::size_t done = 0;
    parallel_for(sim.n_samples, o.workers, [&](std::size_t i) {
        SimDiagnostics d;
        FieldSequence seq;
        try {
            seq = simulate(sim, sample_seed(sim.seed, i), &d);
        } catch (const BlowUpError& e) {
            throw BlowUpError("sample " + std::to_string(i) + " blew up", e.step());
        }
        std::lock_guard lock(mu);
        writer.write_sample(i, seq.frames.data());
        total.max_divergence = std::max(total.max_divergence, d.max_divergence);
        total.max_abs_mean = std::max(total.max_abs_mean, d.max_abs_mean);
        for (double e : d.enstrophy) {
            ens_min = std::min(ens_min, e);
            ens_max = std::max(ens_max, e);
        }
        if (++done % 50 == 0 || done == sim.n_samples) log << "generate: " << done << "/" << sim.n_samples << " samples\n";
    });
    writer.close();

    man.doc()["dataset"] = Json{{"path", o.out}, {"fnv1a", hex64(fnv1a_file(o.out))}, {"samples", sim.n_samples},
                                {"shape", {sim.frames, sim.height, sim.width}}};
    man.doc()["status"] = "complete";
    man.save();
    log << "generate: wrote " << sim.n_samples << " x " << sim.frames << " x " << sim.height << " x " << sim.width
        << " to " << o.out << "\n"
        << "  max spectral divergence " << format_double(total.max_divergence) << "\n"
        << "  max |spatial mean|      " << format_double(total.max_abs_mean) << "\n"
        << "  enstrophy range         [" << format_double(ens_min) << ", " << format_double(ens_max) << "]\n";
    return kOk;
}

// ---------------------------------------------------------------- train / sweep

struct CellSpec {
    Family family = Family::tfno2d;
    std::string budget;  // empty: width from the config
    std::uint64_t seed = 0;

    std::string id() const {
        return to_string(family) + (budget.empty() ? "" : "-" + budget) + "-s" + std::to_string(seed);
    }
};

inline bool cell_finished(const Json& cell) {
    const std::string s = cell.value("status", "");
    if (s == "unreachable") return true;
    return (s == "done" || s == "unstable") && fs::exists(cell.value("checkpoint", ""));
}

/// Trains one (family, budget, seed) cell into `dir`. Unreachable budgets and
/// unstable runs are recorded in the returned JSON rather than thrown.
inline Json run_cell(const ExperimentConfig& base, const Datasets& data, const CellSpec& spec, const fs::path& dir,
                     std::ostream& log, std::mutex& log_mu) {
    Json cell{{"id", spec.id()}, {"family", to_string(spec.family)}, {"budget", spec.budget}, {"seed", spec.seed}};
    ExperimentConfig exp = base;
    exp.model.family = spec.family;
    exp.model.seed = spec.seed;
    exp.train.seed = spec.seed;
    exp.model.hidden.clear();
    if (!base.model.hidden.empty() && base.model.family == spec.family) exp.model.hidden = base.model.hidden;
    if (!spec.budget.empty()) {
        try {
            exp.model = fit_width_to_budget(exp.model, parse_budget(spec.budget));
        } catch (const UnreachableBudget& e) {
            cell["status"] = "unreachable";
            cell["message"] = e.what();
            std::lock_guard lock(log_mu);
            log << spec.id() << ": unreachable (" << e.what() << ")\n";
            return cell;
        }
    }
    exp.model.validate_grid(data.header.H, data.header.W);
    fs::create_directories(dir);
    auto model = build_model<float>(exp.model);
    const std::size_t params = model->count_params();
    cell["params"] = params;
    {
        std::lock_guard lock(log_mu);
        log << spec.id() << ": " << params << " parameters, " << exp.train.planned_updates() << " updates\n";
    }
    const std::size_t epochs = exp.train.planned_epochs();
    const TrainHistory hist = train(*model, data.train, data.val, exp.train, [&](const EpochRecord& e, const TrainHistory& h) {
        std::lock_guard lock(log_mu);
        log << spec.id() << ": epoch " << e.epoch << "/" << epochs << " loss "
            << (h.loss.empty() ? std::string("-") : format_double(h.loss.back()));
        if (!std::isnan(e.val_rmse)) log << " val_rmse " << format_double(e.val_rmse);
        log << " (" << std::fixed << std::setprecision(2) << e.seconds << "s)" << std::defaultfloat
            << std::setprecision(6) << "\n";
    });

    double seconds = 0.0;
    for (const auto& e : hist.epochs) seconds += e.seconds;
    if (!hist.epochs.empty()) seconds /= static_cast<double>(hist.epochs.size());
    const std::size_t peak = 3 * params * sizeof(float) + hist.peak_tape_bytes;

    Checkpoint ck = to_checkpoint(*model, exp);
    ck.text["train.status"] = hist.unstable ? "unstable" : "done";
    ck.text["train.seconds_per_epoch"] = format_double(seconds);
    ck.text["train.peak_mem_bytes"] = std::to_string(peak);
    ck.text["train.best_val_rmse"] = format_double(hist.best_val_rmse);
    ck.text["train.rollout_steps"] = std::to_string(hist.rollout_steps);
    const fs::path ckpt = dir / "model.ckpt", upd = dir / "history_updates.csv", eps = dir / "history_epochs.csv";
    write_checkpoint(ckpt.string(), ck);
    write_history_csv(hist, upd.string(), eps.string());

    cell["status"] = hist.unstable ? "unstable" : "done";
    cell["checkpoint"] = ckpt.string();
    cell["history_updates"] = upd.string();
    cell["history_epochs"] = eps.string();
    cell["updates"] = hist.updates();
    cell["best_val_rmse"] = format_double(hist.best_val_rmse);
    cell["seconds_per_epoch"] = seconds;
    if (hist.unstable) {
        cell["message"] = hist.instability;
        std::lock_guard lock(log_mu);
        log << spec.id() << ": unstable at update " << hist.failed_update.value_or(0) << " (" << hist.instability << ")\n";
    }
    return cell;
}

struct SweepOptions : RunOptions {
    std::vector<Family> families;
    std::vector<std::string> budgets;  // empty entry: config width
    std::size_t seeds = 1;
    std::optional<std::uint64_t> seed;  // first seed; default training.seed
    std::string out;
    std::size_t workers = 1;
};

/// Trains every (family x budget x seed) cell into out/<cell id>, skipping cells
/// the manifest already records as finished. Returns kAllUnstable when every
/// seed of some (family, budget) blew up.
inline int sweep(const SweepOptions& o, std::ostream& log, const std::string& command = "sweep") {
    if (o.families.empty()) throw ConfigError("no model family given");
    if (o.seeds < 1) throw ConfigError("--seeds must be >= 1");
    for (Family f : o.families)
        if (f == Family::persistence) throw ConfigError("persistence has nothing to train");
    const ExperimentConfig base = o.experiment();
    const std::uint64_t first_seed = o.seed.value_or(base.train.seed);
    std::vector<CellSpec> cells;
    for (Family f : o.families)
        for (const auto& b : o.budgets.empty() ? std::vector<std::string>{""} : o.budgets) {
            if (!b.empty()) parse_budget(b);
            for (std::size_t s = 0; s < o.seeds; ++s) cells.push_back({f, b, first_seed + s});
        }

    const fs::path out(o.out);
    fs::create_directories(out);
    Manifest man(out / "manifest.json");
    const std::string dump = dump_config(base);
    if (man.has("config") && man.doc()["config"] != dump)
        throw ConfigError(man.path().string() + " was written for a different configuration; use a new --out directory");
    Datasets data = Datasets::load(o.data, base.train.split);
    if (man.has("data") && man.doc()["data"]["fnv1a"] != data.hash)
        throw ConfigError(man.path().string() + " was written for different data; use a new --out directory");
    man.doc()["command"] = command;
    man.doc()["config"] = dump;
    man.doc()["data"] = data.describe();
    if (!man.has("cells")) man.doc()["cells"] = Json::object();
    man.save();

    std::vector<CellSpec> todo;
    for (const auto& c : cells) {
        const auto& done = man.doc()["cells"];
        if (done.contains(c.id()) && cell_finished(done[c.id()]))
            log << c.id() << ": already " << done[c.id()]["status"].get<std::string>() << ", skipped\n";
        else
            todo.push_back(c);
    }
    std::mutex mu;
    parallel_for(todo.size(), o.workers, [&](std::size_t i) {
        Json cell = run_cell(base, data, todo[i], out / todo[i].id(), log, mu);
        std::lock_guard lock(mu);
        man.doc()["cells"][todo[i].id()] = cell;
        man.save();
    });

    int code = kOk;
    for (Family f : o.families)
        for (const auto& b : o.budgets.empty() ? std::vector<std::string>{""} : o.budgets) {
            std::size_t unstable = 0, total = 0;
            for (const auto& c : cells)
                if (c.family == f && c.budget == b) {
                    ++total;
                    if (man.doc()["cells"][c.id()].value("status", "") == "unstable") ++unstable;
                }
            if (total && unstable == total) {
                log << to_string(f) << (b.empty() ? "" : " " + b) << ": every seed blew up\n";
                code = kAllUnstable;
            }
        }
    return code;
}

struct TrainOptions : RunOptions {
    Family family = Family::tfno2d;
    std::optional<std::string> budget;
    std::optional<std::uint64_t> seed;
    std::string out;
};

inline int train_command(const TrainOptions& o, std::ostream& log) {
    SweepOptions s;
    static_cast<RunOptions&>(s) = o;
    s.families = {o.family};
    if (o.budget) s.budgets = {*o.budget};
    s.seeds = 1;
    s.seed = o.seed;
    s.out = o.out;
    return sweep(s, log, "train");
}

// ---------------------------------------------------------------- eval / report

struct EvalOptions {
    std::optional<std::string> ckpt;
    std::optional<std::string> sweep_dir;
    std::optional<std::string> model;  // "persistence" evaluates the baseline alone
    std::optional<std::string> data;
    std::string report;
    std::optional<std::string> config;
    std::optional<std::string> split;
    std::size_t workers = 1;
};

struct EvalTarget {
    std::string label, budget, checkpoint;
};

namespace detail {

inline double text_number(const Checkpoint& ck, const std::string& key, double fallback) {
    auto it = ck.text.find(key);
    if (it == ck.text.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        return fallback;
    }
}

/// Scores a model on the test split and runs its closed-loop stability sweep.
inline ModelScore score_model(const Model<float>& model, const std::string& label, const std::string& budget,
                              const Datasets& data, const Tensor<float>& clim, const EvalConfig& ev) {
    ModelScore r;
    r.model = label;
    r.family = to_string(model.config().family);
    r.budget = budget;
    r.params = model.count_params();
    r.seed = model.config().seed;
    r.scores = score_forecasts<float>(model, data.test, &clim, ev.bench_batch);
    const std::size_t h = model.history();
    const double threshold = ev.blowup_factor * max_abs(data.train);
    r.blowup_step = stability_sweep(model, frames(data.test.front(), 0, h), ev.stability_steps, threshold);
    return r;
}

}  // namespace detail

inline int eval(const EvalOptions& o, std::ostream& log) {
    const int modes = int(o.ckpt.has_value()) + int(o.sweep_dir.has_value()) + int(o.model.has_value());
    if (modes != 1) throw ConfigError("give exactly one of --ckpt, --sweep-dir or --model persistence");
    if (o.model && parse_family(*o.model) != Family::persistence)
        throw ConfigError("--model only selects the persistence baseline; use --ckpt for trained models");

    std::vector<EvalTarget> targets;
    std::optional<std::string> data_path = o.data;
    if (o.ckpt) {
        if (!fs::exists(*o.ckpt)) throw MissingCheckpoint("checkpoint not found: " + *o.ckpt);
        const fs::path p(*o.ckpt);
        const std::string label = p.has_parent_path() && p.parent_path().has_filename()
                                      ? p.parent_path().filename().string()
                                      : p.stem().string();
        targets.push_back({label, "", *o.ckpt});
    }
    if (o.sweep_dir) {
        const fs::path mp = fs::path(*o.sweep_dir) / "manifest.json";
        if (!fs::exists(mp)) throw MissingCheckpoint("no sweep manifest at " + mp.string());
        Manifest man(mp);
        if (!data_path && man.has("data")) data_path = man.doc()["data"]["path"].get<std::string>();
        for (const auto& [id, cell] : man.doc()["cells"].items()) {
            const std::string status = cell.value("status", "");
            if (status == "unreachable") continue;
            if (!cell.contains("checkpoint") || !fs::exists(cell["checkpoint"].get<std::string>()))
                throw MissingCheckpoint("sweep cell " + id + " has no checkpoint");
            targets.push_back({id, cell.value("budget", ""), cell["checkpoint"].get<std::string>()});
        }
        if (targets.empty()) throw MissingCheckpoint("sweep at " + *o.sweep_dir + " has no finished cells");
    }
    if (!data_path) throw ConfigError("--data is required");

    std::vector<LoadedModel<float>> models;
    for (const auto& t : targets) models.push_back(load_model<float>(t.checkpoint));

    ExperimentConfig exp = o.config ? load_config(*o.config) : (models.empty() ? ExperimentConfig{} : models.front().config);
    std::optional<SplitSpec> spec;
    if (o.split)
        spec = parse_split(*o.split);
    else if (!models.empty() || o.config)
        spec = exp.train.split;
    Datasets data;
    if (spec) {
        data = Datasets::load(*data_path, *spec);
    } else {
        // Baseline on a bare dataset: every sample is both reference and test.
        DatasetReader reader(*data_path);
        data = Datasets::load(*data_path, {reader.size(), 0, 0});
        data.test = data.train;
    }
    if (data.test.empty()) throw ConfigError("the test split is empty");
    const Tensor<float> clim = climatology(data.train);

    std::vector<ModelScore> rows(models.size());
    parallel_for(models.size(), o.workers, [&](std::size_t i) {
        const Checkpoint ck = read_checkpoint(targets[i].checkpoint);
        ModelScore r = detail::score_model(*models[i].model, targets[i].label, targets[i].budget, data, clim, exp.eval);
        r.seconds_per_epoch = detail::text_number(ck, "train.seconds_per_epoch", std::numeric_limits<double>::quiet_NaN());
        r.peak_mem_bytes = static_cast<std::size_t>(detail::text_number(ck, "train.peak_mem_bytes", 0.0));
        rows[i] = std::move(r);
    });
    ModelConfig pc;
    pc.family = Family::persistence;
    pc.history = models.empty() ? exp.model.history : models.front().config.model.history;
    if (models.empty() && !o.config) pc.history = std::min<std::size_t>(pc.history, data.header.T - 1);
    pc.validate();
    auto persistence = build_model<float>(pc);
    rows.push_back(detail::score_model(*persistence, "persistence", "", data, clim, exp.eval));

    const fs::path dir(o.report);
    fs::create_directories(dir);
    Manifest man(dir / "manifest.json");
    man.doc()["command"] = o.sweep_dir ? "report" : "eval";
    man.doc()["config"] = dump_config(exp);
    man.doc()["data"] = data.describe();
    Json ckpts = Json::array();
    for (const auto& t : targets) ckpts.push_back(t.checkpoint);
    man.doc()["checkpoints"] = ckpts;
    Json reports = Json::array();
    auto emit = [&](const fs::path& p) { reports.push_back(p.string()); };

    write_lead_csv(rows, (dir / "lead.csv").string());
    emit(dir / "lead.csv");
    write_summary_csv(rows, (dir / "summary.csv").string());
    emit(dir / "summary.csv");
    rmse_vs_lead_chart(rows).write((dir / "rmse_vs_lead.svg").string());
    emit(dir / "rmse_vs_lead.svg");
    std::vector<RankingCheck> checks;
    if (o.sweep_dir) {
        const auto pts = budget_points(rows);
        rmse_vs_params_chart(pts).write((dir / "rmse_vs_params.svg").string());
        emit(dir / "rmse_vs_params.svg");
        checks = check_rankings(pts, {{"tfno2d", "unet"}, {"fno2d", "unet"}});
        write_ranking_csv(checks, (dir / "ranking.csv").string());
        emit(dir / "ranking.csv");
    }
    man.doc()["reports"] = reports;
    man.save();

    log << std::left << std::setw(28) << "model" << std::setw(10) << "params" << std::setw(12) << "mean_rmse"
        << std::setw(12) << "final_rmse" << "blowup_step\n";
    for (const auto& r : rows) {
        std::ostringstream mean, fin;
        mean << std::setprecision(4) << r.scores.rmse.mean;
        fin << std::setprecision(4) << r.scores.rmse.final();
        log << std::left << std::setw(28) << r.model << std::setw(10) << r.params << std::setw(12) << mean.str()
            << std::setw(12) << fin.str() << (r.blowup_step ? std::to_string(*r.blowup_step) : "-") << "\n";
    }
    for (const auto& c : checks)
        log << (c.inverted ? "RANKING INVERSION at " : "ranking ok at ") << c.budget << ": " << c.better << " "
            << format_double(c.better_mean) << (c.inverted ? " >= " : " < ") << c.worse << " "
            << format_double(c.worse_mean) << "\n";
    log << "report written to " << dir.string() << "\n";
    return kOk;
}

inline int report(const std::string& sweep_dir, const std::optional<std::string>& data, std::size_t workers,
                  std::ostream& log) {
    EvalOptions o;
    o.sweep_dir = sweep_dir;
    o.data = data;
    o.report = (fs::path(sweep_dir) / "report").string();
    o.workers = workers;
    return eval(o, log);
}

// ---------------------------------------------------------------- bench

struct BenchOptions : RunOptions {
    Family family = Family::tfno2d;
    std::optional<std::string> budget;
    std::size_t batch = 0;  // 0: evaluation.bench_batch
    std::optional<std::string> out;
};

inline int bench_command(const BenchOptions& o, std::ostream& log) {
    const ExperimentConfig exp = o.experiment();
    ModelConfig mc = exp.model;
    mc.family = o.family;
    if (o.budget) mc = fit_width_to_budget(mc, parse_budget(*o.budget));
    const Datasets data = Datasets::load(o.data, exp.train.split);
    const std::size_t batch = o.batch ? o.batch : exp.eval.bench_batch;
    const BenchRecord r = bench(mc, data.train, exp.train, batch);
    const std::size_t params = count_params(mc);
    log << to_string(mc.family) << " (" << params << " parameters), batch " << batch << ": "
        << format_double(r.seconds_per_epoch) << " s/epoch over " << r.updates << " updates\n"
        << "  parameters " << r.param_bytes << " B, optimizer " << r.optimizer_bytes << " B, activations "
        << r.activation_bytes << " B, peak " << r.peak_mem_bytes() << " B\n";
    if (o.out) {
        std::ofstream csv(*o.out, std::ios::trunc);
        if (!csv) throw std::runtime_error("cannot write " + *o.out);
        csv << "model,params,batch,seconds_per_epoch,param_bytes,optimizer_bytes,activation_bytes,peak_mem_bytes\n"
            << to_string(mc.family) << ',' << params << ',' << batch << ',' << format_double(r.seconds_per_epoch) << ','
            << r.param_bytes << ',' << r.optimizer_bytes << ',' << r.activation_bytes << ',' << r.peak_mem_bytes() << '\n';
    }
    return kOk;
}

}  // namespace stormbench::cli
