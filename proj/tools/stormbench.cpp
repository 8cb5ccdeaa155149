#include <iostream>

#include <CLI11.hpp>

#include "stormbench/cli/commands.hpp"

namespace sb = stormbench;
namespace cli = stormbench::cli;

namespace {

void add_run_options(CLI::App* app, cli::RunOptions& o, bool need_data = true) {
    auto* d = app->add_option("--data", o.data, "dataset file");
    if (need_data) d->required();
    app->add_option("--config", o.config, "experiment config file")->check(CLI::ExistingFile);
    app->add_option("--split", o.split, "train,val,test sample counts");
    app->add_option("--updates", o.updates, "total optimizer updates");
}

std::vector<sb::Family> families(const std::string& s) {
    std::vector<sb::Family> out;
    for (const auto& f : cli::split_list(s)) out.push_back(sb::parse_family(f));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Autoregressive surrogate benchmark for 2D turbulence"};
    app.require_subcommand(1);
    app.set_version_flag("--version", cli::version_string());
    std::size_t workers = sb::worker_count();
    app.add_option("--workers", workers, "worker threads (default STORMBENCH_WORKERS or 1)")
        ->check(CLI::PositiveNumber);

    cli::GenerateOptions gen;
    std::string gen_dtype = "f32";
    auto* g = app.add_subcommand("generate", "simulate a vorticity dataset");
    g->add_option("--config", gen.config, "experiment config file")->required()->check(CLI::ExistingFile);
    g->add_option("--out", gen.out, "dataset file to write")->required();
    g->add_option("--seed", gen.seed, "dataset seed");
    g->add_option("--samples", gen.samples, "number of sequences");
    g->add_option("--dtype", gen_dtype, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));

    cli::TrainOptions tr;
    std::string tr_family;
    auto* t = app.add_subcommand("train", "train one model");
    add_run_options(t, tr);
    t->add_option("--model", tr_family, "model family")->required();
    t->add_option("--budget", tr.budget, "parameter budget such as 50k");
    t->add_option("--seed", tr.seed, "model and training seed");
    t->add_option("--out", tr.out, "run directory")->required();

    cli::SweepOptions sw;
    std::string sw_families, sw_budgets;
    auto* s = app.add_subcommand("sweep", "train every family x budget x seed");
    add_run_options(s, sw);
    s->add_option("--model", sw_families, "comma separated model families")->required();
    s->add_option("--budgets", sw_budgets, "comma separated budgets such as 5k,50k");
    s->add_option("--seeds", sw.seeds, "seeds per cell");
    s->add_option("--seed", sw.seed, "first seed");
    s->add_option("--out", sw.out, "sweep directory")->required();

    cli::EvalOptions ev;
    auto* e = app.add_subcommand("eval", "score checkpoints and the persistence baseline");
    e->add_option("--ckpt", ev.ckpt, "checkpoint file");
    e->add_option("--sweep-dir", ev.sweep_dir, "sweep directory");
    e->add_option("--model", ev.model, "persistence");
    e->add_option("--data", ev.data, "dataset file");
    e->add_option("--report", ev.report, "report directory")->required();
    e->add_option("--config", ev.config, "experiment config file")->check(CLI::ExistingFile);
    e->add_option("--split", ev.split, "train,val,test sample counts");

    std::string rep_dir;
    std::optional<std::string> rep_data;
    auto* r = app.add_subcommand("report", "evaluate a sweep into <sweep-dir>/report");
    r->add_option("--sweep-dir", rep_dir, "sweep directory")->required();
    r->add_option("--data", rep_data, "dataset file (default: the one the sweep used)");

    cli::BenchOptions bn;
    std::string bn_family;
    auto* b = app.add_subcommand("bench", "time one training epoch and estimate memory");
    add_run_options(b, bn);
    b->add_option("--model", bn_family, "model family")->required();
    b->add_option("--budget", bn.budget, "parameter budget such as 50k");
    b->add_option("--batch", bn.batch, "batch size");
    b->add_option("--out", bn.out, "CSV file for the measurement");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? cli::kOk : cli::kConfigError;
    }

    try {
        if (g->parsed()) {
            gen.dtype = gen_dtype == "f64" ? sb::DType::f64 : sb::DType::f32;
            gen.workers = workers;
            return cli::generate(gen, std::cout);
        }
        if (t->parsed()) {
            tr.family = sb::parse_family(tr_family);
            return cli::train_command(tr, std::cout);
        }
        if (s->parsed()) {
            sw.families = families(sw_families);
            sw.budgets = cli::split_list(sw_budgets);
            sw.workers = workers;
            return cli::sweep(sw, std::cout);
        }
        if (e->parsed()) {
            ev.workers = workers;
            return cli::eval(ev, std::cout);
        }
        if (r->parsed()) return cli::report(rep_dir, rep_data, workers, std::cout);
        if (b->parsed()) {
            bn.family = sb::parse_family(bn_family);
            return cli::bench_command(bn, std::cout);
        }
    } catch (const sb::ConfigError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return cli::kConfigError;
    } catch (const sb::BlowUpError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return g->parsed() ? cli::kBlowUp : cli::kFailure;
    } catch (const cli::MissingCheckpoint& err) {
        std::cerr << "error: " << err.what() << "\n";
        return cli::kMissingCheckpoint;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return cli::kFailure;
    }
    return cli::kFailure;
}
