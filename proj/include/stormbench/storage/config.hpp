#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stormbench/evaluate/eval_config.hpp"
#include "stormbench/models/model_config.hpp"
#include "stormbench/simulate/navier_stokes.hpp"
#include "stormbench/train/train_config.hpp"
#include "stormbench/util/errors.hpp"
#include "stormbench/util/format.hpp"

namespace stormbench {

/// Everything a run needs, grouped as in the config file sections
/// [simulation], [model], [training], [evaluation].
struct ExperimentConfig {
    SimConfig sim{};
    ModelConfig model{};
    TrainConfig train{};
    EvalConfig eval{};

    void validate() const {
        sim.validate();
        model.validate();
        train.validate();
        eval.validate();
    }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string type_error(const std::string& key, const char* expected, const std::string& got) {
    return "type error: " + key + " expects " + expected + ", got '" + got + "'";
}

inline double parse_number(const std::string& key, const std::string& v) {
    double out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(type_error(key, "a number", v));
    return out;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(type_error(key, "a non-negative integer", v));
    return out;
}

/// "3,6,12,24,48" or the repeat shorthand "4x13" (four entries of 13).
inline std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    if (const auto x = v.find_first_of("x*"); x != std::string::npos) {
        const auto n = parse_unsigned(key, trim(v.substr(0, x)));
        const auto c = parse_unsigned(key, trim(v.substr(x + 1)));
        out.assign(n, c);
        return out;
    }
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_unsigned(key, trim(item)));
    if (out.empty()) throw ConfigError(type_error(key, "a list of integers", v));
    return out;
}

inline std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

struct Key {
    std::string section, name;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
    bool required = false;
};

template <class Member>
Key number_key(std::string sec, std::string name, Member member, bool required = false) {
    const std::string full = sec + "." + name;
    return Key{std::move(sec), std::move(name),
               [member, full](ExperimentConfig& c, const std::string& v) { member(c) = parse_number(full, v); },
               [member](const ExperimentConfig& c) { return format_double(member(const_cast<ExperimentConfig&>(c))); },
               required};
}

template <class Member>
Key integer_key(std::string sec, std::string name, Member member, bool required = false) {
    const std::string full = sec + "." + name;
    return Key{std::move(sec), std::move(name),
               [member, full](ExperimentConfig& c, const std::string& v) {
                   using U = std::remove_reference_t<decltype(member(c))>;
                   member(c) = static_cast<U>(parse_unsigned(full, v));
               },
               [member](const ExperimentConfig& c) { return std::to_string(member(const_cast<ExperimentConfig&>(c))); },
               required};
}

inline const std::vector<Key>& keys() {
    using C = ExperimentConfig;
    static const std::vector<Key> table = [&] {
        std::vector<Key> t;
        t.push_back(number_key("simulation", "nu", [](C& c) -> double& { return c.sim.nu; }, true));
        t.push_back(number_key("simulation", "dt", [](C& c) -> double& { return c.sim.dt_internal; }, true));
        t.push_back(integer_key("simulation", "T", [](C& c) -> std::size_t& { return c.sim.frames; }, true));
        t.push_back(number_key("simulation", "forcing_amplitude", [](C& c) -> double& { return c.sim.forcing_amplitude; }));
        t.push_back(integer_key("simulation", "height", [](C& c) -> std::size_t& { return c.sim.height; }));
        t.push_back(integer_key("simulation", "width", [](C& c) -> std::size_t& { return c.sim.width; }));
        t.push_back(integer_key("simulation", "seed", [](C& c) -> std::uint64_t& { return c.sim.seed; }));
        t.push_back(integer_key("simulation", "n_samples", [](C& c) -> std::size_t& { return c.sim.n_samples; }));
        t.push_back(number_key("simulation", "grf_alpha", [](C& c) -> double& { return c.sim.grf.alpha; }));
        t.push_back(number_key("simulation", "grf_tau", [](C& c) -> double& { return c.sim.grf.tau; }));

        t.push_back(Key{"model", "family", [](C& c, const std::string& v) { c.model.family = parse_family(v); },
                        [](const C& c) { return to_string(c.model.family); }});
        t.push_back(integer_key("model", "width", [](C& c) -> std::size_t& { return c.model.width; }));
        t.push_back(Key{"model", "hidden",
                        [](C& c, const std::string& v) { c.model.hidden = parse_list("model.hidden", v); },
                        [](const C& c) { return join(c.model.resolved_hidden()); }});
        t.push_back(integer_key("model", "n_layers", [](C& c) -> std::size_t& { return c.model.n_layers; }));
        t.push_back(Key{"model", "modes",
                        [](C& c, const std::string& v) {
                            auto l = parse_list("model.modes", v);
                            if (l.size() != 2) throw ConfigError(type_error("model.modes", "two integers m1,m2", v));
                            c.model.m1 = l[0];
                            c.model.m2 = l[1];
                        },
                        [](const C& c) { return std::to_string(c.model.m1) + "," + std::to_string(c.model.m2); }});
        t.push_back(number_key("model", "tucker_rank_fraction", [](C& c) -> double& { return c.model.tucker_rank_fraction; }));
        t.push_back(integer_key("model", "history", [](C& c) -> std::size_t& { return c.model.history; }));
        t.push_back(integer_key("model", "lifting", [](C& c) -> std::size_t& { return c.model.lifting; }));
        t.push_back(Key{"model", "pad_mode", [](C& c, const std::string& v) { c.model.pad = parse_pad_mode(v); },
                        [](const C& c) { return to_string(c.model.pad); }});
        t.push_back(integer_key("model", "seed", [](C& c) -> std::uint64_t& { return c.model.seed; }));

        t.push_back(number_key("training", "lr", [](C& c) -> double& { return c.train.lr; }));
        t.push_back(integer_key("training", "batch_size", [](C& c) -> std::size_t& { return c.train.batch_size; }));
        t.push_back(integer_key("training", "total_updates", [](C& c) -> std::size_t& { return c.train.total_updates; }));
        t.push_back(integer_key("training", "epochs", [](C& c) -> std::size_t& { return c.train.epochs; }));
        t.push_back(number_key("training", "clip_norm", [](C& c) -> double& { return c.train.clip_norm; }));
        t.push_back(integer_key("training", "seed", [](C& c) -> std::uint64_t& { return c.train.seed; }));
        t.push_back(number_key("training", "beta1", [](C& c) -> double& { return c.train.beta1; }));
        t.push_back(number_key("training", "beta2", [](C& c) -> double& { return c.train.beta2; }));
        t.push_back(number_key("training", "eps", [](C& c) -> double& { return c.train.eps; }));
        t.push_back(integer_key("training", "rollout_steps", [](C& c) -> std::size_t& { return c.train.rollout_steps; }));
        t.push_back(integer_key("training", "val_every", [](C& c) -> std::size_t& { return c.train.val_every; }));
        t.push_back(integer_key("training", "n_train", [](C& c) -> std::size_t& { return c.train.split.n_train; }));
        t.push_back(integer_key("training", "n_val", [](C& c) -> std::size_t& { return c.train.split.n_val; }));
        t.push_back(integer_key("training", "n_test", [](C& c) -> std::size_t& { return c.train.split.n_test; }));

        t.push_back(number_key("evaluation", "blowup_factor", [](C& c) -> double& { return c.eval.blowup_factor; }));
        t.push_back(integer_key("evaluation", "stability_steps", [](C& c) -> std::size_t& { return c.eval.stability_steps; }));
        t.push_back(integer_key("evaluation", "bench_batch", [](C& c) -> std::size_t& { return c.eval.bench_batch; }));
        return t;
    }();
    return table;
}

inline const std::vector<std::string>& sections() {
    static const std::vector<std::string> s{"simulation", "model", "training", "evaluation"};
    return s;
}

}  // namespace config_detail

/// Parses sectioned `key = value` text with `#` comments. Unknown, duplicate,
/// missing-required and mistyped keys are each reported by name.
inline ExperimentConfig parse_config(const std::string& text) {
    using namespace config_detail;
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(std::string_view(raw).substr(0, hash));
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + "malformed section header '" + line + "'");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (std::find(sections().begin(), sections().end(), section) == sections().end())
                throw ConfigError(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + line + "'");
        if (section.empty()) throw ConfigError(where + "key outside of any section");
        const std::string name = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        const std::string full = section + "." + name;
        const Key* key = nullptr;
        for (const auto& k : keys())
            if (k.section == section && k.name == name) key = &k;
        if (!key) throw ConfigError(where + "unknown key '" + full + "'");
        if (!seen.insert(full).second) throw ConfigError(where + "duplicate key '" + full + "'");
        try {
            key->set(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(where + full + ": " + e.what());
        }
    }
    for (const auto& k : keys())
        if (k.required && !seen.count(k.section + "." + k.name))
            throw ConfigError("missing required key '" + k.section + "." + k.name + "'");
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Canonical text of a config: every key, fixed order, shortest round-trip
/// numbers. parse_config(dump_config(c)) reproduces c exactly.
inline std::string dump_config(const ExperimentConfig& cfg) {
    using namespace config_detail;
    std::string out;
    for (const auto& sec : sections()) {
        if (!out.empty()) out += "\n";
        out += "[" + sec + "]\n";
        for (const auto& k : keys()) {
            if (k.section != sec) continue;
            if (k.name == "hidden" && cfg.model.resolved_hidden().empty()) continue;
            out += k.name + " = " + k.get(cfg) + "\n";
        }
    }
    return out;
}

}  // namespace stormbench
