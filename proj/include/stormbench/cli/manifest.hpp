#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "stormbench/util/errors.hpp"

namespace stormbench::cli {

using Json = nlohmann::ordered_json;

#ifndef STORMBENCH_VERSION
#define STORMBENCH_VERSION "dev"
#endif

inline std::string version_string() { return std::string("stormbench ") + STORMBENCH_VERSION; }

/// Structured run record stored next to a command's outputs. Every write goes
/// through a temporary file and a rename so a crash never leaves a torn file.
class Manifest {
public:
    explicit Manifest(std::filesystem::path path) : path_(std::move(path)) {
        if (std::filesystem::exists(path_)) {
            std::ifstream in(path_);
            try {
                doc_ = Json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                throw FormatError(path_.string() + ": unreadable manifest: " + e.what());
            }
        } else {
            doc_ = Json::object();
        }
        doc_["build"] = version_string();
    }

    Json& doc() { return doc_; }
    const Json& doc() const { return doc_; }
    const std::filesystem::path& path() const { return path_; }
    bool has(const std::string& key) const { return doc_.contains(key); }

    void save() const {
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        const auto tmp = path_.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::trunc);
            if (!out) throw std::runtime_error("cannot write " + tmp);
            out << doc_.dump(2) << '\n';
        }
        std::filesystem::rename(tmp, path_);
    }

private:
    std::filesystem::path path_;
    Json doc_;
};

}  // namespace stormbench::cli
