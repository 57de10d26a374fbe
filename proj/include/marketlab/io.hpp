#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "marketlab/sde.hpp"

namespace marketlab {

/// 17 significant digits: enough to round-trip any double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& file, const std::vector<std::string>& columns)
        : out_(file) {
        if (!out_) throw std::runtime_error("CsvWriter: cannot open " + file.string());
        for (std::size_t i = 0; i < columns.size(); ++i)
            out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
    }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i)
            out_ << (i ? "," : "") << format_double(values[i]);
        out_ << "\n";
    }

    void raw_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

inline void write_text(const std::filesystem::path& file, const std::string& content) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("write_text: cannot open " + file.string());
    out << content;
}

inline void write_json(const std::filesystem::path& file, const nlohmann::json& j) {
    write_text(file, j.dump(2) + "\n");
}

/// Paths CSV with one row per (path, grid point, component).
inline void write_paths_csv(const std::filesystem::path& file,
                            const std::vector<MarketPath>& paths) {
    CsvWriter csv(file, {"path_id", "t", "component", "y", "tau", "theta", "b_hat",
                         "log_lambda", "s0_hat"});
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const auto& path = paths[p];
        for (std::size_t k = 0; k < path.grid_size(); ++k) {
            for (int j = 0; j < path.n(); ++j) {
                const auto ju = static_cast<std::size_t>(j);
                csv.row({static_cast<double>(p), path.times[k], static_cast<double>(j),
                         path.y[ju][k], path.tau[ju][k], path.theta[ju][k], path.b_hat[ju][k],
                         path.log_lambda[k], path.s0_hat[k]});
            }
        }
    }
}

/// Tracks emitted files and finalizes a manifest. The manifest is the only
/// artifact carrying a timestamp; all data files are deterministic functions
/// of (config, seed).
class ArtifactSink {
public:
    explicit ArtifactSink(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const { return dir_; }

    std::filesystem::path path_for(const std::string& name) {
        files_.push_back(name);
        return dir_ / name;
    }

    void write_manifest(const nlohmann::json& config, std::uint64_t seed,
                        const std::string& version, bool with_timestamp = true) {
        nlohmann::json files = nlohmann::json::array();
        for (const auto& name : files_) {
            const auto p = dir_ / name;
            files.push_back({{"name", name},
                            {"bytes", std::filesystem::exists(p)
                                          ? static_cast<std::int64_t>(std::filesystem::file_size(p))
                                          : -1}});
        }
        nlohmann::json manifest{{"config", config},
                                {"config_hash", hex64(fnv1a64(config.dump()))},
                                {"seed", seed},
                                {"version", version},
                                {"files", files}};
        if (with_timestamp) {
            manifest["timestamp"] = static_cast<std::int64_t>(std::time(nullptr));
        }
        write_json(dir_ / "manifest.json", manifest);
    }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

} // namespace marketlab
