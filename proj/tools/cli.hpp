#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

namespace nlx::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBudget = 3;

inline constexpr const char* kToolVersion = "0.3.0";

/// INI configuration addressed as "section.key". Values may be quoted and
/// may carry a trailing "; comment".
class Config {
public:
    static Config load(const std::filesystem::path& path);
    static Config parse(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

    void set(const std::string& key, const std::string& value);

    /// section/key/value lines in file order, used for the config hash.
    std::string canonical() const;
    const std::string& origin() const { return origin_; }
    const std::filesystem::path& base_dir() const { return base_dir_; }

private:
    boost::property_tree::ptree tree_;
    std::string origin_;
    std::filesystem::path base_dir_;
};

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

struct RunOptions {
    bool strict = false;
    bool via_doob_meyer = false;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::vector<std::string>> commands;  // overrides run.commands
};

struct RunOutcome {
    nlohmann::json report;
    bool pass = true;
    std::filesystem::path out_dir;
    std::map<std::string, double> metrics;
};

/// Runs every command listed in run.commands and writes report.json,
/// timing.json and the CSV tables into the output directory.
RunOutcome run(const Config& config, const RunOptions& options);

/// Repeats `run` with one config value replaced by each entry of `values`.
/// axis: N (tree.N), level (doobmeyer.levels) or grid (recover.grid_step).
/// Writes sweep.csv with one row per value and one column per metric.
std::vector<RunOutcome> sweep(const Config& config, const std::string& axis, const std::vector<std::string>& values,
                              const RunOptions& options);

/// Command-line entry point; returns the process exit code.
int main(int argc, char** argv);

}  // namespace nlx::cli
