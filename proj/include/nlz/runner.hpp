#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace nlz {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

const std::vector<std::string>& experiment_kinds();

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string render() const;
};

// 17 significant digits, '.' decimal separator.
std::string format_number(double x);

struct RunConfig {
    std::string kind;
    Json config;  // validated, with every default filled in
    std::string out_dir;
    int threads = 1;
};

// Resolution order for the output directory: explicit argument, NLZ_OUT_DIR, config "output_dir", "nlz_out".
RunConfig make_run_config(const std::string& kind, const Json& raw, const std::string& out_override = "",
                          int threads = 1);

struct ExperimentOutput {
    CsvTable table;
    std::vector<std::pair<std::string, CsvTable>> extra;  // file name, table
    Json diagnostics = Json::object();
};

// Runs one experiment in memory; nothing is written.
ExperimentOutput execute(const std::string& kind, const Json& config, int threads = 1);

struct RunOutcome {
    int exit_code = 0;
    Json manifest;
};

// Executes the experiment and writes <kind>.csv, extra files and manifest.json with atomic renames.
// Errors are caught and mapped to exit codes 2 (config), 3 (numeric), 4 (I/O).
RunOutcome run(const RunConfig& cfg);

RunOutcome run_from_file(const std::string& kind, const std::string& config_path, const std::string& out_override,
                         int threads);

std::string sha256_file(const std::string& path);

}  // namespace nlz
