#pragma once

#include "whatif/pipeline.hpp"

#include <iosfwd>

namespace whatif {

/// Batch run description, usually loaded from config.json. Relative paths
/// resolve against the config file's directory.
struct CliConfig {
    std::string dataset;
    std::string schema;
    Json query;
    std::string query_dir;  // base for paths inside the query
    std::string out = "whatif-out";
    std::optional<std::vector<std::uint64_t>> seeds;
    std::optional<std::size_t> workers;
    ProviderConfig provider;

    static CliConfig load(const std::string& path);
};

/// Prints a report's top-K table and explanations.
void print_summary(const Json& report, std::ostream& out);

/// Entry point of the whatif executable. Exit codes for run: 0 success,
/// 2 infeasible report, 1 error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace whatif
