#pragma once

#include "whatif/synth.hpp"

#include <filesystem>
#include <random>

namespace whatif::test {

inline Dataset synth_dataset(const std::string& name, std::size_t n, std::uint64_t seed) {
    const auto data = synthesize(name, n, seed);
    return parse_csv(data.csv, schema_from_json(data.schema), name);
}

inline std::vector<ColumnSchema> numeric_schema(const std::vector<std::string>& features,
                                                const std::vector<std::string>& targets) {
    std::vector<ColumnSchema> out;
    for (const auto& f : features) out.push_back({f, ColumnKind::Numeric, ColumnRole::Feature, "", {}, false});
    for (const auto& t : targets) out.push_back({t, ColumnKind::Numeric, ColumnRole::Target, "", {}, false});
    return out;
}

inline Dataset matrix_dataset(const Eigen::MatrixXd& values, const std::vector<std::string>& features,
                              const std::vector<std::string>& targets) {
    Dataset ds;
    ds.columns = numeric_schema(features, targets);
    ds.values = values;
    ds.source = "<matrix>";
    ds.format = "csv";
    return ds;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("whatif-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace whatif::test
