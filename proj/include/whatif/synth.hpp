#pragma once

#include "whatif/dataset.hpp"

namespace whatif {

/// Bundled synthetic telemetry with known structure.
///
///   pm100-like   node_power = cpu_power + mem_power + N(0, 3)
///   fugaku-like  duration driven chiefly by idle_time
///   sc19-like    run_time with task_count dominant
struct SynthData {
    std::string csv;
    Json schema;
};

inline constexpr double kPm100NoiseSigma = 3.0;

std::vector<std::string> synth_names();
/// Throws ConfigError for an unknown name or n < 10.
SynthData synthesize(const std::string& name, std::size_t n, std::uint64_t seed);

}  // namespace whatif
