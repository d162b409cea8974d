#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace whatif {

using Vec = std::vector<double>;

/// Base for every error the library raises. `stage()` names the pipeline
/// stage that failed when known, empty otherwise.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, std::string stage = {})
        : std::runtime_error(what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }
    void set_stage(std::string s) { stage_ = std::move(s); }

private:
    std::string stage_;
};

/// Malformed input data (files, cells, schemas).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration, query or parameter value. `field` is a dotted path
/// to the offending field when one applies.
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::string field = {})
        : Error(what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Shortest representation that round-trips through strtod.
std::string format_number(double v);

/// Human formatting with up to `sig` significant digits ("%.*g").
std::string format_short(double v, int sig = 6);

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// SplitMix64 step, used to derive independent sub-seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index);

}  // namespace whatif
