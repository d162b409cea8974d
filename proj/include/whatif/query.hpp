#pragma once

#include "whatif/causal.hpp"
#include "whatif/decide.hpp"
#include "whatif/evaluate.hpp"
#include "whatif/rules.hpp"

#include <map>

namespace whatif {

enum class QueryKind { Recommend, WhatIf, Optimize };

std::string to_string(QueryKind k);

/// A numeric interval or a single value parsed from the range syntax:
/// "< v", "> v", "<= v", ">= v", "a - b" (a, b may be min / max), "= v" or a
/// bare value. Trailing unit letters after a number are ignored.
struct RangeExpr {
    std::optional<double> lower;
    std::optional<double> upper;
    std::optional<double> equals;
    std::optional<std::string> level;  // non-numeric "= completed" or "completed"

    static RangeExpr parse(std::string_view text);
    static RangeExpr from_json(const Json& j, const std::string& field);
    Json to_json() const;
};

struct TargetClause {
    std::string name;
    RangeExpr range;
    std::optional<double> reduction;  // fraction, PercentChange goal
};

struct ConstraintClause {
    std::string name;
    RangeExpr range;
};

struct QueryParams {
    std::size_t n = kDefaultCounterfactuals;
    std::size_t k = kDefaultTopK;
    double lambda1 = kDefaultLambdaProximity;
    double lambda2 = kDefaultLambdaDiversity;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4};
    std::size_t workers = 1;
    TradeoffWeights weights;
    double compliance_threshold = kDefaultComplianceThreshold;
    double anomaly_threshold = kDefaultAnomalyThreshold;
    double min_coverage = kDefaultMinCoverage;
    bool reject_outliers = false;
    double split_ratio = 0.8;
    std::uint64_t split_seed = 0;
    double point_tolerance = 0.05;
    PreprocessConfig preprocess;
    BoostParams boost;
    ForestParams forest;
    IForestParams iforest;
    CausalConfig causal;
    GaParams ga;

    /// Parameters that affect preprocessing and model fitting; the cache key.
    Json model_key() const;
    Json to_json() const;
};

struct Query {
    QueryKind kind = QueryKind::Recommend;
    std::string dataset;           // registry id or file path
    std::optional<Json> baseline;  // object of raw values, {"row": i}, or a path
    std::vector<TargetClause> targets;
    std::vector<ConstraintClause> constraints;
    std::vector<std::string> metrics;
    std::optional<double> reduction;
    QueryParams params;

    Json to_json() const;
};

/// Validates field names and shapes. Keys are matched case-insensitively;
/// "Target" is an alias of "Targets". Relative baseline paths resolve against
/// `base_dir`.
Query parse_query(const Json& doc, const std::string& base_dir = {});
Query parse_query(std::string_view text, const std::string& base_dir = {});

}  // namespace whatif
