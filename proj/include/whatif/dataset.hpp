#pragma once

#include "whatif/common.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace whatif {

using Json = nlohmann::json;

enum class ColumnKind { Numeric, Categorical };
enum class ColumnRole { Feature, Target, Dropped, Fixed };

std::string to_string(ColumnKind k);
std::string to_string(ColumnRole r);

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    ColumnRole role = ColumnRole::Feature;
    std::string units;
    // Categorical level table; codes are indices into this list.
    std::vector<std::string> levels;
    // Numeric column whose observed values are all integers. Inferred at load
    // time; counterfactual search rounds such features in raw units.
    bool integral = false;

    bool is_feature() const { return role == ColumnRole::Feature || role == ColumnRole::Fixed; }
};

std::vector<ColumnSchema> schema_from_json(const Json& j);
Json schema_to_json(const std::vector<ColumnSchema>& cols);
std::vector<ColumnSchema> load_schema(const std::string& path);

/// Column-typed table. Categorical cells hold level codes; missing cells NaN.
struct Dataset {
    std::vector<ColumnSchema> columns;
    Eigen::MatrixXd values;  // rows x columns
    std::string source;
    std::string format;      // "csv" or "jsonl"

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
    std::optional<std::size_t> index_of(std::string_view name) const;
    std::vector<std::size_t> feature_indices() const;
    std::vector<std::size_t> target_indices() const;
};

/// Loads CSV (header row required) or JSON-lines, picked by extension
/// (.jsonl / .ndjson are JSON-lines, everything else CSV).
Dataset load_dataset(const std::string& path, const std::vector<ColumnSchema>& schema);
Dataset parse_csv(std::string_view text, const std::vector<ColumnSchema>& schema,
                  std::string source = "<memory>");
Dataset parse_jsonl(std::string_view text, const std::vector<ColumnSchema>& schema,
                    std::string source = "<memory>");

struct PreprocessConfig {
    double corr_threshold = 0.95;
    bool outlier_trim = false;
};

struct CovarianceRepair {
    enum class Kind { None, Jitter, Pca, L2 };
    Kind kind = Kind::None;
    double epsilon = 0.0;  // jitter
    int components = 0;    // pca
    double lambda = 0.0;   // l2
};

std::string to_string(CovarianceRepair::Kind k);

struct PreprocessReport {
    struct CorrelatedDrop {
        std::string kept;
        std::string dropped;
        double correlation = 0.0;
    };
    struct ScalerEntry {
        std::string column;
        double mean = 0.0;
        double std = 1.0;
    };

    std::vector<std::string> dropped_zero_variance;
    std::vector<CorrelatedDrop> dropped_correlated;
    std::size_t dropped_nan_rows = 0;
    std::size_t dropped_outlier_rows = 0;
    CovarianceRepair covariance_repair;
    std::vector<ScalerEntry> scaler;
    std::vector<std::pair<std::string, double>> mad;
    std::vector<std::string> mad_fallback;

    /// True when preprocessing removed nothing, repaired nothing and the
    /// scaler is the identity to 1e-9.
    bool changes_nothing() const;
    Json to_json() const;
};

/// Retained, cleaned data. Numeric features are standardized; categorical
/// features keep their codes; targets stay in raw units.
struct PreprocessedDataset {
    std::vector<ColumnSchema> features;
    std::vector<ColumnSchema> targets;
    Eigen::MatrixXd x;      // rows x features, scaled
    Eigen::MatrixXd x_raw;  // rows x features, raw units
    Eigen::MatrixXd y;      // rows x targets, raw units
    Vec feature_mean;       // identity (0, 1) for categorical features
    Vec feature_std;
    Vec mad;                // per feature, scaled space, after fallback
    Vec scaled_min;         // per-feature range of x
    Vec scaled_max;
    Eigen::MatrixXd covariance;  // repaired; reduced dimension after PCA repair
    PreprocessReport report;

    Eigen::Index rows() const { return x.rows(); }
    std::size_t num_features() const { return features.size(); }
    std::size_t num_targets() const { return targets.size(); }
    std::optional<std::size_t> feature_index(std::string_view name) const;
    std::optional<std::size_t> target_index(std::string_view name) const;

    Vec scale(std::span<const double> raw) const;
    Vec unscale(std::span<const double> scaled) const;
    double scale_value(std::size_t feature, double raw) const;
    double unscale_value(std::size_t feature, double scaled) const;

    /// Scaled features and raw targets as a plain Dataset (feeds preprocess again).
    Dataset as_dataset() const;
    /// Row subset, keeping fitted scaling.
    PreprocessedDataset subset(std::span<const std::size_t> rows) const;
};

std::pair<PreprocessedDataset, PreprocessReport> preprocess(const Dataset& ds,
                                                            const PreprocessConfig& cfg = {});

struct Split {
    PreprocessedDataset train;
    PreprocessedDataset test;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

Split train_test_split(const PreprocessedDataset& ds, double ratio, std::uint64_t seed);

double median(Vec values);
double mad(std::span<const double> values);
/// Linear-interpolated quantile, q in [0,1].
double quantile(Vec values, double q);

/// Row minimizing the summed Euclidean distance to all other rows.
std::size_t medoid_row(const Eigen::MatrixXd& x);

bool is_positive_definite(const Eigen::MatrixXd& m);

}  // namespace whatif
