#pragma once

#include "whatif/dataset.hpp"

#include <random>

namespace whatif {

struct TreeNode {
    int feature = -1;        // -1 marks a leaf
    double threshold = 0.0;  // go left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    double value = 0.0;      // leaf mean response

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct TreeParams {
    int max_depth = 4;
    std::size_t min_samples_leaf = 1;
    // Features drawn per split; 0 means all of them.
    std::size_t max_features = 0;
};

/// CART regression tree: exact greedy splits over sorted unique values,
/// variance-reduction criterion. Ties go to the lowest feature index, then
/// the lowest threshold.
class RegressionTree {
public:
    RegressionTree() = default;
    RegressionTree(std::vector<TreeNode> nodes, int max_depth);

    static RegressionTree leaf(double value);
    static RegressionTree fit(const Eigen::MatrixXd& x, std::span<const double> y,
                              std::span<const std::size_t> rows, const TreeParams& params,
                              std::mt19937_64* rng = nullptr);

    double predict(std::span<const double> x) const;
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    int max_depth() const { return max_depth_; }
    int depth() const;

    Json to_json() const;
    static RegressionTree from_json(const Json& j);

    bool operator==(const RegressionTree&) const = default;

private:
    std::vector<TreeNode> nodes_;
    int max_depth_ = 0;
};

struct BoostParams {
    int n_rounds = 200;
    int max_depth = 4;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
};

/// The frozen predictor f. Immutable once constructed: every accessor is
/// const and no operation mutates it.
class BoostedPredictor {
public:
    BoostedPredictor(std::vector<std::string> features, std::vector<std::string> targets, BoostParams params,
                     Vec base_score, std::vector<std::vector<RegressionTree>> trees,
                     std::vector<Vec> train_mse, std::string schema_hash);

    Vec predict(std::span<const double> x) const;
    double predict_target(std::size_t target, std::span<const double> x) const;

    std::size_t num_features() const { return features_.size(); }
    std::size_t num_targets() const { return targets_.size(); }
    const std::vector<std::string>& feature_names() const { return features_; }
    const std::vector<std::string>& target_names() const { return targets_; }
    const BoostParams& params() const { return params_; }
    const Vec& base_score() const { return base_score_; }
    const std::vector<std::vector<RegressionTree>>& trees() const { return trees_; }
    /// Training MSE after each round, per target (index 0 = base score only).
    const std::vector<Vec>& train_mse() const { return train_mse_; }
    bool frozen() const { return true; }

    Json to_json() const;
    static BoostedPredictor from_json(const Json& j);
    /// SHA-256 of the serialized document.
    const std::string& hash() const { return hash_; }

private:
    std::vector<std::string> features_;
    std::vector<std::string> targets_;
    BoostParams params_;
    Vec base_score_;
    std::vector<std::vector<RegressionTree>> trees_;
    std::vector<Vec> train_mse_;
    std::string schema_hash_;
    std::string hash_;
};

BoostedPredictor fit_boosted(const PreprocessedDataset& train, const BoostParams& params = {});

struct ForestParams {
    int n_trees = 100;
    int max_depth = 10;
    std::size_t min_samples_leaf = 3;
    std::size_t max_features = 0;
    std::uint64_t seed = 0;
};

struct UqEstimate {
    double mean = 0.0;
    double std = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

inline constexpr double kIntervalZ = 1.96;

/// Bagged forest used only for uncertainty quantification.
class UncertaintyForest {
public:
    UncertaintyForest() = default;
    /// trees[target][i]; every target must hold the same number of trees.
    explicit UncertaintyForest(std::vector<std::vector<RegressionTree>> trees);

    std::size_t n_trees() const { return trees_.empty() ? 0 : trees_.front().size(); }
    std::size_t num_targets() const { return trees_.size(); }
    const std::vector<std::vector<RegressionTree>>& trees() const { return trees_; }

    Vec tree_predictions(std::size_t target, std::span<const double> x) const;
    std::vector<UqEstimate> predict_with_uncertainty(std::span<const double> x) const;

    Json to_json() const;
    std::string hash() const;

private:
    std::vector<std::vector<RegressionTree>> trees_;
};

UncertaintyForest fit_forest(const PreprocessedDataset& train, const ForestParams& params = {});

}  // namespace whatif
