#pragma once

#include "whatif/counterfactual.hpp"

namespace whatif {

inline constexpr double kDefaultAnomalyThreshold = 0.6;
inline constexpr double kEulerGamma = 0.5772156649;

/// Average unsuccessful-search path length in a BST of m points:
/// c(m) = 2 H(m-1) - 2 (m-1) / m with H(i) = ln(i) + gamma; c(m <= 1) = 0.
double average_path_length(double m);

struct IsolationNode {
    int feature = -1;  // -1 marks an external node
    double split = 0.0;
    int left = -1;
    int right = -1;
    std::size_t size = 0;  // training points reaching an external node
};

class IsolationTree {
public:
    explicit IsolationTree(std::vector<IsolationNode> nodes) : nodes_(std::move(nodes)) {}
    /// Edges traversed plus c(size) at the external node.
    double path_length(std::span<const double> x) const;
    const std::vector<IsolationNode>& nodes() const { return nodes_; }

private:
    std::vector<IsolationNode> nodes_;
};

struct IForestParams {
    int n_trees = 100;
    std::size_t subsample = 256;
    std::uint64_t seed = 0;
};

class IsolationForest {
public:
    IsolationForest(std::vector<IsolationTree> trees, std::size_t psi, std::size_t dims);

    double mean_path_length(std::span<const double> x) const;
    /// s(x) = 2^(-E[h(x)] / c(psi)).
    double anomaly_score(std::span<const double> x) const;
    std::size_t psi() const { return psi_; }
    int height_limit() const;
    const std::vector<IsolationTree>& trees() const { return trees_; }

private:
    std::vector<IsolationTree> trees_;
    std::size_t psi_;
    std::size_t dims_;
};

/// psi is clamped to the number of rows.
IsolationForest fit_iforest(const Eigen::MatrixXd& train, const IForestParams& params = {});

struct CandidatePlausibility {
    double anomaly_score = 0.0;
    bool is_outlier = false;
    std::vector<UqEstimate> uq;          // per target
    Vec relative_interval_width;         // (upper - lower) / max(|mean|, 1e-9)
    Vec relative_deviation;              // |forest mean - f(x')| / max(|f(x')|, 1e-9)
};

struct PlausibilityReport {
    std::vector<CandidatePlausibility> candidates;
    double outlier_fraction = 0.0;
    double threshold = kDefaultAnomalyThreshold;

    Json to_json() const;
};

PlausibilityReport plausibility(const CandidateSet& set, const IsolationForest& forest,
                                const UncertaintyForest& uq_forest, double s_threshold = kDefaultAnomalyThreshold);

/// Top-2 principal components of the training features.
struct Projection {
    Eigen::RowVectorXd mean;
    Eigen::MatrixXd components;  // d x 2
    Eigen::MatrixXd train;       // n x 2
    Eigen::MatrixXd candidates;  // m x 2

    static Projection fit(const Eigen::MatrixXd& train);
    Eigen::MatrixXd project(const Eigen::MatrixXd& x) const;
    /// set,index,pc1,pc2,outlier
    std::string to_csv(const std::vector<bool>& candidate_outliers) const;
};

}  // namespace whatif
