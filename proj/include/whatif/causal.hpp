#pragma once

#include "whatif/dataset.hpp"

namespace whatif {

struct CausalEdge {
    std::string parent;
    std::string child;
    double weight = 0.0;      // standardized coefficient
    double raw_weight = 0.0;  // mapped back to raw units: weight * sd(child) / sd(parent)
};

struct CausalGraph {
    std::vector<std::string> nodes;
    std::vector<CausalEdge> edges;
    std::vector<std::string> order;  // topological order used while learning

    bool is_acyclic() const;
    std::optional<double> weight(std::string_view parent, std::string_view child) const;
    Json to_json() const;
    std::string to_dot() const;
};

struct CausalConfig {
    double ridge = 1e-6;
    double prune_threshold = 0.05;
    bool order_search = false;
};

/// Ordered ridge-regression structure learning. Columns [0, n_features) are
/// features, the rest targets; targets are sinks. Features are ordered so
/// that the ones explaining the first target best sit closest to it.
CausalGraph learn_dag(const Eigen::MatrixXd& data, const std::vector<std::string>& names, std::size_t n_features,
                      const CausalConfig& cfg = {});

struct ConsistencyReport {
    struct EdgePair {
        std::string parent;
        std::string child;
        double real = 0.0;
        double synth = 0.0;
    };
    double score = 0.0;
    std::vector<EdgePair> edges;  // union of both edge sets, absent = 0
    std::vector<std::string> only_real;
    std::vector<std::string> only_synth;

    Json to_json() const;
};

/// max(0, cosine) of the two graphs' standardized weight vectors aligned on
/// the union of edges. A zero vector on either side scores 0.
ConsistencyReport consistency_score(const CausalGraph& real, const CausalGraph& synth);

/// Direct parents of `target` by |weight| descending, ties by name.
std::vector<std::pair<std::string, double>> influence_summary(const CausalGraph& g, std::string_view target);

}  // namespace whatif
