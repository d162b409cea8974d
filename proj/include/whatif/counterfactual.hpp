#pragma once

#include "whatif/models.hpp"

#include <limits>
#include <map>

namespace whatif {

inline constexpr std::size_t kDefaultCounterfactuals = 20;
inline constexpr double kDefaultLambdaProximity = 0.5;
inline constexpr double kDefaultLambdaDiversity = 1.0;
inline constexpr double kDedupTolerance = 1e-9;

/// One requested outcome for a single target column.
struct TargetGoal {
    enum class Kind { Range, Point, PercentChange };

    std::size_t target = 0;  // index into the predictor's targets
    Kind kind = Kind::Range;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    double value = 0.0;  // point y*, or the reduction fraction for PercentChange

    static TargetGoal range(std::size_t t, double lo, double hi);
    static TargetGoal point(std::size_t t, double y);
    static TargetGoal percent_change(std::size_t t, double fraction);
};

struct TargetSpec {
    std::vector<TargetGoal> goals;
    // Relative band around a point target that counts as meeting it.
    double point_tolerance = 0.05;

    bool empty() const { return goals.empty(); }
    bool needs_baseline() const;
    /// Resolves percent-change goals to point targets y* = (1 - p) * f(x).
    TargetSpec resolved(std::span<const double> baseline_prediction) const;
    /// Mean over goals of the squared distance to the goal (0 inside a range).
    double loss(std::span<const double> prediction) const;
    bool satisfied(std::span<const double> prediction) const;
};

/// Mean of TargetSpec::loss over the given predictions.
double validity_loss(const std::vector<Vec>& predictions, const TargetSpec& spec);
/// Sum over features of |x_k - x'_k| / MAD_k.
double proximity_loss(std::span<const double> x, std::span<const double> x_prime, std::span<const double> mads);
/// det(K), K_ij = 1 / (1 + ||x'_i - x'_j||).
double diversity_score(const std::vector<Vec>& candidates);
Eigen::MatrixXd similarity_matrix(const std::vector<Vec>& candidates);

/// Per-feature constraint in raw units. Categorical values are level codes.
struct FeatureConstraint {
    std::optional<double> fixed;
    std::optional<double> min;
    std::optional<double> max;
};

struct FeatureConstraints {
    std::map<std::string, FeatureConstraint> by_name;
};

/// Search-space description of the preprocessed features (scaled space).
struct FeatureSpace {
    struct Feature {
        std::string name;
        bool categorical = false;
        std::size_t levels = 0;
        std::vector<std::string> level_names;
        bool integral = false;
        bool fixed_role = false;
        double mean = 0.0;
        double std = 1.0;
        double lo = 0.0;  // scaled training range
        double hi = 0.0;
        double mad = 1.0;
    };
    std::vector<Feature> features;

    static FeatureSpace from(const PreprocessedDataset& ds);
    std::size_t size() const { return features.size(); }
    Vec mads() const;
    double to_scaled(std::size_t k, double raw) const { return (raw - features[k].mean) / features[k].std; }
    double to_raw(std::size_t k, double scaled) const { return scaled * features[k].std + features[k].mean; }
};

struct GaParams {
    std::size_t population_factor = 10;
    int generations = 200;
    double crossover_rate = 0.7;
    double mutation_sigma = 0.1;
    std::size_t tournament_size = 2;
    int patience = 20;
    double improvement_tol = 1e-6;
};

struct Provenance {
    std::uint64_t seed = 0;
    // Logical worker: the run's position in the seed list. Stable for any
    // physical worker count.
    std::size_t worker = 0;
    int iteration = 0;
};

struct Candidate {
    Vec x;           // scaled feature space
    Vec prediction;  // predict(f, x)
    double validity = 0.0;
    double proximity = 0.0;
    // Share of K's volume owned by this candidate: 1 / (K^-1)_ii.
    double diversity_contribution = 0.0;
    Provenance provenance;
};

struct CandidateSet {
    std::vector<Candidate> candidates;
    double lambda1 = kDefaultLambdaProximity;
    double lambda2 = kDefaultLambdaDiversity;
    double diversity = 1.0;  // det(K)
    double total_loss = 0.0;
    bool infeasible = false;  // no candidate meets the target spec
    std::size_t requested = 0;
};

double total_loss(const CandidateSet& set, std::span<const double> x, const TargetSpec& spec,
                  std::span<const double> mads, double lambda1, double lambda2);

/// Everything one generation run needs. `baseline` is in scaled space.
struct GenerateRequest {
    const BoostedPredictor* predictor = nullptr;
    FeatureSpace space;
    Vec baseline;
    TargetSpec spec;
    FeatureConstraints constraints;
    std::size_t n = kDefaultCounterfactuals;
    double lambda1 = kDefaultLambdaProximity;
    double lambda2 = kDefaultLambdaDiversity;
    GaParams ga;
};

/// Search bounds after applying constraints; exposed for tests and reports.
struct ResolvedBounds {
    Vec lo;
    Vec hi;
    std::vector<bool> fixed;
    Vec anchor;  // baseline with fixed values applied
    std::vector<std::string> warnings;
};

ResolvedBounds resolve_bounds(const GenerateRequest& req);

CandidateSet generate(const GenerateRequest& req, std::uint64_t seed);
CandidateSet ensemble_generate(const GenerateRequest& req, std::span<const std::uint64_t> seeds,
                               std::size_t workers);

/// Candidates as CSV: features (raw units, schema order), targets, validity,
/// proximity, seed, worker, iteration.
std::string candidates_csv(const CandidateSet& set, const FeatureSpace& space,
                           const std::vector<std::string>& target_names);

/// Sort order used for emitted sets: validity, then proximity, then x.
void sort_candidates(std::vector<Candidate>& cs);

}  // namespace whatif
