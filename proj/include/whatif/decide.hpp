#pragma once

#include "whatif/causal.hpp"
#include "whatif/counterfactual.hpp"
#include "whatif/provider.hpp"

namespace whatif {

inline constexpr std::size_t kDefaultTopK = 5;

/// Composite score weights. normalized() rescales them to sum to one.
struct TradeoffWeights {
    double validity = 0.3;
    double proximity = 0.2;
    double uncertainty = 0.2;
    double causal = 0.15;
    double plausibility = 0.15;

    TradeoffWeights normalized() const;
    Json to_json() const;
    static TradeoffWeights from_json(const Json& j);
};

/// Per-candidate inputs that do not live on the Candidate itself.
struct CandidateDiagnostics {
    double anomaly_score = 0.0;
    double interval_width = 0.0;  // mean relative interval width over targets
};

/// "Goodness" terms in [0, 1]: 1 - v, 1 - p, 1 - u (min-max normalized over
/// the scored set), the set's causal consistency, and 1 - s.
struct ScoreComponents {
    double validity = 0.0;
    double proximity = 0.0;
    double uncertainty = 0.0;
    double causal = 0.0;
    double plausibility = 0.0;

    Json to_json() const;
};

struct RankedCandidate {
    std::size_t index = 0;  // position in the scored set
    Candidate candidate;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based
    ScoreComponents components;
    CandidateDiagnostics diagnostics;
    std::string explanation;
    bool explanation_fallback = false;
};

/// Min-max normalization to [0, 1]. A constant column maps to zeros.
Vec minmax_normalize(const Vec& v);

std::vector<ScoreComponents> score_components(const std::vector<Candidate>& set,
                                              const std::vector<CandidateDiagnostics>& diag, double consistency);
double tradeoff_score(const ScoreComponents& c, const TradeoffWeights& w);

/// Scores by descending trade-off score; ties go to lower proximity, then
/// lower validity, then earlier position. Returns min(k, |set|) entries.
std::vector<RankedCandidate> rank_topk(const std::vector<Candidate>& set,
                                       const std::vector<CandidateDiagnostics>& diag, double consistency,
                                       const TradeoffWeights& w = {}, std::size_t k = kDefaultTopK);

struct ExplainContext {
    const FeatureSpace* space = nullptr;
    std::vector<std::string> target_names;
    Vec baseline;             // scaled
    Vec baseline_prediction;  // f(baseline)
    const CausalGraph* graph = nullptr;
};

/// Deterministic template text: what changed, predicted impact, mechanism.
std::string explain_template(const Candidate& c, const ExplainContext& ctx);

struct Explanation {
    std::string text;
    std::string template_text;
    bool fallback = false;  // a provider was configured but failed
};

/// Template text, optionally rewritten by the provider.
Explanation explain(const Candidate& c, const ExplainContext& ctx, LlmClient* client = nullptr);

/// Per-candidate component values for the radar chart.
Json radar_json(const std::vector<RankedCandidate>& ranked);

}  // namespace whatif
