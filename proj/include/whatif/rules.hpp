#pragma once

#include "whatif/counterfactual.hpp"
#include "whatif/provider.hpp"
#include "whatif/rule_dsl.hpp"

namespace whatif {

inline constexpr double kDefaultComplianceThreshold = 0.5;
inline constexpr double kDefaultMinCoverage = 0.5;
inline constexpr std::size_t kMaxPromptExemplars = 10;

/// Rows of raw feature and target values under named columns.
struct SampleTable {
    std::vector<std::string> columns;
    std::vector<Vec> rows;

    bool empty() const { return rows.empty(); }
};

/// Untrusted rule as proposed by an extractor.
struct CandidateRule {
    std::string name;
    std::string expression;
    double claimed_coverage = 0.0;
    std::string explanation;
};

struct Rule {
    std::string name;
    std::string expression;
    dsl::BoundRule bound;
    double coverage = 0.0;  // recomputed on the reference set
    std::string explanation;
};

struct RejectedRule {
    std::string name;
    std::string expression;
    std::string reason;
    double coverage = 0.0;
};

struct RuleSet {
    std::vector<Rule> rules;
    std::vector<RejectedRule> rejected_invalid;
    std::string provider = "statistical";  // "statistical" or "llm:<model>"
    bool fallback = false;                 // LLM requested but statistical rules used
    std::string fallback_reason;

    Json to_json() const;
};

struct ComplianceResult {
    std::size_t sample = 0;
    std::vector<std::string> satisfied;
    double score = 1.0;
    bool accepted = true;
};

/// Drops unparseable rules, rules naming unknown columns and rules whose
/// recomputed coverage on `reference` falls below `min_coverage`.
RuleSet validate_rules(const std::vector<CandidateRule>& candidates, const SampleTable& reference,
                       double min_coverage = kDefaultMinCoverage);

/// Fraction of rules satisfied. An empty rule set scores 1.0.
ComplianceResult compliance_score(std::span<const double> sample, const RuleSet& rules,
                                  double threshold = kDefaultComplianceThreshold, std::size_t index = 0);

/// Training rows (raw features + targets) whose targets satisfy the TargetSpec.
SampleTable reference_samples(const PreprocessedDataset& train, const TargetSpec& spec);
SampleTable training_samples(const PreprocessedDataset& train);

/// Box rules from the [2.5%, 97.5%] quantiles of target-satisfying rows, plus
/// "a <= b" rules that hold on at least 95% of them.
std::vector<CandidateRule> extract_rules_statistical(const PreprocessedDataset& train, const TargetSpec& spec);

std::string build_rule_prompt(const PreprocessedDataset& train, const SampleTable& exemplars);
/// Parses the provider's reply: the first JSON array of
/// {name, expression, coverage, explanation} objects found in the text.
std::vector<CandidateRule> parse_rule_reply(const std::string& reply);
std::vector<CandidateRule> extract_rules_llm(LlmClient& client, const PreprocessedDataset& train,
                                             const SampleTable& exemplars);

/// Provider-or-fallback extraction followed by validation against the
/// target-satisfying training rows.
RuleSet extract_and_validate(const PreprocessedDataset& train, const TargetSpec& spec, LlmClient* client,
                             double min_coverage = kDefaultMinCoverage);

}  // namespace whatif
