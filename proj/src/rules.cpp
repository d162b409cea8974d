#include "whatif/rules.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace whatif {

namespace {

std::vector<std::string> column_names(const PreprocessedDataset& ds) {
    std::vector<std::string> out;
    for (const auto& f : ds.features) out.push_back(f.name);
    for (const auto& t : ds.targets) out.push_back(t.name);
    return out;
}

Vec sample_row(const PreprocessedDataset& ds, Eigen::Index r) {
    Vec v;
    for (Eigen::Index c = 0; c < ds.x_raw.cols(); ++c) v.push_back(ds.x_raw(r, c));
    for (Eigen::Index c = 0; c < ds.y.cols(); ++c) v.push_back(ds.y(r, c));
    return v;
}

Vec target_row(const PreprocessedDataset& ds, Eigen::Index r) {
    Vec v;
    for (Eigen::Index c = 0; c < ds.y.cols(); ++c) v.push_back(ds.y(r, c));
    return v;
}

}  // namespace

Json RuleSet::to_json() const {
    Json rs = Json::array();
    for (const auto& r : rules)
        rs.push_back({{"name", r.name},
                      {"expression", r.expression},
                      {"canonical", dsl::print(*r.bound.rule().root)},
                      {"coverage", r.coverage},
                      {"explanation", r.explanation}});
    Json rej = Json::array();
    for (const auto& r : rejected_invalid)
        rej.push_back({{"name", r.name}, {"expression", r.expression}, {"reason", r.reason}, {"coverage", r.coverage}});
    Json out = {{"provider", provider}, {"fallback", fallback}, {"rules", rs}, {"rejected", rej}};
    if (fallback) out["fallback_reason"] = fallback_reason;
    return out;
}

RuleSet validate_rules(const std::vector<CandidateRule>& candidates, const SampleTable& reference,
                       double min_coverage) {
    RuleSet set;
    for (const auto& c : candidates) {
        RejectedRule rej{c.name, c.expression, "", 0.0};
        std::optional<dsl::BoundRule> bound;
        try {
            bound.emplace(dsl::parse(c.expression), reference.columns);
        } catch (const Error& e) {
            rej.reason = e.what();
            set.rejected_invalid.push_back(std::move(rej));
            continue;
        }
        std::size_t hits = 0;
        for (const auto& row : reference.rows)
            if (bound->eval(row)) ++hits;
        const double coverage =
            reference.rows.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(reference.rows.size());
        if (coverage < min_coverage) {
            rej.reason = "coverage " + format_short(coverage, 4) + " below " + format_short(min_coverage, 4);
            rej.coverage = coverage;
            set.rejected_invalid.push_back(std::move(rej));
            continue;
        }
        set.rules.push_back({c.name, c.expression, std::move(*bound), coverage, c.explanation});
    }
    return set;
}

ComplianceResult compliance_score(std::span<const double> sample, const RuleSet& rules, double threshold,
                                  std::size_t index) {
    ComplianceResult r;
    r.sample = index;
    if (rules.rules.empty()) {
        r.score = 1.0;
        r.accepted = true;
        return r;
    }
    for (const auto& rule : rules.rules)
        if (rule.bound.eval(sample)) r.satisfied.push_back(rule.name);
    r.score = static_cast<double>(r.satisfied.size()) / static_cast<double>(rules.rules.size());
    r.accepted = r.score >= threshold;
    return r;
}

SampleTable training_samples(const PreprocessedDataset& train) {
    SampleTable t;
    t.columns = column_names(train);
    for (Eigen::Index r = 0; r < train.rows(); ++r) t.rows.push_back(sample_row(train, r));
    return t;
}

SampleTable reference_samples(const PreprocessedDataset& train, const TargetSpec& spec) {
    SampleTable t;
    t.columns = column_names(train);
    for (Eigen::Index r = 0; r < train.rows(); ++r)
        if (spec.satisfied(target_row(train, r))) t.rows.push_back(sample_row(train, r));
    return t;
}

std::vector<CandidateRule> extract_rules_statistical(const PreprocessedDataset& train, const TargetSpec& spec) {
    const SampleTable ref = reference_samples(train, spec);
    std::vector<CandidateRule> out;
    if (ref.empty()) return out;
    const double n = static_cast<double>(ref.rows.size());

    std::vector<std::size_t> numeric;
    for (std::size_t k = 0; k < train.num_features(); ++k)
        if (train.features[k].kind == ColumnKind::Numeric) numeric.push_back(k);

    for (auto k : numeric) {
        Vec col;
        for (const auto& row : ref.rows) col.push_back(row[k]);
        const double lo = quantile(col, 0.025), hi = quantile(col, 0.975);
        const auto& name = train.features[k].name;
        const auto inside = static_cast<double>(
            std::count_if(col.begin(), col.end(), [&](double v) { return v >= lo && v <= hi; }));
        out.push_back({"range_" + name,
                       name + " >= " + format_number(lo) + " and " + name + " <= " + format_number(hi),
                       inside / n,
                       name + " stays within the central 95% of rows that meet the target"});
    }
    for (auto a : numeric) {
        for (auto b : numeric) {
            if (a == b) continue;
            const auto holds = static_cast<double>(
                std::count_if(ref.rows.begin(), ref.rows.end(), [&](const Vec& row) { return row[a] <= row[b]; }));
            if (holds / n < 0.95) continue;
            const auto& an = train.features[a].name;
            const auto& bn = train.features[b].name;
            out.push_back({"order_" + an + "_le_" + bn, an + " <= " + bn, holds / n,
                           an + " does not exceed " + bn + " in rows that meet the target"});
        }
    }
    return out;
}

std::string build_rule_prompt(const PreprocessedDataset& train, const SampleTable& exemplars) {
    std::ostringstream os;
    os << "Dataset columns:\n";
    auto describe = [&](const ColumnSchema& c, const Eigen::VectorXd& v) {
        os << "- " << c.name << " (" << to_string(c.kind) << ", " << to_string(c.role);
        if (!c.units.empty()) os << ", units " << c.units;
        os << ")";
        if (c.kind == ColumnKind::Categorical) {
            os << " integer codes:";
            for (std::size_t i = 0; i < c.levels.size(); ++i) os << ' ' << i << '=' << c.levels[i];
        }
        const Vec col(v.data(), v.data() + v.size());
        const double mean = v.mean();
        const double sd = std::sqrt((v.array() - mean).square().mean());
        os << " min=" << format_short(v.minCoeff()) << " max=" << format_short(v.maxCoeff())
           << " mean=" << format_short(mean) << " std=" << format_short(sd)
           << " q25=" << format_short(quantile(col, 0.25)) << " q50=" << format_short(quantile(col, 0.5))
           << " q75=" << format_short(quantile(col, 0.75)) << '\n';
    };
    for (std::size_t k = 0; k < train.num_features(); ++k) describe(train.features[k], train.x_raw.col(static_cast<Eigen::Index>(k)));
    for (std::size_t t = 0; t < train.num_targets(); ++t) describe(train.targets[t], train.y.col(static_cast<Eigen::Index>(t)));

    os << "\nSample rows that meet the performance target:\n";
    for (std::size_t i = 0; i < exemplars.columns.size(); ++i) os << (i ? "," : "") << exemplars.columns[i];
    os << '\n';
    const std::size_t shown = std::min(exemplars.rows.size(), kMaxPromptExemplars);
    for (std::size_t r = 0; r < shown; ++r) {
        for (std::size_t i = 0; i < exemplars.rows[r].size(); ++i)
            os << (i ? "," : "") << format_short(exemplars.rows[r][i]);
        os << '\n';
    }
    os << "\nPropose validity rules that configurations meeting the target should follow. "
          "Reply with a JSON array only. Each element is an object with keys "
          "\"name\" (identifier), \"expression\" (boolean condition using column names, numbers, "
          "+ - * / ( ), comparisons < <= > >= == != and the words and/or/not), "
          "\"coverage\" (fraction of the sample rows that follow the rule) and "
          "\"explanation\" (one sentence).\n";
    return os.str();
}

std::vector<CandidateRule> parse_rule_reply(const std::string& reply) {
    const auto open = reply.find('[');
    const auto close = reply.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw ProviderError("provider reply contains no JSON array");
    Json arr;
    try {
        arr = Json::parse(reply.substr(open, close - open + 1));
    } catch (const Json::exception& e) {
        throw ProviderError(std::string("provider reply is not valid JSON: ") + e.what());
    }
    std::vector<CandidateRule> out;
    for (const auto& item : arr) {
        if (!item.is_object() || !item.contains("expression") || !item["expression"].is_string())
            throw ProviderError("provider rule entry lacks an expression");
        CandidateRule r;
        r.name = item.value("name", "rule_" + std::to_string(out.size()));
        r.expression = item["expression"].get<std::string>();
        if (item.contains("coverage") && item["coverage"].is_number()) r.claimed_coverage = item["coverage"].get<double>();
        r.explanation = item.value("explanation", "");
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<CandidateRule> extract_rules_llm(LlmClient& client, const PreprocessedDataset& train,
                                             const SampleTable& exemplars) {
    static const std::string kSystem =
        "You are a performance-engineering assistant that extracts data-grounded validity rules "
        "from tabular job telemetry.";
    return parse_rule_reply(client.complete(kSystem, build_rule_prompt(train, exemplars)));
}

RuleSet extract_and_validate(const PreprocessedDataset& train, const TargetSpec& spec, LlmClient* client,
                             double min_coverage) {
    const SampleTable ref = reference_samples(train, spec);
    if (client != nullptr && client->config().enabled()) {
        try {
            RuleSet set = validate_rules(extract_rules_llm(*client, train, ref), ref, min_coverage);
            set.provider = "llm:" + client->config().model;
            return set;
        } catch (const ProviderError& e) {
            RuleSet set = validate_rules(extract_rules_statistical(train, spec), ref, min_coverage);
            set.fallback = true;
            set.fallback_reason = e.what();
            return set;
        }
    }
    return validate_rules(extract_rules_statistical(train, spec), ref, min_coverage);
}

}  // namespace whatif
