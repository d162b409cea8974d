#include "whatif/decide.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace whatif {

TradeoffWeights TradeoffWeights::normalized() const {
    const double ws[] = {validity, proximity, uncertainty, causal, plausibility};
    double sum = 0.0;
    for (double w : ws) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("trade-off weights must be non-negative", "weights");
        sum += w;
    }
    if (sum <= 0.0) throw ConfigError("trade-off weights sum to zero", "weights");
    return {validity / sum, proximity / sum, uncertainty / sum, causal / sum, plausibility / sum};
}

Json TradeoffWeights::to_json() const {
    return {{"validity", validity},
            {"proximity", proximity},
            {"uncertainty", uncertainty},
            {"causal", causal},
            {"plausibility", plausibility}};
}

TradeoffWeights TradeoffWeights::from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("weights must be an object", "weights");
    TradeoffWeights w;
    for (const auto& [key, value] : j.items()) {
        if (!value.is_number()) throw ConfigError("weight must be a number", "weights." + key);
        const double v = value.get<double>();
        if (key == "validity") w.validity = v;
        else if (key == "proximity") w.proximity = v;
        else if (key == "uncertainty") w.uncertainty = v;
        else if (key == "causal") w.causal = v;
        else if (key == "plausibility") w.plausibility = v;
        else throw ConfigError("unknown weight '" + key + "'", "weights." + key);
    }
    return w;
}

Json ScoreComponents::to_json() const {
    return {{"validity", validity},
            {"proximity", proximity},
            {"uncertainty", uncertainty},
            {"causal", causal},
            {"plausibility", plausibility}};
}

Vec minmax_normalize(const Vec& v) {
    Vec out(v.size(), 0.0);
    if (v.empty()) return out;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double span = *hi - *lo;
    if (!(span > 0.0)) return out;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp((v[i] - *lo) / span, 0.0, 1.0);
    return out;
}

std::vector<ScoreComponents> score_components(const std::vector<Candidate>& set,
                                              const std::vector<CandidateDiagnostics>& diag, double consistency) {
    if (set.empty()) throw ConfigError("no surviving candidates to score");
    if (diag.size() != set.size()) throw ConfigError("diagnostics do not match candidates");
    Vec v, p, u;
    for (std::size_t i = 0; i < set.size(); ++i) {
        v.push_back(set[i].validity);
        p.push_back(set[i].proximity);
        u.push_back(diag[i].interval_width);
    }
    const Vec vn = minmax_normalize(v), pn = minmax_normalize(p), un = minmax_normalize(u);
    std::vector<ScoreComponents> out;
    for (std::size_t i = 0; i < set.size(); ++i)
        out.push_back({1.0 - vn[i], 1.0 - pn[i], 1.0 - un[i], std::clamp(consistency, 0.0, 1.0),
                       1.0 - std::clamp(diag[i].anomaly_score, 0.0, 1.0)});
    return out;
}

double tradeoff_score(const ScoreComponents& c, const TradeoffWeights& weights) {
    const TradeoffWeights w = weights.normalized();
    return w.validity * c.validity + w.proximity * c.proximity + w.uncertainty * c.uncertainty +
           w.causal * c.causal + w.plausibility * c.plausibility;
}

std::vector<RankedCandidate> rank_topk(const std::vector<Candidate>& set,
                                       const std::vector<CandidateDiagnostics>& diag, double consistency,
                                       const TradeoffWeights& w, std::size_t k) {
    if (k < 1) throw ConfigError("k must be >= 1", "k");
    const auto comps = score_components(set, diag, consistency);
    std::vector<RankedCandidate> all;
    for (std::size_t i = 0; i < set.size(); ++i) {
        RankedCandidate rc;
        rc.index = i;
        rc.candidate = set[i];
        rc.components = comps[i];
        rc.diagnostics = diag[i];
        rc.score = tradeoff_score(comps[i], w);
        all.push_back(std::move(rc));
    }
    std::stable_sort(all.begin(), all.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.candidate.proximity != b.candidate.proximity) return a.candidate.proximity < b.candidate.proximity;
        if (a.candidate.validity != b.candidate.validity) return a.candidate.validity < b.candidate.validity;
        return a.index < b.index;
    });
    all.resize(std::min(k, all.size()));
    for (std::size_t r = 0; r < all.size(); ++r) all[r].rank = r + 1;
    return all;
}

namespace {

constexpr const char* kArrow = " → ";
constexpr const char* kMinus = "−";

std::string percent(double before, double after) {
    if (before == 0.0) return "";
    const double pct = (after - before) / std::abs(before) * 100.0;
    if (std::abs(pct) < 5e-5) return " (0%)";
    return std::string(" (") + (pct > 0 ? "+" : kMinus) + format_short(std::abs(pct), 4) + "%)";
}

std::string feature_value(const FeatureSpace::Feature& f, double raw) {
    if (f.categorical) {
        const auto code = static_cast<long>(std::llround(raw));
        if (code >= 0 && static_cast<std::size_t>(code) < f.level_names.size())
            return f.level_names[static_cast<std::size_t>(code)];
    }
    return format_short(raw);
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
    return out;
}

}  // namespace

std::string explain_template(const Candidate& c, const ExplainContext& ctx) {
    if (ctx.space == nullptr) throw ConfigError("explanation needs a feature space");
    const auto& space = *ctx.space;
    std::vector<std::string> changes;
    std::vector<std::string> changed_names;
    for (std::size_t k = 0; k < space.size(); ++k) {
        if (std::abs(c.x[k] - ctx.baseline[k]) <= 1e-9) continue;
        const auto& f = space.features[k];
        const double before = space.to_raw(k, ctx.baseline[k]);
        const double after = space.to_raw(k, c.x[k]);
        std::string line = f.name + ": " + feature_value(f, before) + kArrow + feature_value(f, after);
        if (!f.categorical) line += percent(before, after);
        changes.push_back(std::move(line));
        changed_names.push_back(f.name);
    }

    auto target_name = [&](std::size_t t) {
        return t < ctx.target_names.size() ? ctx.target_names[t] : "target " + std::to_string(t);
    };

    if (changes.empty()) {
        std::vector<std::string> parts;
        for (std::size_t t = 0; t < c.prediction.size(); ++t)
            parts.push_back(target_name(t) + " unchanged at " + format_short(c.prediction[t]));
        return "No changes from baseline; predicted " + join(parts, ", ") + ".";
    }

    std::ostringstream os;
    os << "Changes: " << join(changes, "; ") << ".";
    std::vector<std::string> impacts;
    for (std::size_t t = 0; t < c.prediction.size(); ++t) {
        const double before = t < ctx.baseline_prediction.size() ? ctx.baseline_prediction[t] : c.prediction[t];
        const double after = c.prediction[t];
        const char* dir = after < before ? "decrease" : after > before ? "increase" : "no change";
        impacts.push_back(target_name(t) + ": " + format_short(before) + kArrow + format_short(after) +
                          percent(before, after) + ", " + dir);
    }
    os << " Predicted " << join(impacts, "; ") << ".";

    if (ctx.graph != nullptr) {
        for (std::size_t t = 0; t < c.prediction.size(); ++t) {
            std::vector<std::string> drivers;
            for (const auto& [parent, w] : influence_summary(*ctx.graph, target_name(t))) {
                if (std::find(changed_names.begin(), changed_names.end(), parent) == changed_names.end()) continue;
                drivers.push_back(parent + " (weight " + format_short(w, 3) + ")");
                if (drivers.size() == 2) break;
            }
            if (drivers.empty())
                os << " Likely mechanism: no changed feature is a direct causal parent of " << target_name(t)
                   << " in the learned graph.";
            else
                os << " Likely mechanism: " << target_name(t) << " responds directly to " << join(drivers, " and ")
                   << " in the learned graph.";
        }
    }
    return os.str();
}

Explanation explain(const Candidate& c, const ExplainContext& ctx, LlmClient* client) {
    Explanation e;
    e.template_text = explain_template(c, ctx);
    e.text = e.template_text;
    if (client == nullptr || !client->config().enabled()) return e;
    try {
        const std::string reply = client->complete(
            "You rewrite technical explanations of configuration changes for HPC users. Keep every number "
            "unchanged and do not add claims.",
            "Rewrite this explanation in two or three plain sentences:\n" + e.template_text);
        if (reply.empty()) throw ProviderError("empty reply");
        e.text = reply;
    } catch (const ProviderError&) {
        e.fallback = true;
    }
    return e;
}

Json radar_json(const std::vector<RankedCandidate>& ranked) {
    Json out = Json::array();
    for (const auto& rc : ranked)
        out.push_back({{"rank", rc.rank}, {"score", rc.score}, {"components", rc.components.to_json()}});
    return {{"axes", {"validity", "proximity", "uncertainty", "causal", "plausibility"}}, {"candidates", out}};
}

}  // namespace whatif
