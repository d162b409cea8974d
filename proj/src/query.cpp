#include "whatif/query.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>

namespace whatif {

std::string to_string(QueryKind k) {
    switch (k) {
        case QueryKind::Recommend: return "Recommend";
        case QueryKind::WhatIf: return "WhatIf";
        case QueryKind::Optimize: return "Optimize";
    }
    return "?";
}

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Number with optional unit suffix ("1000s", "250 W", "20%"). Returns the
// number of characters consumed including the suffix, 0 on failure.
std::size_t read_number(std::string_view s, double& out) {
    const std::string buf(s);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(buf.c_str(), &end);
    if (end == buf.c_str() || errno == ERANGE || !std::isfinite(v)) return 0;
    std::size_t i = static_cast<std::size_t>(end - buf.c_str());
    while (i < buf.size() && buf[i] == ' ' && i + 1 < buf.size() &&
           (std::isalpha(static_cast<unsigned char>(buf[i + 1])) || buf[i + 1] == '%'))
        ++i;
    while (i < buf.size() && (std::isalpha(static_cast<unsigned char>(buf[i])) || buf[i] == '%')) ++i;
    out = v;
    return i;
}

// Whole-string number with optional units, or a min/max keyword.
std::optional<double> full_number(std::string_view s) {
    s = trim(s);
    double v = 0;
    const std::size_t used = read_number(s, v);
    if (used == 0 || used != s.size()) return std::nullopt;
    return v;
}

[[noreturn]] void malformed(std::string_view text, const std::string& why) {
    throw ConfigError("malformed range '" + std::string(text) + "': " + why);
}

}  // namespace

RangeExpr RangeExpr::parse(std::string_view text) {
    RangeExpr r;
    std::string_view s = trim(text);
    if (s.empty()) malformed(text, "empty");

    auto operand = [&](std::string_view rest) {
        auto v = full_number(rest);
        if (!v) malformed(text, "expected a number after the operator");
        return *v;
    };
    if (s.rfind("<=", 0) == 0) { r.upper = operand(s.substr(2)); return r; }
    if (s.rfind(">=", 0) == 0) { r.lower = operand(s.substr(2)); return r; }
    if (s.rfind("==", 0) == 0) s = s.substr(1);
    if (s.front() == '<') { r.upper = operand(s.substr(1)); return r; }
    if (s.front() == '>') { r.lower = operand(s.substr(1)); return r; }
    if (s.front() == '=') {
        const auto rest = trim(s.substr(1));
        if (rest.empty()) malformed(text, "expected a value after '='");
        if (auto v = full_number(rest)) r.equals = *v;
        else r.level = std::string(rest);
        return r;
    }
    if (auto v = full_number(s)) {
        r.equals = *v;
        return r;
    }

    // "a - b" with a, b numbers or min / max keywords.
    auto bound = [&](std::string_view part, bool is_lower) -> std::optional<double> {
        part = trim(part);
        const auto kw = to_lower(part);
        if (kw == "min" && is_lower) return std::nullopt;
        if (kw == "max" && !is_lower) return std::nullopt;
        if (kw == "min" || kw == "max") malformed(text, "'" + kw + "' on the wrong side");
        auto v = full_number(part);
        if (!v) malformed(text, "bad bound '" + std::string(part) + "'");
        return v;
    };
    std::size_t split = std::string_view::npos;
    {
        // The separating dash follows the first operand, which may itself be
        // negative or a keyword.
        double v = 0;
        std::size_t start = 0;
        const auto kw = to_lower(s.substr(0, 3));
        if (kw == "min" || kw == "max") start = 3;
        else start = read_number(s, v);
        if (start != 0) {
            const auto dash = s.find('-', start);
            if (dash != std::string_view::npos && trim(s.substr(start, dash - start)).empty()) split = dash;
        }
    }
    if (split == std::string_view::npos) {
        // A bare word is a categorical level.
        const bool word = std::all_of(s.begin(), s.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == ' ';
        });
        if (word && std::isalpha(static_cast<unsigned char>(s.front()))) {
            r.level = std::string(s);
            return r;
        }
        malformed(text, "expected '< v', '> v', 'a - b' or '= v'");
    }
    r.lower = bound(s.substr(0, split), true);
    r.upper = bound(s.substr(split + 1), false);
    if (r.lower && r.upper && *r.lower > *r.upper) malformed(text, "lower bound exceeds upper bound");
    return r;
}

RangeExpr RangeExpr::from_json(const Json& j, const std::string& field) {
    try {
        if (j.is_number()) {
            RangeExpr r;
            r.equals = j.get<double>();
            return r;
        }
        if (j.is_string()) return parse(j.get<std::string>());
        if (j.is_object()) {
            RangeExpr r;
            for (const auto& [key, v] : j.items()) {
                const auto k = to_lower(key);
                if (k == "min" || k == "lower") r.lower = v.get<double>();
                else if (k == "max" || k == "upper") r.upper = v.get<double>();
                else if (k == "fixed" || k == "equals" || k == "value") {
                    if (v.is_string()) r.level = v.get<std::string>();
                    else r.equals = v.get<double>();
                } else
                    throw ConfigError("unknown range key '" + key + "'", field + "." + key);
            }
            if (r.lower && r.upper && *r.lower > *r.upper) throw ConfigError("min exceeds max", field);
            return r;
        }
    } catch (const ConfigError& e) {
        if (!e.field().empty()) throw;
        throw ConfigError(e.what(), field);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("bad range value: ") + e.what(), field);
    }
    throw ConfigError("expected a range string, number or object", field);
}

Json RangeExpr::to_json() const {
    Json j = Json::object();
    if (lower) j["min"] = *lower;
    if (upper) j["max"] = *upper;
    if (equals) j["fixed"] = *equals;
    if (level) j["fixed"] = *level;
    return j;
}

Json QueryParams::model_key() const {
    return {{"split_ratio", split_ratio},
            {"split_seed", split_seed},
            {"preprocess", {{"corr_threshold", preprocess.corr_threshold}, {"outlier_trim", preprocess.outlier_trim}}},
            {"boost",
             {{"n_rounds", boost.n_rounds},
              {"max_depth", boost.max_depth},
              {"learning_rate", boost.learning_rate},
              {"seed", boost.seed}}},
            {"forest",
             {{"n_trees", forest.n_trees},
              {"max_depth", forest.max_depth},
              {"min_samples_leaf", forest.min_samples_leaf},
              {"max_features", forest.max_features},
              {"seed", forest.seed}}},
            {"iforest", {{"n_trees", iforest.n_trees}, {"subsample", iforest.subsample}, {"seed", iforest.seed}}},
            {"causal",
             {{"ridge", causal.ridge},
              {"prune_threshold", causal.prune_threshold},
              {"order_search", causal.order_search}}}};
}

Json QueryParams::to_json() const {
    Json j = model_key();
    j["n"] = n;
    j["k"] = k;
    j["lambda1"] = lambda1;
    j["lambda2"] = lambda2;
    j["seeds"] = seeds;
    j["weights"] = weights.to_json();
    j["compliance_threshold"] = compliance_threshold;
    j["anomaly_threshold"] = anomaly_threshold;
    j["min_coverage"] = min_coverage;
    j["reject_outliers"] = reject_outliers;
    j["point_tolerance"] = point_tolerance;
    j["ga"] = {{"population_factor", ga.population_factor},
               {"generations", ga.generations},
               {"crossover_rate", ga.crossover_rate},
               {"mutation_sigma", ga.mutation_sigma},
               {"tournament_size", ga.tournament_size},
               {"patience", ga.patience}};
    return j;
}

Json Query::to_json() const {
    Json t = Json::array();
    for (const auto& c : targets) {
        Json e = {{"name", c.name}};
        if (c.reduction) e["reduction"] = *c.reduction;
        else e["range"] = c.range.to_json();
        t.push_back(e);
    }
    Json cs = Json::array();
    for (const auto& c : constraints) cs.push_back({{"name", c.name}, {"range", c.range.to_json()}});
    Json j = {{"type", to_string(kind)}, {"targets", t}, {"constraints", cs}, {"params", params.to_json()}};
    j["baseline"] = baseline ? *baseline : Json(nullptr);
    if (!metrics.empty()) j["metrics"] = metrics;
    if (reduction) j["reduction"] = *reduction;
    return j;
}

namespace {

template <class T>
T get_as(const Json& v, const std::string& field) {
    try {
        return v.get<T>();
    } catch (const Json::exception&) {
        throw ConfigError("wrong type", field);
    }
}

double get_fraction(const Json& v, const std::string& field, double lo, double hi) {
    const double x = get_as<double>(v, field);
    if (!(x >= lo && x <= hi)) throw ConfigError("out of range [" + format_short(lo) + ", " + format_short(hi) + "]", field);
    return x;
}

std::size_t get_count(const Json& v, const std::string& field, std::size_t min) {
    if (!v.is_number_integer()) throw ConfigError("expected an integer", field);
    const auto x = v.get<long long>();
    if (x < static_cast<long long>(min)) throw ConfigError("must be >= " + std::to_string(min), field);
    return static_cast<std::size_t>(x);
}

// Parameter object walker: every key must be claimed by a handler.
template <class F>
void each_key(const Json& j, const std::string& field, F&& handler) {
    if (!j.is_object()) throw ConfigError("expected an object", field);
    for (const auto& [key, v] : j.items()) {
        const std::string path = field + "." + key;
        if (!handler(to_lower(key), v, path)) throw ConfigError("unknown field '" + key + "'", path);
    }
}

void parse_params(const Json& j, QueryParams& p) {
    each_key(j, "Params", [&](const std::string& key, const Json& v, const std::string& path) {
        if (key == "n") p.n = get_count(v, path, 1);
        else if (key == "k") p.k = get_count(v, path, 1);
        else if (key == "lambda1") p.lambda1 = get_fraction(v, path, 0.0, 1e12);
        else if (key == "lambda2") p.lambda2 = get_fraction(v, path, 0.0, 1e12);
        else if (key == "seeds") {
            if (!v.is_array() || v.empty()) throw ConfigError("expected a non-empty array of seeds", path);
            p.seeds.clear();
            for (const auto& s : v) {
                if (!s.is_number_integer() || s.get<long long>() < 0) throw ConfigError("seed must be a non-negative integer", path);
                p.seeds.push_back(s.get<std::uint64_t>());
            }
        } else if (key == "workers") p.workers = get_count(v, path, 1);
        else if (key == "weights") p.weights = TradeoffWeights::from_json(v);
        else if (key == "compliance_threshold") p.compliance_threshold = get_fraction(v, path, 0.0, 1.0);
        else if (key == "anomaly_threshold") p.anomaly_threshold = get_fraction(v, path, 0.0, 1.0);
        else if (key == "min_coverage") p.min_coverage = get_fraction(v, path, 0.0, 1.0);
        else if (key == "reject_outliers") p.reject_outliers = get_as<bool>(v, path);
        else if (key == "split_ratio") p.split_ratio = get_fraction(v, path, 0.05, 0.95);
        else if (key == "split_seed") p.split_seed = get_as<std::uint64_t>(v, path);
        else if (key == "point_tolerance") p.point_tolerance = get_fraction(v, path, 0.0, 1.0);
        else if (key == "preprocess") {
            each_key(v, path, [&](const std::string& k2, const Json& v2, const std::string& p2) {
                if (k2 == "corr_threshold") p.preprocess.corr_threshold = get_fraction(v2, p2, 0.0, 1.0);
                else if (k2 == "outlier_trim") p.preprocess.outlier_trim = get_as<bool>(v2, p2);
                else return false;
                return true;
            });
        } else if (key == "boost") {
            each_key(v, path, [&](const std::string& k2, const Json& v2, const std::string& p2) {
                if (k2 == "n_rounds") p.boost.n_rounds = static_cast<int>(get_count(v2, p2, 1));
                else if (k2 == "max_depth") p.boost.max_depth = static_cast<int>(get_count(v2, p2, 1));
                else if (k2 == "learning_rate") p.boost.learning_rate = get_fraction(v2, p2, 1e-6, 1.0);
                else if (k2 == "seed") p.boost.seed = get_as<std::uint64_t>(v2, p2);
                else return false;
                return true;
            });
        } else if (key == "forest") {
            each_key(v, path, [&](const std::string& k2, const Json& v2, const std::string& p2) {
                if (k2 == "n_trees") p.forest.n_trees = static_cast<int>(get_count(v2, p2, 2));
                else if (k2 == "max_depth") p.forest.max_depth = static_cast<int>(get_count(v2, p2, 1));
                else if (k2 == "min_samples_leaf") p.forest.min_samples_leaf = get_count(v2, p2, 1);
                else if (k2 == "max_features") p.forest.max_features = get_count(v2, p2, 0);
                else if (k2 == "seed") p.forest.seed = get_as<std::uint64_t>(v2, p2);
                else return false;
                return true;
            });
        } else if (key == "iforest") {
            each_key(v, path, [&](const std::string& k2, const Json& v2, const std::string& p2) {
                if (k2 == "n_trees") p.iforest.n_trees = static_cast<int>(get_count(v2, p2, 1));
                else if (k2 == "subsample") p.iforest.subsample = get_count(v2, p2, 2);
                else if (k2 == "seed") p.iforest.seed = get_as<std::uint64_t>(v2, p2);
                else return false;
                return true;
            });
        } else if (key == "causal") {
            each_key(v, path, [&](const std::string& k2, const Json& v2, const std::string& p2) {
                if (k2 == "ridge") p.causal.ridge = get_fraction(v2, p2, 0.0, 1e6);
                else if (k2 == "prune_threshold") p.causal.prune_threshold = get_fraction(v2, p2, 0.0, 1e6);
                else if (k2 == "order_search") p.causal.order_search = get_as<bool>(v2, p2);
                else return false;
                return true;
            });
        } else if (key == "ga") {
            each_key(v, path, [&](const std::string& k2, const Json& v2, const std::string& p2) {
                if (k2 == "population_factor") p.ga.population_factor = get_count(v2, p2, 1);
                else if (k2 == "generations") p.ga.generations = static_cast<int>(get_count(v2, p2, 0));
                else if (k2 == "patience") p.ga.patience = static_cast<int>(get_count(v2, p2, 1));
                else if (k2 == "crossover_rate") p.ga.crossover_rate = get_fraction(v2, p2, 0.0, 1.0);
                else if (k2 == "mutation_sigma") p.ga.mutation_sigma = get_fraction(v2, p2, 0.0, 100.0);
                else if (k2 == "tournament_size") p.ga.tournament_size = get_count(v2, p2, 1);
                else return false;
                return true;
            });
        } else
            return false;
        return true;
    });
}

// {"a": v, "b": w} or [{"a": v}, {"b": w}] as ordered (name, value) pairs.
std::vector<std::pair<std::string, Json>> named_entries(const Json& j, const std::string& field) {
    std::vector<std::pair<std::string, Json>> out;
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) out.emplace_back(k, v);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) {
            const auto& e = j[i];
            if (!e.is_object() || e.size() != 1)
                throw ConfigError("each entry must be a single-key object", field + "[" + std::to_string(i) + "]");
            out.emplace_back(e.begin().key(), e.begin().value());
        }
    } else {
        throw ConfigError("expected an object or a list of single-key objects", field);
    }
    return out;
}

QueryKind parse_kind(const Json& j) {
    if (!j.is_string()) throw ConfigError("Type must be a string", "Type");
    const auto k = to_lower(j.get<std::string>());
    if (k == "recommend" || k == "recommendation") return QueryKind::Recommend;
    if (k == "whatif" || k == "what-if" || k == "counterfactual") return QueryKind::WhatIf;
    if (k == "optimize" || k == "optimization") return QueryKind::Optimize;
    throw ConfigError("unknown query type '" + j.get<std::string>() + "'", "Type");
}

Json load_baseline(const Json& j, const std::string& base_dir) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items())
            if (!v.is_number() && !v.is_string() && !(k == "row"))
                throw ConfigError("baseline values must be numbers or level names", "Baseline." + k);
        if (j.contains("row")) {
            if (j.size() != 1 || !j["row"].is_number_integer() || j["row"].get<long long>() < 0)
                throw ConfigError("row reference must be {\"row\": <non-negative integer>}", "Baseline.row");
        }
        return j;
    }
    if (j.is_number_integer()) {
        if (j.get<long long>() < 0) throw ConfigError("row index must be non-negative", "Baseline");
        return Json{{"row", j}};
    }
    if (j.is_string()) {
        std::filesystem::path p(j.get<std::string>());
        if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
        Json doc;
        try {
            doc = Json::parse(read_file(p.string()));
        } catch (const Json::exception& e) {
            throw ConfigError("baseline file " + p.string() + " is not valid JSON: " + e.what(), "Baseline");
        } catch (const Error& e) {
            throw ConfigError(e.what(), "Baseline");
        }
        if (!doc.is_object()) throw ConfigError("baseline file must hold a JSON object", "Baseline");
        return load_baseline(doc, base_dir);
    }
    throw ConfigError("Baseline must be an object, a row index or a file path", "Baseline");
}

}  // namespace

Query parse_query(const Json& doc, const std::string& base_dir) {
    if (!doc.is_object()) throw ConfigError("query must be a JSON object");
    Query q;
    bool have_type = false;
    std::optional<Json> targets_json, constraints_json;
    for (const auto& [key, v] : doc.items()) {
        const auto k = to_lower(key);
        if (k == "type") {
            q.kind = parse_kind(v);
            have_type = true;
        } else if (k == "dataset") {
            if (!v.is_string()) throw ConfigError("Dataset must be a string", key);
            q.dataset = v.get<std::string>();
        } else if (k == "baseline") {
            if (!v.is_null()) q.baseline = load_baseline(v, base_dir);
        } else if (k == "targets" || k == "target") {
            if (targets_json) throw ConfigError("both Target and Targets given", key);
            targets_json = v;
        } else if (k == "constraints") {
            constraints_json = v;
        } else if (k == "metrics") {
            if (v.is_string()) q.metrics.push_back(v.get<std::string>());
            else if (v.is_array()) {
                for (const auto& m : v) {
                    if (!m.is_string()) throw ConfigError("metric names must be strings", key);
                    q.metrics.push_back(m.get<std::string>());
                }
            } else
                throw ConfigError("Metrics must be a name or a list of names", key);
        } else if (k == "reduction") {
            q.reduction = get_fraction(v, key, 0.0, 1.0);
        } else if (k == "params") {
            parse_params(v, q.params);
        } else {
            throw ConfigError("unknown field '" + key + "'", key);
        }
    }
    if (!have_type) throw ConfigError("missing field Type", "Type");

    if (targets_json) {
        for (auto& [name, v] : named_entries(*targets_json, "Targets")) {
            TargetClause c;
            c.name = name;
            const std::string field = "Targets." + name;
            if (v.is_object() && v.contains("reduction")) {
                if (v.size() != 1) throw ConfigError("reduction cannot be combined with a range", field);
                c.reduction = get_fraction(v["reduction"], field + ".reduction", 0.0, 1.0);
            } else {
                c.range = RangeExpr::from_json(v, field);
                if (c.range.level) throw ConfigError("targets must be numeric", field);
            }
            q.targets.push_back(std::move(c));
        }
    }
    if (constraints_json) {
        for (auto& [name, v] : named_entries(*constraints_json, "Constraints"))
            q.constraints.push_back({name, RangeExpr::from_json(v, "Constraints." + name)});
    }

    if (q.reduction) {
        if (q.metrics.empty()) throw ConfigError("reduction needs Metrics naming the target(s)", "Metrics");
        for (const auto& m : q.metrics) {
            const bool dup = std::any_of(q.targets.begin(), q.targets.end(), [&](const auto& t) { return t.name == m; });
            if (dup) throw ConfigError("metric '" + m + "' also appears in Targets", "Metrics");
            q.targets.push_back({m, {}, q.reduction});
        }
    } else if (!q.metrics.empty() && q.kind == QueryKind::Optimize) {
        throw ConfigError("Optimize queries need a reduction", "reduction");
    }

    const bool has_reduction =
        std::any_of(q.targets.begin(), q.targets.end(), [](const auto& t) { return t.reduction.has_value(); });
    switch (q.kind) {
        case QueryKind::Recommend:
            if (q.targets.empty()) throw ConfigError("Recommend queries need Targets", "Targets");
            if (q.baseline) throw ConfigError("Recommend queries take no Baseline", "Baseline");
            if (has_reduction) throw ConfigError("percent reductions need a baseline query type", "Targets");
            break;
        case QueryKind::WhatIf:
        case QueryKind::Optimize:
            if (!q.baseline) throw ConfigError(to_string(q.kind) + " queries need a Baseline", "Baseline");
            if (q.targets.empty()) throw ConfigError(to_string(q.kind) + " queries need Targets or a reduction", "Targets");
            break;
    }
    return q;
}

Query parse_query(std::string_view text, const std::string& base_dir) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("query is not valid JSON: ") + e.what());
    }
    return parse_query(doc, base_dir);
}

}  // namespace whatif
