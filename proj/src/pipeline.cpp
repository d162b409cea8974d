#include "whatif/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace whatif {

std::string to_string(Phase p) {
    switch (p) {
        case Phase::Queued: return "queued";
        case Phase::Preprocessing: return "preprocessing";
        case Phase::Training: return "training";
        case Phase::Generating: return "generating";
        case Phase::Filtering: return "filtering";
        case Phase::Evaluating: return "evaluating";
        case Phase::Ranking: return "ranking";
        case Phase::Done: return "done";
        case Phase::Failed: return "failed";
    }
    return "?";
}

Json RunStatus::to_json() const {
    Json j = {{"id", id}, {"phase", to_string(phase)}, {"progress", progress}};
    if (phase == Phase::Failed) {
        j["error"] = error;
        j["stage"] = stage;
        if (!field.empty()) j["field"] = field;
    }
    return j;
}

// ---------------------------------------------------------------- registry

std::pair<std::shared_ptr<const DatasetEntry>, bool> Registry::add(Dataset data, const std::string& content_hash) {
    const std::string id = "ds-" + content_hash.substr(0, 16);
    std::lock_guard lock(mu_);
    if (auto it = datasets_.find(id); it != datasets_.end()) return {it->second, false};
    auto entry = std::make_shared<DatasetEntry>(DatasetEntry{id, content_hash, std::move(data)});
    datasets_.emplace(id, entry);
    return {entry, true};
}

std::pair<std::shared_ptr<const DatasetEntry>, bool> Registry::add_bytes(std::string_view bytes, bool jsonl,
                                                                         const std::vector<ColumnSchema>& schema,
                                                                         const std::string& source) {
    const std::string hash = sha256_hex(std::string(bytes) + '\n' + schema_to_json(schema).dump());
    {
        std::lock_guard lock(mu_);
        if (auto it = datasets_.find("ds-" + hash.substr(0, 16)); it != datasets_.end()) return {it->second, false};
    }
    Dataset ds = jsonl ? parse_jsonl(bytes, schema, source) : parse_csv(bytes, schema, source);
    return add(std::move(ds), hash);
}

std::shared_ptr<const DatasetEntry> Registry::add_file(const std::string& path,
                                                       const std::vector<ColumnSchema>& schema) {
    const std::string bytes = read_file(path);
    const bool jsonl = path.ends_with(".jsonl") || path.ends_with(".ndjson");
    return add_bytes(bytes, jsonl, schema, path).first;
}

std::shared_ptr<const DatasetEntry> Registry::find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = datasets_.find(id);
    return it == datasets_.end() ? nullptr : it->second;
}

std::size_t Registry::model_fits() const {
    std::lock_guard lock(mu_);
    return model_fits_;
}

std::shared_ptr<const PreparedData> Registry::prepared(const DatasetEntry& ds, const QueryParams& p) {
    const Json key_json = p.model_key();
    const std::string key = ds.hash + "|" + key_json["preprocess"].dump() + "|" +
                            key_json["split_ratio"].dump() + "|" + key_json["split_seed"].dump();
    {
        std::lock_guard lock(mu_);
        if (auto it = prepared_.find(key); it != prepared_.end()) return it->second;
    }
    auto [pp, report] = preprocess(ds.data, p.preprocess);
    pp.report = report;
    if (pp.rows() < 2) throw DataError("dataset has fewer than 2 usable rows after cleaning");
    if (pp.num_features() == 0) throw DataError("no features left after preprocessing");
    if (pp.num_targets() == 0) throw DataError("schema declares no target column");
    Split split = train_test_split(pp, p.split_ratio, p.split_seed);
    FeatureSpace space = FeatureSpace::from(pp);
    auto out = std::make_shared<PreparedData>(PreparedData{std::move(pp), std::move(split), std::move(space)});
    std::lock_guard lock(mu_);
    return prepared_.emplace(key, std::move(out)).first->second;
}

namespace {

Eigen::MatrixXd joined(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd m(a.rows(), a.cols() + b.cols());
    m << a, b;
    return m;
}

std::vector<std::string> column_names(const PreprocessedDataset& pp) {
    std::vector<std::string> out;
    for (const auto& f : pp.features) out.push_back(f.name);
    for (const auto& t : pp.targets) out.push_back(t.name);
    return out;
}

}  // namespace

std::shared_ptr<const TrainedModels> Registry::models(const DatasetEntry& ds, const PreparedData& data,
                                                      const QueryParams& p) {
    const std::string key = ds.hash + "|" + p.model_key().dump();
    {
        std::lock_guard lock(mu_);
        if (auto it = models_.find(key); it != models_.end()) return it->second;
    }
    const auto& train = data.split.train;
    BoostedPredictor predictor = fit_boosted(train, p.boost);
    UncertaintyForest forest = fit_forest(train, p.forest);
    IsolationForest iforest = fit_iforest(train.x, p.iforest);

    std::optional<CausalGraph> graph;
    std::string note;
    try {
        graph = learn_dag(joined(train.x_raw, train.y), column_names(train), train.num_features(), p.causal);
    } catch (const Error& e) {
        note = e.what();
    }

    Json metrics = Json::object();
    const auto& test = data.split.test;
    for (std::size_t t = 0; t < train.num_targets(); ++t) {
        if (test.rows() == 0) break;
        double sse = 0.0, sst = 0.0;
        const double mean = test.y.col(static_cast<Eigen::Index>(t)).mean();
        for (Eigen::Index r = 0; r < test.rows(); ++r) {
            Vec xr(static_cast<std::size_t>(test.x.cols()));
            for (Eigen::Index c = 0; c < test.x.cols(); ++c) xr[static_cast<std::size_t>(c)] = test.x(r, c);
            const double err = predictor.predict_target(t, xr) - test.y(r, static_cast<Eigen::Index>(t));
            sse += err * err;
            const double dev = test.y(r, static_cast<Eigen::Index>(t)) - mean;
            sst += dev * dev;
        }
        const double n = static_cast<double>(test.rows());
        metrics[train.targets[t].name] = {{"test_mse", sse / n}, {"test_r2", sst > 0 ? 1.0 - sse / sst : 0.0}};
    }

    auto out = std::make_shared<TrainedModels>(TrainedModels{std::move(predictor), std::move(forest),
                                                             std::move(iforest), std::move(graph), note, metrics});
    std::lock_guard lock(mu_);
    ++model_fits_;
    return models_.emplace(key, std::move(out)).first->second;
}

// ---------------------------------------------------------------- execute

namespace {

Vec row_vec(const Eigen::MatrixXd& m, Eigen::Index r) {
    Vec v(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
    return v;
}

double level_code(const FeatureSpace::Feature& f, const Json& v, const std::string& field) {
    if (v.is_string()) {
        const auto name = v.get<std::string>();
        const auto it = std::find(f.level_names.begin(), f.level_names.end(), name);
        if (it == f.level_names.end()) throw ConfigError("unknown level '" + name + "' for " + f.name, field);
        return static_cast<double>(it - f.level_names.begin());
    }
    return v.get<double>();
}

Vec resolve_baseline(const Query& q, const PreparedData& data, const DatasetEntry& ds) {
    const auto& space = data.space;
    if (!q.baseline) return row_vec(data.split.train.x, static_cast<Eigen::Index>(medoid_row(data.split.train.x)));
    const Json& b = *q.baseline;
    if (b.contains("row")) {
        const auto r = b["row"].get<long long>();
        if (r >= data.full.rows())
            throw ConfigError("row " + std::to_string(r) + " out of range (dataset has " +
                                  std::to_string(data.full.rows()) + " rows)",
                              "Baseline.row");
        return row_vec(data.full.x, static_cast<Eigen::Index>(r));
    }
    for (const auto& [key, v] : b.items()) {
        const bool known = std::any_of(ds.data.columns.begin(), ds.data.columns.end(),
                                       [&](const ColumnSchema& c) { return c.name == key; });
        if (!known) throw ConfigError("unknown column '" + key + "'", "Baseline." + key);
    }
    Vec raw(space.size());
    for (std::size_t k = 0; k < space.size(); ++k) {
        const auto& f = space.features[k];
        const std::string field = "Baseline." + f.name;
        if (!b.contains(f.name)) throw ConfigError("baseline lacks feature '" + f.name + "'", field);
        const Json& v = b[f.name];
        if (f.categorical) raw[k] = level_code(f, v, field);
        else if (v.is_number()) raw[k] = v.get<double>();
        else throw ConfigError("numeric feature needs a number", field);
    }
    return data.full.scale(raw);
}

std::size_t resolve_target(const PreprocessedDataset& pp, const std::string& name, const std::string& field) {
    if (auto t = pp.target_index(name)) return *t;
    // Metric shorthand ("power" for node_power) when it picks one target.
    std::vector<std::size_t> hits;
    for (std::size_t t = 0; t < pp.num_targets(); ++t)
        if (pp.targets[t].name.find(name) != std::string::npos) hits.push_back(t);
    if (hits.size() == 1) return hits.front();
    throw ConfigError("unknown target '" + name + "'", field);
}

TargetSpec build_spec(const Query& q, const PreprocessedDataset& pp) {
    TargetSpec spec;
    spec.point_tolerance = q.params.point_tolerance;
    for (const auto& c : q.targets) {
        const std::string field = "Targets." + c.name;
        const std::size_t t = resolve_target(pp, c.name, field);
        if (c.reduction) spec.goals.push_back(TargetGoal::percent_change(t, *c.reduction));
        else if (c.range.equals) spec.goals.push_back(TargetGoal::point(t, *c.range.equals));
        else
            spec.goals.push_back(TargetGoal::range(t, c.range.lower.value_or(-std::numeric_limits<double>::infinity()),
                                                   c.range.upper.value_or(std::numeric_limits<double>::infinity())));
    }
    return spec;
}

FeatureConstraints build_constraints(const Query& q, const FeatureSpace& space) {
    FeatureConstraints out;
    for (const auto& c : q.constraints) {
        const std::string field = "Constraints." + c.name;
        const auto it = std::find_if(space.features.begin(), space.features.end(),
                                     [&](const auto& f) { return f.name == c.name; });
        if (it == space.features.end()) throw ConfigError("unknown feature '" + c.name + "'", field);
        FeatureConstraint fc;
        if (c.range.level) {
            if (!it->categorical) throw ConfigError("'" + *c.range.level + "' is not a number", field);
            fc.fixed = level_code(*it, Json(*c.range.level), field);
        } else {
            fc.fixed = c.range.equals;
            fc.min = c.range.lower;
            fc.max = c.range.upper;
        }
        out.by_name[c.name] = fc;
    }
    return out;
}

Json spec_json(const TargetSpec& spec, const std::vector<std::string>& names) {
    Json out = Json::array();
    for (const auto& g : spec.goals) {
        Json j = {{"target", names[g.target]}};
        switch (g.kind) {
            case TargetGoal::Kind::Range:
                j["kind"] = "range";
                j["lower"] = std::isfinite(g.lower) ? Json(g.lower) : Json(nullptr);
                j["upper"] = std::isfinite(g.upper) ? Json(g.upper) : Json(nullptr);
                break;
            case TargetGoal::Kind::Point:
                j["kind"] = "point";
                j["value"] = g.value;
                break;
            case TargetGoal::Kind::PercentChange:
                j["kind"] = "percent_change";
                j["value"] = g.value;
                break;
        }
        out.push_back(j);
    }
    return out;
}

Json named_values(const std::vector<std::string>& names, const Vec& values) {
    Json j = Json::object();
    for (std::size_t i = 0; i < names.size() && i < values.size(); ++i) j[names[i]] = values[i];
    return j;
}

Json feature_values(const FeatureSpace& space, const Vec& scaled) {
    Json j = Json::object();
    for (std::size_t k = 0; k < space.size(); ++k) {
        const auto& f = space.features[k];
        const double raw = space.to_raw(k, scaled[k]);
        if (f.categorical) {
            const auto code = static_cast<long>(std::llround(raw));
            if (code >= 0 && static_cast<std::size_t>(code) < f.level_names.size()) {
                j[f.name] = f.level_names[static_cast<std::size_t>(code)];
                continue;
            }
        }
        j[f.name] = raw;
    }
    return j;
}

Vec raw_sample(const FeatureSpace& space, const Candidate& c) {
    Vec v;
    for (std::size_t k = 0; k < space.size(); ++k) v.push_back(space.to_raw(k, c.x[k]));
    v.insert(v.end(), c.prediction.begin(), c.prediction.end());
    return v;
}

std::string topk_csv(const std::vector<RankedCandidate>& ranked, const FeatureSpace& space,
                     const std::vector<std::string>& targets) {
    std::ostringstream os;
    os << "rank,score";
    for (const auto& f : space.features) os << ',' << f.name;
    for (const auto& t : targets) os << ',' << t;
    os << ",validity,proximity,anomaly_score,interval_width\n";
    for (const auto& rc : ranked) {
        os << rc.rank << ',' << format_number(rc.score);
        for (std::size_t k = 0; k < space.size(); ++k) os << ',' << format_number(space.to_raw(k, rc.candidate.x[k]));
        for (double p : rc.candidate.prediction) os << ',' << format_number(p);
        os << ',' << format_number(rc.candidate.validity) << ',' << format_number(rc.candidate.proximity) << ','
           << format_number(rc.diagnostics.anomaly_score) << ',' << format_number(rc.diagnostics.interval_width)
           << '\n';
    }
    return os.str();
}

class StageTimer {
public:
    explicit StageTimer(const ExecuteOptions& opt) : opt_(opt) {}

    template <class F>
    auto run(Phase phase, double progress, const char* stage, F&& f) {
        if (opt_.on_progress) opt_.on_progress(phase, progress);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(f())>) {
                f();
                record(stage, t0);
            } else {
                auto r = f();
                record(stage, t0);
                return r;
            }
        } catch (Error& e) {
            if (e.stage().empty()) e.set_stage(stage);
            throw;
        } catch (const std::exception& e) {
            throw Error(e.what(), stage);
        }
    }

    Json timings;

private:
    void record(const char* stage, std::chrono::steady_clock::time_point t0) {
        timings[stage] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }

    const ExecuteOptions& opt_;
};

}  // namespace

RunResult execute(const Query& q, const DatasetEntry& ds, Registry& registry, const ExecuteOptions& opt) {
    StageTimer timer(opt);
    const auto& p = q.params;

    auto data = timer.run(Phase::Preprocessing, 0.05, "preprocess", [&] { return registry.prepared(ds, p); });
    auto models = timer.run(Phase::Training, 0.15, "train", [&] { return registry.models(ds, *data, p); });
    const auto& pp = data->split.train;
    const auto& space = data->space;
    const auto& f = models->predictor;
    const std::vector<std::string> target_names = f.target_names();

    struct Setup {
        Vec baseline;
        Vec base_pred;
        TargetSpec spec;
        FeatureConstraints constraints;
        RuleSet rules;
    };
    Setup setup = timer.run(Phase::Training, 0.25, "rules", [&] {
        Setup s;
        s.baseline = resolve_baseline(q, *data, ds);
        s.base_pred = f.predict(s.baseline);
        s.spec = build_spec(q, pp).resolved(s.base_pred);
        s.constraints = build_constraints(q, space);
        s.rules = extract_and_validate(pp, s.spec, opt.client, p.min_coverage);
        return s;
    });

    CandidateSet set = timer.run(Phase::Generating, 0.35, "generate", [&] {
        GenerateRequest req;
        req.predictor = &f;
        req.space = space;
        req.baseline = setup.baseline;
        req.spec = setup.spec;
        req.constraints = setup.constraints;
        req.n = p.n;
        req.lambda1 = p.lambda1;
        req.lambda2 = p.lambda2;
        req.ga = p.ga;
        return ensemble_generate(req, p.seeds, p.workers);
    });

    std::vector<ComplianceResult> compliance;
    std::vector<Candidate> survivors;
    timer.run(Phase::Filtering, 0.6, "filter", [&] {
        for (std::size_t i = 0; i < set.candidates.size(); ++i) {
            auto r = compliance_score(raw_sample(space, set.candidates[i]), setup.rules, p.compliance_threshold, i);
            if (r.accepted) survivors.push_back(set.candidates[i]);
            compliance.push_back(std::move(r));
        }
    });

    std::optional<PlausibilityReport> plaus;
    std::optional<CausalGraph> synth_graph;
    std::optional<ConsistencyReport> consistency;
    std::string consistency_note;
    Projection projection = Projection::fit(pp.x);
    timer.run(Phase::Evaluating, 0.7, "evaluate", [&] {
        if (survivors.empty()) return;
        CandidateSet s;
        s.candidates = survivors;
        plaus = plausibility(s, models->iforest, models->forest, p.anomaly_threshold);

        Eigen::MatrixXd synth(static_cast<Eigen::Index>(survivors.size()),
                              static_cast<Eigen::Index>(space.size() + target_names.size()));
        Eigen::MatrixXd xs(static_cast<Eigen::Index>(survivors.size()), static_cast<Eigen::Index>(space.size()));
        for (std::size_t i = 0; i < survivors.size(); ++i) {
            const Vec row = raw_sample(space, survivors[i]);
            for (std::size_t c = 0; c < row.size(); ++c)
                synth(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
            for (std::size_t c = 0; c < space.size(); ++c)
                xs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = survivors[i].x[c];
        }
        projection.candidates = projection.project(xs);

        if (!models->real_graph) {
            consistency_note = "no graph on training data: " + models->graph_note;
            return;
        }
        try {
            synth_graph = learn_dag(synth, column_names(pp), space.size(), p.causal);
            consistency = consistency_score(*models->real_graph, *synth_graph);
        } catch (const Error& e) {
            consistency_note = e.what();
        }
    });

    std::vector<RankedCandidate> ranked;
    bool fallback_explain = false;
    bool infeasible = set.infeasible || survivors.empty();
    std::string infeasible_reason = set.infeasible   ? "no candidate reaches the target"
                                    : survivors.empty() ? "every candidate failed rule compliance"
                                                        : "";
    timer.run(Phase::Ranking, 0.9, "rank", [&] {
        if (infeasible) return;
        std::vector<Candidate> pool;
        std::vector<CandidateDiagnostics> diag;
        for (std::size_t i = 0; i < survivors.size(); ++i) {
            const auto& pc = plaus->candidates[i];
            if (p.reject_outliers && pc.is_outlier) continue;
            double w = 0.0;
            for (double v : pc.relative_interval_width) w += v;
            if (!pc.relative_interval_width.empty()) w /= static_cast<double>(pc.relative_interval_width.size());
            pool.push_back(survivors[i]);
            diag.push_back({pc.anomaly_score, w});
        }
        if (pool.empty()) {
            infeasible = true;
            infeasible_reason = "every surviving candidate was rejected as an outlier";
            return;
        }
        ranked = rank_topk(pool, diag, consistency ? consistency->score : 0.0, p.weights, p.k);
        ExplainContext ctx{&space, target_names, setup.baseline, setup.base_pred,
                           models->real_graph ? &*models->real_graph : nullptr};
        for (auto& rc : ranked) {
            auto e = explain(rc.candidate, ctx, opt.client);
            rc.explanation = e.text;
            rc.explanation_fallback = e.fallback;
            fallback_explain = fallback_explain || e.fallback;
        }
    });

    // ------------------------------------------------------------ report
    Json report;
    report["query"] = q.to_json();
    report["dataset"] = {{"id", ds.id},
                         {"hash", ds.hash},
                         {"rows", ds.data.rows()},
                         {"usable_rows", data->full.rows()},
                         {"train_rows", data->split.train.rows()},
                         {"test_rows", data->split.test.rows()}};
    report["preprocess"] = data->full.report.to_json();
    report["models"] = {{"predictor_hash", f.hash()},
                        {"forest_hash", models->forest.hash()},
                        {"metrics", models->metrics},
                        {"format_version", 1}};
    report["baseline"] = {{"source", q.baseline ? "query" : "training medoid"},
                          {"features", feature_values(space, setup.baseline)},
                          {"prediction", named_values(target_names, setup.base_pred)}};
    report["target_spec"] = spec_json(setup.spec, target_names);
    report["rules"] = setup.rules.to_json();

    Json comp = Json::array();
    for (const auto& c : compliance)
        comp.push_back({{"candidate", c.sample}, {"score", c.score}, {"accepted", c.accepted}, {"satisfied", c.satisfied}});
    report["compliance"] = {{"threshold", p.compliance_threshold},
                            {"rejected", std::count_if(compliance.begin(), compliance.end(),
                                                       [](const auto& c) { return !c.accepted; })},
                            {"results", comp}};
    report["generation"] = {{"requested_per_seed", p.n},
                            {"seeds", p.seeds},
                            {"candidates", set.candidates.size()},
                            {"survivors", survivors.size()},
                            {"diversity", set.diversity},
                            {"total_loss", set.total_loss},
                            {"lambda1", set.lambda1},
                            {"lambda2", set.lambda2}};
    report["plausibility"] = plaus ? plaus->to_json() : Json(nullptr);
    Json causal = Json::object();
    causal["real"] = models->real_graph ? models->real_graph->to_json() : Json(nullptr);
    causal["synthetic"] = synth_graph ? synth_graph->to_json() : Json(nullptr);
    causal["consistency"] = consistency ? consistency->to_json() : Json(nullptr);
    if (!consistency_note.empty()) causal["note"] = consistency_note;
    report["causal"] = causal;

    Json top = Json::array();
    for (const auto& rc : ranked) {
        Json uq = Json::array();
        for (std::size_t i = 0; i < survivors.size() && plaus; ++i) {
            if (survivors[i].x != rc.candidate.x) continue;
            for (std::size_t t = 0; t < plaus->candidates[i].uq.size(); ++t) {
                const auto& u = plaus->candidates[i].uq[t];
                uq.push_back({{"target", target_names[t]}, {"mean", u.mean}, {"std", u.std}, {"lower", u.lower}, {"upper", u.upper}});
            }
            break;
        }
        top.push_back({{"rank", rc.rank},
                       {"score", rc.score},
                       {"components", rc.components.to_json()},
                       {"features", feature_values(space, rc.candidate.x)},
                       {"prediction", named_values(target_names, rc.candidate.prediction)},
                       {"validity", rc.candidate.validity},
                       {"proximity", rc.candidate.proximity},
                       {"anomaly_score", rc.diagnostics.anomaly_score},
                       {"interval_width", rc.diagnostics.interval_width},
                       {"uq", uq},
                       {"explanation", rc.explanation},
                       {"provenance",
                        {{"seed", rc.candidate.provenance.seed},
                         {"worker", rc.candidate.provenance.worker},
                         {"iteration", rc.candidate.provenance.iteration}}}});
    }
    report["top_k"] = top;
    report["weights"] = p.weights.normalized().to_json();
    report["explanations"] = {{"provider", opt.client && opt.client->config().enabled() ? "llm" : "template"},
                              {"fallback", fallback_explain}};
    report["infeasible"] = infeasible;
    if (infeasible) report["infeasible_reason"] = infeasible_reason;
    report["run"] = {{"id", opt.run_id}, {"workers", p.workers}, {"timings_ms", timer.timings}};

    RunResult out;
    out.infeasible = infeasible;
    std::vector<bool> outlier_flags;
    if (plaus)
        for (const auto& c : plaus->candidates) outlier_flags.push_back(c.is_outlier);
    out.artifacts["report.json"] = report_text(report);
    out.artifacts["candidates.csv"] = candidates_csv(set, space, target_names);
    out.artifacts["topk.csv"] = topk_csv(ranked, space, target_names);
    out.artifacts["graph.dot"] = models->real_graph ? models->real_graph->to_dot() : "digraph causal {\n}\n";
    out.artifacts["projection.csv"] = projection.to_csv(outlier_flags);
    out.artifacts["radar.json"] = radar_json(ranked).dump(2) + "\n";
    out.report = std::move(report);
    if (opt.on_progress) opt.on_progress(Phase::Done, 1.0);
    return out;
}

std::string report_text(const Json& report) { return report.dump(2) + "\n"; }

std::string artifact_content_type(const std::string& name) {
    if (name.ends_with(".json")) return "application/json";
    if (name.ends_with(".csv")) return "text/csv; charset=utf-8";
    if (name.ends_with(".dot")) return "text/vnd.graphviz; charset=utf-8";
    return "application/octet-stream";
}

}  // namespace whatif
