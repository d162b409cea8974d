#include "whatif/pipeline.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace whatif;

namespace {

Json quick_params() {
    return {{"n", 8},
            {"seeds", {1, 2}},
            {"boost", {{"n_rounds", 60}}},
            {"forest", {{"n_trees", 30}}},
            {"iforest", {{"n_trees", 50}}},
            {"ga", {{"generations", 60}}}};
}

std::shared_ptr<const DatasetEntry> sc19(Registry& reg, std::size_t n = 600) {
    return reg.add(test::synth_dataset("sc19-like", n, 11), "sc19-" + std::to_string(n)).first;
}

Json strip_run(Json report) {
    report.erase("run");
    return report;
}

}  // namespace

TEST_CASE("recommend run produces a ranked, compliant report") {
    Registry reg;
    const auto ds = sc19(reg);
    auto q = parse_query(Json{{"Type", "Recommend"}, {"Targets", {{"run_time", "150 - 250"}}}, {"Params", quick_params()}});
    const auto r = execute(q, *ds, reg);
    CHECK_FALSE(r.infeasible);
    const auto& rep = r.report;
    for (const char* key : {"query", "dataset", "preprocess", "models", "baseline", "target_spec", "rules", "compliance",
                            "generation", "plausibility", "causal", "top_k", "weights", "explanations", "run"})
        CHECK_MESSAGE(rep.contains(key), key);
    CHECK(rep["baseline"]["source"] == "training medoid");
    REQUIRE(!rep["top_k"].empty());
    CHECK(rep["top_k"].size() <= 5);
    for (const auto& c : rep["top_k"]) {
        CHECK(c["explanation"].get<std::string>().size() > 10);
        CHECK(c["score"].get<double>() >= 0.0);
        CHECK(c["score"].get<double>() <= 1.0);
    }
    // Every ranked candidate passed rule compliance.
    std::size_t accepted = 0;
    for (const auto& c : rep["compliance"]["results"]) {
        CHECK(c["accepted"] == (c["score"].get<double>() >= 0.5));
        accepted += c["accepted"].get<bool>() ? 1 : 0;
    }
    CHECK(accepted == rep["generation"]["survivors"].get<std::size_t>());
    for (const char* name : {"report.json", "candidates.csv", "topk.csv", "graph.dot", "projection.csv", "radar.json"})
        CHECK_MESSAGE(r.artifacts.count(name) == 1, name);
    CHECK(r.artifacts.at("report.json") == report_text(r.report));
    CHECK(artifact_content_type("report.json") == "application/json");
    CHECK(artifact_content_type("graph.dot").find("text/") == 0);
}

TEST_CASE("runs are reproducible and independent of the worker count") {
    Registry reg;
    const auto ds = sc19(reg);
    Json params = quick_params();
    auto q = parse_query(Json{{"Type", "Recommend"}, {"Targets", {{"run_time", "< 200"}}}, {"Params", params}});
    const auto a = execute(q, *ds, reg);
    q.params.workers = 2;
    const auto b = execute(q, *ds, reg);
    q.params.workers = 4;
    const auto c = execute(q, *ds, reg);
    CHECK(strip_run(a.report).dump() == strip_run(b.report).dump());
    CHECK(strip_run(a.report).dump() == strip_run(c.report).dump());
    CHECK(a.artifacts.at("candidates.csv") == c.artifacts.at("candidates.csv"));
    CHECK(a.artifacts.at("topk.csv") == b.artifacts.at("topk.csv"));
}

TEST_CASE("models are cached by dataset and parameters") {
    Registry reg;
    const auto ds = sc19(reg);
    auto q = parse_query(Json{{"Type", "Recommend"}, {"Targets", {{"run_time", "< 200"}}}, {"Params", quick_params()}});
    execute(q, *ds, reg);
    CHECK(reg.model_fits() == 1);
    q.params.k = 3;
    q.params.seeds = {9};
    execute(q, *ds, reg);
    CHECK(reg.model_fits() == 1);
    q.params.boost.n_rounds = 61;
    execute(q, *ds, reg);
    CHECK(reg.model_fits() == 2);
}

TEST_CASE("registry deduplicates identical uploads") {
    Registry reg;
    const auto data = synthesize("pm100-like", 50, 3);
    const auto schema = schema_from_json(data.schema);
    const auto [a, fresh_a] = reg.add_bytes(data.csv, false, schema, "a.csv");
    const auto [b, fresh_b] = reg.add_bytes(data.csv, false, schema, "b.csv");
    CHECK(fresh_a);
    CHECK_FALSE(fresh_b);
    CHECK(a->id == b->id);
    CHECK(a->id.rfind("ds-", 0) == 0);
    CHECK(reg.find(a->id) == a);
    CHECK(reg.find("ds-nope") == nullptr);
}

TEST_CASE("unreachable targets give an infeasible report") {
    Registry reg;
    const auto ds = sc19(reg);
    auto q = parse_query(Json{{"Type", "Recommend"}, {"Targets", {{"run_time", "< -100000"}}}, {"Params", quick_params()}});
    const auto r = execute(q, *ds, reg);
    CHECK(r.infeasible);
    CHECK(r.report["infeasible"] == true);
    CHECK(r.report["top_k"].empty());
    CHECK(r.report.contains("infeasible_reason"));
}

TEST_CASE("what-if with an explicit baseline and optimize with a reduction") {
    Registry reg;
    const auto ds = sc19(reg);
    const Json base = {{"task_count", 256}, {"num_nodes", 8}, {"problem_size", 40}, {"cpu_freq", 2.4}};
    auto w = parse_query(Json{{"Type", "WhatIf"}, {"Baseline", base}, {"Targets", {{"run_time", "< 250"}}},
                              {"Constraints", {{"num_nodes", "= 8"}}}, {"Params", quick_params()}});
    const auto r = execute(w, *ds, reg);
    CHECK(r.report["baseline"]["source"] == "query");
    for (const auto& c : r.report["top_k"]) CHECK(c["features"]["num_nodes"].get<double>() == doctest::Approx(8.0));

    auto o = parse_query(Json{{"Type", "Optimize"}, {"Baseline", base}, {"Metrics", "run_time"}, {"reduction", 0.2},
                              {"Params", quick_params()}});
    const auto ro = execute(o, *ds, reg);
    const double before = ro.report["baseline"]["prediction"]["run_time"].get<double>();
    // The reduction resolves to a point target at 80% of the baseline prediction.
    CHECK(ro.report["target_spec"][0]["kind"] == "point");
    CHECK(ro.report["target_spec"][0]["value"].get<double>() == doctest::Approx(0.8 * before));
    for (const auto& c : ro.report["top_k"])
        CHECK(c["prediction"]["run_time"].get<double>() < before);
}

TEST_CASE("errors carry the failing stage and field") {
    Registry reg;
    const auto ds = sc19(reg);
    auto q = parse_query(Json{{"Type", "Recommend"}, {"Targets", {{"watts", "< 3"}}}, {"Params", quick_params()}});
    try {
        execute(q, *ds, reg);
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "Targets.watts");
        CHECK(e.stage() == "rules");
    }
    auto c = parse_query(Json{{"Type", "WhatIf"}, {"Baseline", {{"task_count", 1}}}, {"Targets", {{"run_time", "< 3"}}},
                              {"Params", quick_params()}});
    try {
        execute(c, *ds, reg);
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(e.field().rfind("Baseline.", 0) == 0);
    }
}

TEST_CASE("unreachable provider falls back to statistical rules and template text") {
    Registry reg;
    const auto ds = sc19(reg);
    auto q = parse_query(Json{{"Type", "Recommend"}, {"Targets", {{"run_time", "150 - 250"}}}, {"Params", quick_params()}});
    LlmClient client({"http://127.0.0.1:9/v1/chat/completions", "m", "", 2.0});
    const auto with = execute(q, *ds, reg, {&client, "", {}});
    const auto without = execute(q, *ds, reg);
    CHECK(with.report["rules"]["fallback"] == true);
    CHECK(with.report["explanations"]["fallback"] == true);
    CHECK(with.report["top_k"] == without.report["top_k"]);
    CHECK(with.report["rules"]["rules"] == without.report["rules"]["rules"]);
}

TEST_CASE("progress reports advance through the phases") {
    Registry reg;
    const auto ds = sc19(reg);
    auto q = parse_query(Json{{"Type", "Recommend"}, {"Targets", {{"run_time", "< 200"}}}, {"Params", quick_params()}});
    std::vector<Phase> seen;
    double last = -1.0;
    bool monotone = true;
    execute(q, *ds, reg, {nullptr, "run-x", [&](Phase p, double f) {
                              seen.push_back(p);
                              monotone = monotone && f >= last;
                              last = f;
                          }});
    CHECK(monotone);
    CHECK(std::find(seen.begin(), seen.end(), Phase::Training) != seen.end());
    CHECK(std::find(seen.begin(), seen.end(), Phase::Ranking) != seen.end());
}
