#include "whatif/cli.hpp"
#include "whatif/service.hpp"

#include "support.hpp"

#include <doctest.h>
#include <httplib.h>

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

using namespace whatif;

namespace {

const Json kParams = {{"n", 8},
                      {"seeds", {1, 2}},
                      {"boost", {{"n_rounds", 60}}},
                      {"forest", {{"n_trees", 30}}},
                      {"iforest", {{"n_trees", 50}}},
                      {"ga", {{"generations", 60}}}};

struct Fixture {
    Service service;
    int port;
    httplib::Client client;

    explicit Fixture(ServiceConfig cfg = {})
        : service(std::move(cfg)), port(service.start_background()), client("127.0.0.1", port) {
        client.set_read_timeout(60, 0);
    }
    ~Fixture() { service.stop(); }

    httplib::Result upload(const std::string& csv, const std::string& schema, const std::string& name = "data.csv") {
        httplib::MultipartFormDataItems items = {{"file", csv, name, "text/csv"},
                                                 {"schema", schema, "schema.json", "application/json"}};
        return client.Post("/datasets", items);
    }

    httplib::Result query(const Json& q) { return client.Post("/queries", q.dump(), "application/json"); }

    Json wait(const std::string& run_id) {
        for (int i = 0; i < 1200; ++i) {
            auto r = client.Get("/runs/" + run_id);
            REQUIRE(r);
            const auto j = Json::parse(r->body);
            if (j["phase"] == "done" || j["phase"] == "failed") return j;
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        FAIL("run did not finish");
        return {};
    }
};

SynthData sc19() { return synthesize("sc19-like", 600, 11); }

Json strip_run(Json report) {
    report.erase("run");
    return report;
}

}  // namespace

TEST_CASE("health and CORS") {
    Fixture f;
    auto r = f.client.Get("/health");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");
    auto o = f.client.Options("/queries");
    REQUIRE(o);
    CHECK(o->status == 204);
}

TEST_CASE("dataset upload, duplicate and lookup") {
    Fixture f;
    const auto data = sc19();
    auto a = f.upload(data.csv, data.schema.dump());
    REQUIRE(a);
    CHECK(a->status == 201);
    const auto ja = Json::parse(a->body);
    CHECK(ja["rows"] == 600);
    CHECK(ja.contains("preprocess"));
    auto b = f.upload(data.csv, data.schema.dump());
    REQUIRE(b);
    CHECK(b->status == 200);
    CHECK(Json::parse(b->body)["dataset_id"] == ja["dataset_id"]);

    auto g = f.client.Get("/datasets/" + ja["dataset_id"].get<std::string>());
    REQUIRE(g);
    CHECK(g->status == 200);
    auto missing = f.client.Get("/datasets/ds-0000");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(Json::parse(missing->body)["code"] == "not_found");
}

TEST_CASE("bad uploads are rejected with a field") {
    Fixture f;
    const auto data = sc19();
    auto bad_schema = f.upload(data.csv, "{nope");
    REQUIRE(bad_schema);
    CHECK(bad_schema->status == 400);
    CHECK(Json::parse(bad_schema->body)["field"] == "schema");

    auto bad_rows = f.upload("task_count,num_nodes\n1,2\n", data.schema.dump());
    REQUIRE(bad_rows);
    CHECK(bad_rows->status == 400);
    CHECK(Json::parse(bad_rows->body)["code"] == "bad_dataset");

    auto no_file = f.client.Post("/datasets", httplib::MultipartFormDataItems{{"schema", "{}", "s.json", ""}});
    REQUIRE(no_file);
    CHECK(no_file->status == 400);
}

TEST_CASE("uploads above the size limit are refused") {
    ServiceConfig cfg;
    cfg.max_upload_bytes = 1024;
    Fixture f(cfg);
    const auto data = sc19();
    auto r = f.upload(data.csv, data.schema.dump());
    REQUIRE(r);
    CHECK(r->status == 413);
}

TEST_CASE("invalid queries return 400 with the field") {
    Fixture f;
    const auto data = sc19();
    const auto id = Json::parse(f.upload(data.csv, data.schema.dump())->body)["dataset_id"].get<std::string>();
    auto r = f.query({{"Type", "Recommend"}, {"Dataset", id}, {"Targets", {{"run_time", "< 200"}}}, {"Speed", 1}});
    REQUIRE(r);
    CHECK(r->status == 400);
    CHECK(Json::parse(r->body)["field"] == "Speed");
    r = f.query({{"Type", "Recommend"}, {"Dataset", "ds-none"}, {"Targets", {{"run_time", "< 200"}}}});
    CHECK(r->status == 400);
    CHECK(Json::parse(r->body)["field"] == "Dataset");
    r = f.query({{"Type", "WhatIf"}, {"Dataset", id}, {"Baseline", "/etc/passwd"}, {"Targets", {{"run_time", "< 200"}}}});
    CHECK(r->status == 400);
    CHECK(Json::parse(r->body)["field"] == "Baseline");
    r = f.client.Post("/queries", "{", "application/json");
    CHECK(r->status == 400);
}

TEST_CASE("reports are 409 until done, then served with artifacts") {
    Fixture f;
    std::mutex m;
    std::condition_variable cv;
    bool release = false, held = false;
    f.service.set_phase_hook([&](const std::string&, Phase p) {
        if (p != Phase::Generating) return;
        std::unique_lock lock(m);
        held = true;
        cv.notify_all();
        cv.wait(lock, [&] { return release; });
    });
    const auto data = sc19();
    const auto id = Json::parse(f.upload(data.csv, data.schema.dump())->body)["dataset_id"].get<std::string>();
    auto q = f.query({{"Type", "Recommend"}, {"Dataset", id}, {"Targets", {{"run_time", "150 - 250"}}}, {"Params", kParams}});
    REQUIRE(q);
    CHECK(q->status == 202);
    const auto run = Json::parse(q->body)["run_id"].get<std::string>();
    {
        std::unique_lock lock(m);
        cv.wait(lock, [&] { return held; });
    }
    auto early = f.client.Get("/reports/" + run);
    REQUIRE(early);
    CHECK(early->status == 409);
    CHECK(Json::parse(early->body)["phase"] == "generating");
    {
        std::lock_guard lock(m);
        release = true;
    }
    cv.notify_all();
    const auto status = f.wait(run);
    CHECK(status["phase"] == "done");

    auto rep = f.client.Get("/reports/" + run);
    REQUIRE(rep);
    CHECK(rep->status == 200);
    const auto report = Json::parse(rep->body);
    CHECK(report["run"]["id"] == run);
    auto csv = f.client.Get("/reports/" + run + "/artifacts/candidates.csv");
    REQUIRE(csv);
    CHECK(csv->status == 200);
    CHECK(csv->get_header_value("Content-Type").find("text/csv") == 0);
    CHECK(f.client.Get("/reports/" + run + "/artifacts/nothing.txt")->status == 404);
    CHECK(f.client.Get("/reports/run-999999")->status == 404);
    CHECK(f.client.Get("/runs/run-999999")->status == 404);
}

TEST_CASE("failed runs report the stage") {
    Fixture f;
    const auto data = sc19();
    const auto id = Json::parse(f.upload(data.csv, data.schema.dump())->body)["dataset_id"].get<std::string>();
    auto q = f.query({{"Type", "Recommend"}, {"Dataset", id}, {"Targets", {{"watts", "< 200"}}}, {"Params", kParams}});
    const auto run = Json::parse(q->body)["run_id"].get<std::string>();
    const auto status = f.wait(run);
    CHECK(status["phase"] == "failed");
    CHECK(status["field"] == "Targets.watts");
    auto rep = f.client.Get("/reports/" + run);
    CHECK(rep->status == 409);
}

TEST_CASE("bearer token guards every route but health") {
    ServiceConfig cfg;
    cfg.bearer_token = "s3cret";
    Fixture f(cfg);
    CHECK(f.client.Get("/health")->status == 200);
    CHECK(f.client.Get("/runs/run-000001")->status == 401);
    f.client.set_bearer_token_auth("s3cret");
    CHECK(f.client.Get("/runs/run-000001")->status == 404);
}

TEST_CASE("identical queries give identical reports, also through the CLI") {
    const auto dir = test::temp_dir("service-cli");
    const auto data = sc19();
    write_file((dir / "sc19.csv").string(), data.csv);
    write_file((dir / "sc19.schema.json").string(), data.schema.dump(2));

    ServiceConfig cfg;
    cfg.data_dir = (dir / "store").string();
    Fixture f(cfg);
    const auto id = Json::parse(f.upload(data.csv, data.schema.dump())->body)["dataset_id"].get<std::string>();
    const Json body = {{"Type", "Recommend"}, {"Dataset", id}, {"Targets", {{"run_time", "150 - 250"}}}, {"Params", kParams}};
    const auto r1 = Json::parse(f.query(body)->body)["run_id"].get<std::string>();
    const auto r2 = Json::parse(f.query(body)->body)["run_id"].get<std::string>();
    f.wait(r1);
    f.wait(r2);
    const auto a = Json::parse(f.client.Get("/reports/" + r1)->body);
    const auto b = Json::parse(f.client.Get("/reports/" + r2)->body);
    CHECK(strip_run(a).dump() == strip_run(b).dump());
    CHECK(std::filesystem::exists(dir / "store" / "runs" / r1 / "report.json"));

    Json q = body;
    q.erase("Dataset");
    const Json config = {{"dataset", "sc19.csv"}, {"schema", "sc19.schema.json"}, {"query", q}, {"out", "out"}};
    write_file((dir / "config.json").string(), config.dump(2));
    const std::string cfg_path = (dir / "config.json").string();
    const char* argv[] = {"whatif", "run", "--config", cfg_path.c_str(), "--workers", "2"};
    std::ostringstream out, err;
    REQUIRE(run_cli(6, argv, out, err) == 0);
    const auto c = Json::parse(read_file((dir / "out" / "report.json").string()));
    CHECK(strip_run(a).dump() == strip_run(c).dump());
}
