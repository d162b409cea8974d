#include "whatif/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

namespace whatif {

namespace fs = std::filesystem;

ServiceConfig ServiceConfig::from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("service config must be a JSON object");
    ServiceConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "host") c.host = v.get<std::string>();
            else if (key == "port") c.port = v.get<int>();
            else if (key == "data_dir") c.data_dir = v.get<std::string>();
            else if (key == "job_workers") c.job_workers = v.get<std::size_t>();
            else if (key == "retention") c.retention = v.get<std::size_t>();
            else if (key == "max_upload_bytes") c.max_upload_bytes = v.get<std::size_t>();
            else if (key == "bearer_token") c.bearer_token = v.get<std::string>();
            else if (key == "cors_origin") c.cors_origin = v.get<std::string>();
            else if (key == "provider") {
                for (const auto& [pk, pv] : v.items()) {
                    if (pk == "endpoint") c.provider.endpoint = pv.get<std::string>();
                    else if (pk == "model") c.provider.model = pv.get<std::string>();
                    else if (pk == "api_key") c.provider.api_key = pv.get<std::string>();
                    else if (pk == "timeout_seconds") c.provider.timeout_seconds = pv.get<double>();
                    else throw ConfigError("unknown field '" + pk + "'", "provider." + pk);
                }
            } else
                throw ConfigError("unknown field '" + key + "'", key);
        }
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("bad service config value: ") + e.what());
    }
    if (c.job_workers < 1) throw ConfigError("job_workers must be >= 1", "job_workers");
    if (c.retention < 1) throw ConfigError("retention must be >= 1", "retention");
    return c;
}

ServiceConfig ServiceConfig::load(const std::string& path) {
    try {
        return from_json(Json::parse(read_file(path)));
    } catch (const Json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

Json ApiError::to_json() const {
    Json j = {{"status", status}, {"code", code}, {"message", message}};
    j["field"] = field.empty() ? Json(nullptr) : Json(field);
    return j;
}

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) { send_json(res, e.status, e.to_json()); }

const char* status_code_name(int status) {
    switch (status) {
        case 400: return "bad_request";
        case 401: return "unauthorized";
        case 404: return "not_found";
        case 409: return "conflict";
        case 413: return "payload_too_large";
        default: return "error";
    }
}

}  // namespace

Service::Service(ServiceConfig cfg) : cfg_(std::move(cfg)), server_(std::make_unique<httplib::Server>()) {
    const ProviderConfig pc = cfg_.provider.with_env_overrides();
    if (pc.enabled()) client_ = std::make_unique<LlmClient>(pc);
    if (!cfg_.data_dir.empty()) load_data_dir();
    routes();
    for (std::size_t i = 0; i < cfg_.job_workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service() { stop(); }

void Service::set_phase_hook(std::function<void(const std::string&, Phase)> hook) {
    std::lock_guard lock(mu_);
    phase_hook_ = std::move(hook);
}

bool Service::listen() { return server_->listen(cfg_.host, cfg_.port); }

int Service::start_background() {
    const int port = server_->bind_to_any_port(cfg_.host);
    if (port < 0) throw Error("cannot bind " + cfg_.host);
    listener_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port;
}

void Service::stop() {
    {
        std::lock_guard lock(mu_);
        if (stopping_) return;
        stopping_ = true;
    }
    cv_.notify_all();
    server_->stop();
    if (listener_.joinable()) listener_.join();
    for (auto& w : workers_)
        if (w.joinable()) w.join();
}

void Service::load_data_dir() {
    const fs::path dir = fs::path(cfg_.data_dir) / "datasets";
    if (!fs::exists(dir)) return;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() != ".json" || e.path().string().ends_with(".jsonl")) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        fs::path schema = f;
        schema.replace_extension(".schema.json");
        if (!fs::exists(schema)) continue;
        try {
            registry_.add_bytes(read_file(f.string()), f.extension() == ".jsonl",
                                schema_from_json(Json::parse(read_file(schema.string()))), f.filename().string());
        } catch (const std::exception&) {
            // Unreadable leftovers are skipped; uploads recreate them.
        }
    }
}

void Service::touch(const std::string& id) {
    lru_.remove(id);
    lru_.push_front(id);
}

void Service::evict() {
    // Oldest finished runs go first; queued and running ones are kept.
    auto it = lru_.end();
    while (runs_.size() > cfg_.retention && it != lru_.begin()) {
        --it;
        const auto r = runs_.find(*it);
        const Phase ph = r->second->status.phase;
        if (ph == Phase::Done || ph == Phase::Failed) {
            runs_.erase(r);
            it = lru_.erase(it);
        }
    }
}

void Service::worker_loop() {
    for (;;) {
        std::string id;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            id = queue_.front();
            queue_.pop_front();
        }
        run_job(id);
    }
}

void Service::run_job(const std::string& id) {
    std::shared_ptr<Run> run;
    std::function<void(const std::string&, Phase)> hook;
    {
        std::lock_guard lock(mu_);
        auto it = runs_.find(id);
        if (it == runs_.end()) return;
        run = it->second;
        hook = phase_hook_;
    }
    ExecuteOptions opt;
    opt.client = client_.get();
    opt.run_id = id;
    opt.on_progress = [&](Phase ph, double progress) {
        if (ph == Phase::Done) return;  // published below, together with the artifacts
        {
            std::lock_guard lock(mu_);
            run->status.phase = ph;
            run->status.progress = progress;
        }
        if (hook) hook(id, ph);
    };
    try {
        RunResult result = execute(run->query, *run->dataset, registry_, opt);
        if (!cfg_.data_dir.empty()) {
            const fs::path dir = fs::path(cfg_.data_dir) / "runs" / id;
            fs::create_directories(dir);
            for (const auto& [name, body] : result.artifacts) write_file((dir / name).string(), body);
        }
        std::lock_guard lock(mu_);
        run->artifacts = std::move(result.artifacts);
        run->status.phase = Phase::Done;
        run->status.progress = 1.0;
    } catch (const std::exception& e) {
        std::lock_guard lock(mu_);
        run->status.phase = Phase::Failed;
        run->status.error = e.what();
        if (const auto* err = dynamic_cast<const Error*>(&e)) run->status.stage = err->stage();
        if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) run->status.field = ce->field();
        if (run->status.error.empty()) run->status.error = "unknown error";
    }
    if (hook) hook(id, run->status.phase);
}

void Service::routes() {
    auto& s = *server_;
    s.set_payload_max_length(cfg_.max_upload_bytes);

    s.set_default_headers({{"Access-Control-Allow-Origin", cfg_.cors_origin},
                           {"Access-Control-Allow-Headers", "Content-Type, Authorization"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});

    s.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        if (cfg_.bearer_token.empty() || req.method == "OPTIONS" || req.path == "/health")
            return httplib::Server::HandlerResponse::Unhandled;
        if (req.get_header_value("Authorization") == "Bearer " + cfg_.bearer_token)
            return httplib::Server::HandlerResponse::Unhandled;
        send_error(res, {401, "unauthorized", "missing or wrong bearer token", "Authorization"});
        return httplib::Server::HandlerResponse::Handled;
    });

    s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        std::string msg = httplib::status_message(res.status);
        send_error(res, {res.status, status_code_name(res.status), msg, ""});
    });

    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string msg = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            msg = e.what();
        } catch (...) {
        }
        send_error(res, {500, "internal", msg, ""});
    });

    s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    s.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"status", "ok"}}); });

    s.Post("/datasets", [this](const httplib::Request& req, httplib::Response& res) {
        if (!req.has_file("file")) return send_error(res, {400, "bad_request", "multipart field 'file' is required", "file"});
        if (!req.has_file("schema"))
            return send_error(res, {400, "bad_request", "multipart field 'schema' is required", "schema"});
        const auto file = req.get_file_value("file");
        const auto schema_part = req.get_file_value("schema");
        std::vector<ColumnSchema> schema;
        try {
            schema = schema_from_json(Json::parse(schema_part.content));
        } catch (const Json::exception& e) {
            return send_error(res, {400, "bad_schema", std::string("schema is not valid JSON: ") + e.what(), "schema"});
        } catch (const Error& e) {
            return send_error(res, {400, "bad_schema", e.what(), "schema"});
        }
        const bool jsonl = file.filename.ends_with(".jsonl") || file.filename.ends_with(".ndjson");
        try {
            auto [entry, created] =
                registry_.add_bytes(file.content, jsonl, schema, file.filename.empty() ? "upload" : file.filename);
            auto prepared = registry_.prepared(*entry, QueryParams{});
            if (created && !cfg_.data_dir.empty()) {
                const fs::path dir = fs::path(cfg_.data_dir) / "datasets";
                fs::create_directories(dir);
                write_file((dir / (entry->id + (jsonl ? ".jsonl" : ".csv"))).string(), file.content);
                write_file((dir / (entry->id + ".schema.json")).string(), schema_to_json(schema).dump(2));
            }
            send_json(res, created ? 201 : 200,
                      {{"dataset_id", entry->id},
                       {"hash", entry->hash},
                       {"rows", entry->data.rows()},
                       {"columns", schema_to_json(entry->data.columns)},
                       {"preprocess", prepared->full.report.to_json()}});
        } catch (const Error& e) {
            send_error(res, {400, "bad_dataset", e.what(), "file"});
        }
    });

    s.Get(R"(/datasets/([A-Za-z0-9\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        auto entry = registry_.find(req.matches[1]);
        if (!entry) return send_error(res, {404, "not_found", "unknown dataset", "dataset_id"});
        send_json(res, 200,
                  {{"dataset_id", entry->id}, {"rows", entry->data.rows()}, {"columns", schema_to_json(entry->data.columns)}});
    });

    s.Post("/queries", [this](const httplib::Request& req, httplib::Response& res) {
        Query q;
        try {
            Json doc = Json::parse(req.body);
            if (doc.is_object())
                for (const auto& [k, v] : doc.items())
                    if ((k == "Baseline" || k == "baseline") && v.is_string())
                        return send_error(res, {400, "bad_query", "send baseline values inline, not a file path", k});
            q = parse_query(doc);
        } catch (const Json::exception& e) {
            return send_error(res, {400, "bad_query", std::string("query is not valid JSON: ") + e.what(), ""});
        } catch (const ConfigError& e) {
            return send_error(res, {400, "bad_query", e.what(), e.field()});
        }
        if (q.dataset.empty()) return send_error(res, {400, "bad_query", "Dataset is required", "Dataset"});
        auto entry = registry_.find(q.dataset);
        if (!entry) return send_error(res, {400, "unknown_dataset", "unknown dataset '" + q.dataset + "'", "Dataset"});

        auto run = std::make_shared<Run>();
        run->query = std::move(q);
        run->dataset = entry;
        std::string id;
        {
            std::lock_guard lock(mu_);
            char buf[32];
            std::snprintf(buf, sizeof buf, "run-%06llu", static_cast<unsigned long long>(next_run_++));
            id = buf;
            run->status.id = id;
            runs_[id] = run;
            touch(id);
            queue_.push_back(id);
            evict();
        }
        cv_.notify_one();
        send_json(res, 202, {{"run_id", id}, {"status_url", "/runs/" + id}, {"report_url", "/reports/" + id}});
    });

    s.Get(R"(/runs/([A-Za-z0-9\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mu_);
        auto it = runs_.find(req.matches[1]);
        if (it == runs_.end()) return send_error(res, {404, "not_found", "unknown run", "run_id"});
        touch(it->first);
        send_json(res, 200, it->second->status.to_json());
    });

    auto artifact = [this](const std::string& id, const std::string& name, httplib::Response& res) {
        std::lock_guard lock(mu_);
        auto it = runs_.find(id);
        if (it == runs_.end()) return send_error(res, {404, "not_found", "unknown run", "run_id"});
        touch(id);
        const auto& run = *it->second;
        if (run.status.phase != Phase::Done) {
            Json body = ApiError{409, "not_ready", "report not available yet", ""}.to_json();
            body["phase"] = to_string(run.status.phase);
            if (run.status.phase == Phase::Failed) {
                body["message"] = "run failed: " + run.status.error;
                body["stage"] = run.status.stage;
            }
            return send_json(res, 409, body);
        }
        auto a = run.artifacts.find(name);
        if (a == run.artifacts.end()) return send_error(res, {404, "not_found", "unknown artifact '" + name + "'", "name"});
        res.status = 200;
        res.set_content(a->second, artifact_content_type(name));
    };

    s.Get(R"(/reports/([A-Za-z0-9\-]+))",
          [artifact](const httplib::Request& req, httplib::Response& res) { artifact(req.matches[1], "report.json", res); });
    s.Get(R"(/reports/([A-Za-z0-9\-]+)/artifacts/([A-Za-z0-9_.\-]+))",
          [artifact](const httplib::Request& req, httplib::Response& res) {
              artifact(req.matches[1], req.matches[2], res);
          });
}

}  // namespace whatif
