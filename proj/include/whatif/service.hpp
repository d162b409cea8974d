#pragma once

#include "whatif/pipeline.hpp"

#include <condition_variable>
#include <deque>
#include <list>
#include <thread>

namespace httplib {
class Server;
}

namespace whatif {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir;  // empty: keep everything in memory
    std::size_t job_workers = 2;
    std::size_t retention = 100;
    std::size_t max_upload_bytes = 100u * 1024u * 1024u;
    std::string bearer_token;  // empty: no auth
    std::string cors_origin = "*";
    ProviderConfig provider;

    static ServiceConfig from_json(const Json& j);
    static ServiceConfig load(const std::string& path);
};

/// JSON body of every non-2xx response.
struct ApiError {
    int status = 400;
    std::string code;
    std::string message;
    std::string field;

    Json to_json() const;
};

/// HTTP front end over the pipeline. Jobs run on a fixed pool; request
/// handlers never wait on a running job.
class Service {
public:
    explicit Service(ServiceConfig cfg);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves until stop(). Returns false if the bind failed.
    bool listen();
    /// Binds to an ephemeral port on cfg.host and serves on a background thread.
    int start_background();
    void stop();

    Registry& registry() { return registry_; }
    /// Called from job threads on every phase change, before the phase runs.
    /// Tests use it to hold a run at a given phase.
    void set_phase_hook(std::function<void(const std::string& run_id, Phase)> hook);

private:
    struct Run {
        RunStatus status;
        Query query;
        std::shared_ptr<const DatasetEntry> dataset;
        std::map<std::string, std::string> artifacts;
    };

    void routes();
    void worker_loop();
    void run_job(const std::string& id);
    void touch(const std::string& id);
    void evict();
    void load_data_dir();

    ServiceConfig cfg_;
    Registry registry_;
    std::unique_ptr<httplib::Server> server_;
    std::unique_ptr<LlmClient> client_;
    std::function<void(const std::string&, Phase)> phase_hook_;

    std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::string, std::shared_ptr<Run>> runs_;
    std::list<std::string> lru_;  // front = most recent
    std::deque<std::string> queue_;
    std::uint64_t next_run_ = 1;
    bool stopping_ = false;
    std::vector<std::thread> workers_;
    std::thread listener_;
};

}  // namespace whatif
